#pragma once

#include "caol/image.hpp"

#include <cstdint>
#include <vector>

namespace caol {

/// Seeded corpus of piecewise-constant shapes (rectangles, soft disks) and
/// oriented edges, with optional additive gaussian noise, clipped to [0,1].
/// The same seed always produces the same bytes.
std::vector<Image> synthetic_corpus(Eigen::Index count, Eigen::Index h,
                                    Eigen::Index w, uint64_t seed,
                                    double noise_sigma = 0.0);

/// Single piecewise-constant phantom (nested shapes on an empty background)
/// used by the reconstruction experiments.
Image synthetic_phantom(Eigen::Index n, uint64_t seed);

}  // namespace caol
