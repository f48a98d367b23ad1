#pragma once

#include "caol/bpegm.hpp"
#include "caol/caol.hpp"
#include "caol/convops.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace caol {
namespace cnn2 {

/// Block-mean pooling with an (wh x ww) window; both image dimensions must
/// be divisible by the window.
Image avg_pool(const Image& z, Eigen::Index wh, Eigen::Index ww);

/// Adjoint of avg_pool: replicates each pooled value over its block scaled
/// by 1/omega.
Image avg_pool_adjoint(const Image& pooled, Eigen::Index wh, Eigen::Index ww,
                       Eigen::Index h, Eigen::Index w);

/// Adjoint of x |-> conv_same(d, x, bc) in the image argument, exact for
/// both boundary conditions (pad-adjoint composed with the valid-correlation
/// adjoint).
Image conv_adjoint_image(const Filter& d, const Image& z,
                         BoundaryCondition bc);

/// Closed-form layer-1 feature minimizer of
///   1/2 ||c - z||^2 + 1/(2 omega') ||z - zeta||^2 + alpha1 ||z||_0:
/// the combined quadratic has minimizer m = (omega' c + zeta)/(omega' + 1)
/// and curvature (omega'+1)/omega', giving
///   z = H_{sqrt(2 alpha1 omega'/(omega'+1))}(m).
Image layer1_feature_core(const Image& c, const Image& zeta, double alpha1,
                          double omega_prime);

struct Cnn2Config {
  Eigen::Index rh1 = 3, rw1 = 3, num_filters1 = 9;
  Eigen::Index rh2 = 3, rw2 = 3, num_filters2 = 4;
  Eigen::Index pool_h = 2, pool_w = 2;
  double alpha1 = 1e-4;
  double alpha2 = 1e-4;
  double lambda_d = 1.0 + 1e-10;
  double lambda_z = 1.0 + 1e-10;
  FilterInit init = FilterInit::random_seeded;
  uint64_t seed = 0;
  BoundaryCondition bc = BoundaryCondition::circular;
  double tol = 1e-8;
  int max_iter = 200;
  bpegm::SolverConfig solver;

  void validate() const;
};

struct TwoLayerModel {
  FilterBank d1;                  // R1 x K1
  std::vector<FilterBank> d2;     // K1 banks, R2 x K2 each
  std::vector<Image> z1;          // L*K1 features at image size (l*K1 + k)
  std::vector<Image> z2;          // L*K2 features at pooled size (l*K2 + k')
  Eigen::Index pool_h = 1, pool_w = 1;
  Eigen::Index num_images = 1;
};

struct TrainResult {
  TwoLayerModel model;
  std::vector<bpegm::IterationRecord> log;
  bool converged = false;
  int iterations = 0;
  double final_objective = 0.0;
};

/// Objective of the two-layer model on the given corpus.
double objective_two_layer(const TwoLayerModel& model,
                           const std::vector<Image>& corpus,
                           BoundaryCondition bc, double alpha1, double alpha2);

/// Thresholded second-layer features from the current first-layer features.
std::vector<Image> layer2_features(const TwoLayerModel& model,
                                   double alpha2, BoundaryCondition bc);

/// Layer-ordered reBPEG-M training: D1, then the per-filter feature blocks,
/// then the second-layer banks (sequential over k), then the second-layer
/// features. K2 = 0 reduces to single-layer training under the
/// orthogonality constraint.
TrainResult train_two_layer(const std::vector<Image>& corpus,
                            const Cnn2Config& config);

// Model files: magic "CAOLCNN0"; K1, K2, R1, R2, pool_h, pool_w as uint32
// LE; then the D1 filter bank record followed by the K1 D2 records.
void save_model(const TwoLayerModel& model, const std::string& path);
TwoLayerModel load_model(const std::string& path);

}  // namespace cnn2
}  // namespace caol
