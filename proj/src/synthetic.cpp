#include "caol/synthetic.hpp"

#include "caol/rng.hpp"

#include <algorithm>
#include <cmath>

namespace caol {

namespace {

void add_rect(Image& img, Rng& rng) {
  const Eigen::Index h = img.h, w = img.w;
  const Eigen::Index i0 = static_cast<Eigen::Index>(rng.index(h));
  const Eigen::Index j0 = static_cast<Eigen::Index>(rng.index(w));
  const Eigen::Index ih = 2 + static_cast<Eigen::Index>(rng.index(
                                  std::max<Eigen::Index>(h / 3, 1)));
  const Eigen::Index iw = 2 + static_cast<Eigen::Index>(rng.index(
                                  std::max<Eigen::Index>(w / 3, 1)));
  const double level = rng.uniform();
  for (Eigen::Index i = i0; i < std::min(h, i0 + ih); ++i)
    for (Eigen::Index j = j0; j < std::min(w, j0 + iw); ++j)
      img.at(i, j) = level;
}

void add_disk(Image& img, Rng& rng) {
  const double ci = rng.uniform(0.2, 0.8) * static_cast<double>(img.h);
  const double cj = rng.uniform(0.2, 0.8) * static_cast<double>(img.w);
  const double rad =
      rng.uniform(0.08, 0.25) * static_cast<double>(std::min(img.h, img.w));
  const double level = rng.uniform();
  for (Eigen::Index i = 0; i < img.h; ++i)
    for (Eigen::Index j = 0; j < img.w; ++j) {
      const double d = std::hypot(static_cast<double>(i) - ci,
                                  static_cast<double>(j) - cj);
      // Half-pixel soft edge keeps the shapes mildly band limited.
      const double t = std::clamp(rad + 0.5 - d, 0.0, 1.0);
      img.at(i, j) = (1.0 - t) * img.at(i, j) + t * level;
    }
}

void add_edge(Image& img, Rng& rng) {
  // Oriented step edge through a random point.
  const double theta = rng.uniform(0.0, 3.14159265358979323846);
  const double nx = std::cos(theta), ny = std::sin(theta);
  const double pi = rng.uniform() * static_cast<double>(img.h);
  const double pj = rng.uniform() * static_cast<double>(img.w);
  const double hi = rng.uniform(0.5, 1.0);
  const double lo = rng.uniform(0.0, 0.5);
  for (Eigen::Index i = 0; i < img.h; ++i)
    for (Eigen::Index j = 0; j < img.w; ++j) {
      const double s = (static_cast<double>(i) - pi) * ny +
                       (static_cast<double>(j) - pj) * nx;
      const double t = std::clamp(s + 0.5, 0.0, 1.0);  // soft transition
      const double v = lo + (hi - lo) * t;
      img.at(i, j) = 0.5 * img.at(i, j) + 0.5 * v;
    }
}

}  // namespace

std::vector<Image> synthetic_corpus(Eigen::Index count, Eigen::Index h,
                                    Eigen::Index w, uint64_t seed,
                                    double noise_sigma) {
  require(count >= 1 && h >= 4 && w >= 4, "synthetic_corpus: bad shape");
  require(noise_sigma >= 0.0, "synthetic_corpus: negative noise level");
  std::vector<Image> out;
  out.reserve(count);
  Rng rng(seed);
  for (Eigen::Index l = 0; l < count; ++l) {
    Image img(h, w);
    img.v.setConstant(rng.uniform(0.1, 0.4));
    if (l % 3 != 2) {
      const int shapes = 3 + static_cast<int>(rng.index(4));
      for (int s = 0; s < shapes; ++s) {
        if (rng.uniform() < 0.5)
          add_rect(img, rng);
        else
          add_disk(img, rng);
      }
    } else {
      const int edges = 2 + static_cast<int>(rng.index(3));
      for (int e = 0; e < edges; ++e) add_edge(img, rng);
    }
    if (noise_sigma > 0.0)
      for (Eigen::Index i = 0; i < img.size(); ++i)
        img.v[i] += noise_sigma * rng.gaussian();
    for (Eigen::Index i = 0; i < img.size(); ++i)
      img.v[i] = std::clamp(img.v[i], 0.0, 1.0);
    out.push_back(std::move(img));
  }
  return out;
}

Image synthetic_phantom(Eigen::Index n, uint64_t seed) {
  require(n >= 8, "synthetic_phantom: grid too small");
  Rng rng(seed);
  Image img(n, n);
  const double c = 0.5 * static_cast<double>(n - 1);
  auto soft_disk = [&](double ci, double cj, double rad, double level) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        const double d = std::hypot(static_cast<double>(i) - ci,
                                    static_cast<double>(j) - cj);
        const double t = std::clamp(rad + 0.5 - d, 0.0, 1.0);
        img.at(i, j) = (1.0 - t) * img.at(i, j) + t * level;
      }
  };
  soft_disk(c, c, 0.42 * n, 0.35);
  soft_disk(c - 0.15 * n, c - 0.1 * n, 0.12 * n, 0.8);
  soft_disk(c + 0.12 * n, c + 0.15 * n, 0.09 * n, 0.6);
  soft_disk(c + 0.05 * n + rng.uniform(-1.0, 1.0),
            c - 0.2 * n + rng.uniform(-1.0, 1.0), 0.05 * n, 0.95);
  for (Eigen::Index i = 0; i < img.size(); ++i)
    img.v[i] = std::clamp(img.v[i], 0.0, 1.0);
  return img;
}

}  // namespace caol
