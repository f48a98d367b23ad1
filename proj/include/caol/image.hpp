#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <utility>

namespace caol {

/// Thrown when a computation degenerates numerically (non-PD majorizer,
/// diverging iterates, root solver failure). Usage errors throw
/// std::invalid_argument instead.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

enum class BoundaryCondition { circular, symmetric };

inline const char* to_string(BoundaryCondition bc) {
  return bc == BoundaryCondition::circular ? "circular" : "symmetric";
}

/// Real-valued 2D array stored row-major. Training signals, sparse codes and
/// reconstructions all use this type; 1D signals are 1xW images.
struct Image {
  Eigen::Index h = 0;
  Eigen::Index w = 0;
  Eigen::VectorXd v;  // h*w entries, row-major

  Image() = default;
  Image(Eigen::Index height, Eigen::Index width)
      : h(height), w(width), v(Eigen::VectorXd::Zero(height * width)) {
    require(height >= 1 && width >= 1, "Image: dimensions must be >= 1");
  }
  Image(Eigen::Index height, Eigen::Index width, Eigen::VectorXd data)
      : h(height), w(width), v(std::move(data)) {
    require(h >= 1 && w >= 1, "Image: dimensions must be >= 1");
    require(v.size() == h * w, "Image: data size does not match dimensions");
  }

  double& at(Eigen::Index i, Eigen::Index j) { return v[i * w + j]; }
  double at(Eigen::Index i, Eigen::Index j) const { return v[i * w + j]; }

  Eigen::Index size() const { return h * w; }
  bool same_shape(const Image& o) const { return h == o.h && w == o.w; }
  bool all_finite() const { return v.allFinite(); }
};

/// Single convolution kernel of rh x rw taps, row-major. R = rh*rw.
struct Filter {
  Eigen::Index rh = 0;
  Eigen::Index rw = 0;
  Eigen::VectorXd taps;  // rh*rw entries, row-major

  Filter() = default;
  Filter(Eigen::Index fh, Eigen::Index fw)
      : rh(fh), rw(fw), taps(Eigen::VectorXd::Zero(fh * fw)) {
    require(fh >= 1 && fw >= 1, "Filter: dimensions must be >= 1");
  }
  Filter(Eigen::Index fh, Eigen::Index fw, Eigen::VectorXd t)
      : rh(fh), rw(fw), taps(std::move(t)) {
    require(rh >= 1 && rw >= 1, "Filter: dimensions must be >= 1");
    require(taps.size() == rh * rw, "Filter: tap count does not match shape");
  }

  double& at(Eigen::Index a, Eigen::Index b) { return taps[a * rw + b]; }
  double at(Eigen::Index a, Eigen::Index b) const { return taps[a * rw + b]; }
  Eigen::Index size() const { return rh * rw; }
};

/// K filters of identical shape, gathered as the columns of an R x K matrix.
struct FilterBank {
  Eigen::Index rh = 0;
  Eigen::Index rw = 0;
  Eigen::MatrixXd d;  // R x K; column k holds filter k row-major

  FilterBank() = default;
  FilterBank(Eigen::Index fh, Eigen::Index fw, Eigen::Index k)
      : rh(fh), rw(fw), d(Eigen::MatrixXd::Zero(fh * fw, k)) {
    require(fh >= 1 && fw >= 1 && k >= 1, "FilterBank: invalid shape");
  }
  FilterBank(Eigen::Index fh, Eigen::Index fw, Eigen::MatrixXd cols)
      : rh(fh), rw(fw), d(std::move(cols)) {
    require(rh >= 1 && rw >= 1, "FilterBank: invalid filter shape");
    require(d.rows() == rh * rw, "FilterBank: matrix rows must equal rh*rw");
    require(d.cols() >= 1, "FilterBank: need at least one filter");
  }

  Eigen::Index taps() const { return rh * rw; }
  Eigen::Index count() const { return d.cols(); }
  Filter filter(Eigen::Index k) const { return Filter(rh, rw, d.col(k)); }
};

}  // namespace caol
