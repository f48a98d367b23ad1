#pragma once

#include "caol/bpegm.hpp"
#include "caol/caol.hpp"
#include "caol/convops.hpp"
#include "caol/majorizers.hpp"

#include <memory>
#include <vector>

namespace caol {
namespace mbir {

/// Measurement operator A with the entrywise-absolute and entrywise-squared
/// applications needed by the diagonal majorizer (Lemma-S.3 style) and the
/// spatial strength weights. Adjointness of apply/adjoint is a contract,
/// checked by the tests with random probes.
class ForwardModel : public LinearOperator {
 public:
  /// v |-> (A .^ 2)^T v, used for the per-pixel strength ratio.
  virtual Eigen::VectorXd sq_adjoint(const Eigen::VectorXd& v) const = 0;
};

/// A = I (denoising).
class IdentityModel final : public ForwardModel {
 public:
  explicit IdentityModel(Eigen::Index n) : n_(n) {}
  Eigen::Index rows() const override { return n_; }
  Eigen::Index cols() const override { return n_; }
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const override { return v; }
  Eigen::VectorXd adjoint(const Eigen::VectorXd& v) const override {
    return v;
  }
  Eigen::VectorXd abs_apply(const Eigen::VectorXd& v) const override {
    return v;
  }
  Eigen::VectorXd abs_adjoint(const Eigen::VectorXd& v) const override {
    return v;
  }
  Eigen::VectorXd sq_adjoint(const Eigen::VectorXd& v) const override {
    return v;
  }

 private:
  Eigen::Index n_;
};

/// Binary mask (inpainting): keeps the pixels where the mask is nonzero.
/// Measurements have one row per kept pixel, in row-major pixel order.
class MaskModel final : public ForwardModel {
 public:
  explicit MaskModel(const Image& mask);
  Eigen::Index rows() const override {
    return static_cast<Eigen::Index>(kept_.size());
  }
  Eigen::Index cols() const override { return n_; }
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const override;
  Eigen::VectorXd adjoint(const Eigen::VectorXd& v) const override;
  Eigen::VectorXd abs_apply(const Eigen::VectorXd& v) const override {
    return apply(v);
  }
  Eigen::VectorXd abs_adjoint(const Eigen::VectorXd& v) const override {
    return adjoint(v);
  }
  Eigen::VectorXd sq_adjoint(const Eigen::VectorXd& v) const override {
    return adjoint(v);
  }

 private:
  Eigen::Index n_;
  std::vector<Eigen::Index> kept_;
};

/// Small parallel-beam ray-sum operator on an n x n grid, pixel-driven with
/// linear detector interpolation. Desk-scale stand-in for a CT system
/// matrix; n <= 256.
class RadonModel final : public ForwardModel {
 public:
  RadonModel(const std::vector<double>& angles_deg, Eigen::Index n);
  Eigen::Index rows() const override { return num_angles_ * num_bins_; }
  Eigen::Index cols() const override { return n_ * n_; }
  Eigen::Index num_angles() const { return num_angles_; }
  Eigen::Index num_bins() const { return num_bins_; }
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const override;
  Eigen::VectorXd adjoint(const Eigen::VectorXd& v) const override;
  Eigen::VectorXd abs_apply(const Eigen::VectorXd& v) const override {
    return apply(v);  // all entries nonnegative
  }
  Eigen::VectorXd abs_adjoint(const Eigen::VectorXd& v) const override {
    return adjoint(v);
  }
  Eigen::VectorXd sq_adjoint(const Eigen::VectorXd& v) const override;

 private:
  Eigen::Index n_, num_angles_, num_bins_;
  // Per pixel and angle: detector bin and interpolation weight for the
  // (bin, bin+1) pair.
  std::vector<Eigen::Index> bin_;
  std::vector<double> frac_;
};

RadonModel radon_small(const std::vector<double>& angles_deg, Eigen::Index n);

struct ReconConfig {
  double gamma = 1.0;        // regularizer weight, > 0 (0 allowed: pure WLS)
  double alpha_prime = 1e-4; // threshold weight, > 0
  double lambda_a = 1.0 + 1e-10;
  bool use_psi = false;      // spatial strength weighting
  double tol = 1e-7;
  int max_iter = 2000;
  bpegm::SolverConfig solver;

  void validate() const;
};

struct SpatialStrength {
  Image psi;
  int zero_columns = 0;  // pixels never observed (psi set to 0, warned)
};

/// psi_n = sqrt(sum_l A_{l,n}^2 W_{l,l}) / sqrt(sum_l A_{l,n}^2); zero
/// columns give psi_n = 0 with a warning count.
SpatialStrength spatial_strength(const ForwardModel& a,
                                 const Eigen::VectorXd& w, Eigen::Index h,
                                 Eigen::Index w_pixels);

// Autoencoding filter pass sum_k flip(d_k) (*) H_t(d_k (*) x) under the
// circular boundary condition. For odd filter sizes the flip-convolution is
// the exact convolution adjoint, so zero thresholds with a tight-frame bank
// give the identity map.
Image autoencode(const Image& x, const FilterBank& bank, double threshold);
Image autoencode(const Image& x, const FilterBank& bank,
                 const Eigen::VectorXd& per_filter_thresholds);
Image autoencode(const Image& x, const FilterBank& bank,
                 const Image& per_pixel_thresholds);

/// One majorized x-step: eta = xa - Mtilde^{-1} A^T W (A xa - y), then the
/// nonnegative closed-form blend of eta with the psi-weighted autoencoder
/// of x. The thresholds use the current iterate x, not the extrapolated
/// point.
Image x_update(const Image& x, const Image& x_acute, const Eigen::VectorXd& y,
               const ForwardModel& a, const Eigen::VectorXd& w,
               const FilterBank& bank, const Image& psi,
               const Majorizer& m_tilde_a, double gamma, double alpha_prime);

struct ReconResult {
  Image x;
  std::vector<bpegm::IterationRecord> log;
  bool converged = false;
  int iterations = 0;
  double final_objective = 0.0;
  std::vector<double> criticality;
};

/// Solves the learned-regularizer reconstruction problem with the sparse
/// codes folded into the x-update thresholding. The filter bank is assumed
/// tight-frame (learned under the orthogonality constraint).
ReconResult reconstruct(const Eigen::VectorXd& y, const ForwardModel& a,
                        const Eigen::VectorXd& w, const FilterBank& bank,
                        Eigen::Index h, Eigen::Index w_pixels,
                        const ReconConfig& config,
                        const Image* x0 = nullptr);

struct ReconMetrics {
  double rmse = 0.0;
  double psnr = 0.0;  // peak 1.0
};

/// RMSE and PSNR over a region of interest (nonzero mask entries); null roi
/// means the whole image.
ReconMetrics metrics(const Image& x, const Image& x_ref,
                     const Image* roi = nullptr);

/// Poisson-Gaussian weights W_ll = rho_l^2 / (rho_l + sigma^2) for pre-log
/// photon counts rho.
Eigen::VectorXd poisson_gaussian_weights(const Eigen::VectorXd& rho,
                                         double sigma2);

}  // namespace mbir
}  // namespace caol
