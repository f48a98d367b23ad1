#include "caol/mbir.hpp"

#include <cmath>

namespace caol {
namespace mbir {

MaskModel::MaskModel(const Image& mask) : n_(mask.size()) {
  for (Eigen::Index i = 0; i < mask.size(); ++i)
    if (mask.v[i] != 0.0) kept_.push_back(i);
  require(!kept_.empty(), "MaskModel: mask keeps no pixels");
}

Eigen::VectorXd MaskModel::apply(const Eigen::VectorXd& v) const {
  require(v.size() == n_, "MaskModel::apply: size mismatch");
  Eigen::VectorXd out(rows());
  for (size_t i = 0; i < kept_.size(); ++i) out[i] = v[kept_[i]];
  return out;
}

Eigen::VectorXd MaskModel::adjoint(const Eigen::VectorXd& v) const {
  require(v.size() == rows(), "MaskModel::adjoint: size mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_);
  for (size_t i = 0; i < kept_.size(); ++i) out[kept_[i]] = v[i];
  return out;
}

RadonModel::RadonModel(const std::vector<double>& angles_deg, Eigen::Index n)
    : n_(n), num_angles_(static_cast<Eigen::Index>(angles_deg.size())) {
  require(!angles_deg.empty(), "RadonModel: empty angle list");
  require(n >= 1 && n <= 256, "RadonModel: grid size must be in [1, 256]");
  // Detector long enough to cover the grid diagonal at any angle.
  num_bins_ = 2 * static_cast<Eigen::Index>(
                      std::ceil(0.5 * std::sqrt(2.0) * n)) +
              1;
  bin_.resize(n_ * n_ * num_angles_);
  frac_.resize(n_ * n_ * num_angles_);
  const double pi = 3.14159265358979323846;
  const double center = 0.5 * (num_bins_ - 1);
  for (Eigen::Index a = 0; a < num_angles_; ++a) {
    const double th = angles_deg[a] * pi / 180.0;
    const double ct = std::cos(th), st = std::sin(th);
    for (Eigen::Index i = 0; i < n_; ++i) {
      // Pixel centers relative to the grid center.
      const double y = static_cast<double>(i) - 0.5 * (n_ - 1);
      for (Eigen::Index j = 0; j < n_; ++j) {
        const double x = static_cast<double>(j) - 0.5 * (n_ - 1);
        const double t = x * ct + y * st + center;
        const Eigen::Index b = static_cast<Eigen::Index>(std::floor(t));
        const Eigen::Index idx = (a * n_ + i) * n_ + j;
        // Detector is wide enough that b and b+1 stay in range.
        bin_[idx] = b;
        frac_[idx] = t - static_cast<double>(b);
      }
    }
  }
}

Eigen::VectorXd RadonModel::apply(const Eigen::VectorXd& v) const {
  require(v.size() == cols(), "RadonModel::apply: size mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(rows());
  for (Eigen::Index a = 0; a < num_angles_; ++a) {
    double* row = out.data() + a * num_bins_;
    const Eigen::Index base = a * n_ * n_;
    for (Eigen::Index p = 0; p < n_ * n_; ++p) {
      const Eigen::Index idx = base + p;
      const double f = frac_[idx];
      row[bin_[idx]] += (1.0 - f) * v[p];
      row[bin_[idx] + 1] += f * v[p];
    }
  }
  return out;
}

Eigen::VectorXd RadonModel::adjoint(const Eigen::VectorXd& v) const {
  require(v.size() == rows(), "RadonModel::adjoint: size mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(cols());
  for (Eigen::Index a = 0; a < num_angles_; ++a) {
    const double* row = v.data() + a * num_bins_;
    const Eigen::Index base = a * n_ * n_;
    for (Eigen::Index p = 0; p < n_ * n_; ++p) {
      const Eigen::Index idx = base + p;
      const double f = frac_[idx];
      out[p] += (1.0 - f) * row[bin_[idx]] + f * row[bin_[idx] + 1];
    }
  }
  return out;
}

Eigen::VectorXd RadonModel::sq_adjoint(const Eigen::VectorXd& v) const {
  require(v.size() == rows(), "RadonModel::sq_adjoint: size mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(cols());
  for (Eigen::Index a = 0; a < num_angles_; ++a) {
    const double* row = v.data() + a * num_bins_;
    const Eigen::Index base = a * n_ * n_;
    for (Eigen::Index p = 0; p < n_ * n_; ++p) {
      const Eigen::Index idx = base + p;
      const double f = frac_[idx];
      out[p] += (1.0 - f) * (1.0 - f) * row[bin_[idx]] +
                f * f * row[bin_[idx] + 1];
    }
  }
  return out;
}

RadonModel radon_small(const std::vector<double>& angles_deg,
                       Eigen::Index n) {
  return RadonModel(angles_deg, n);
}

void ReconConfig::validate() const {
  require(gamma >= 0.0, "ReconConfig: gamma must be nonnegative");
  require(alpha_prime > 0.0, "ReconConfig: alpha_prime must be positive");
  require(lambda_a > 1.0, "ReconConfig: lambda_a must exceed 1");
  require(tol > 0.0 && max_iter >= 0, "ReconConfig: bad stopping rule");
}

SpatialStrength spatial_strength(const ForwardModel& a,
                                 const Eigen::VectorXd& w, Eigen::Index h,
                                 Eigen::Index w_pixels) {
  require(w.size() == a.rows(), "spatial_strength: weight size mismatch");
  require(w.minCoeff() >= 0.0, "spatial_strength: negative weight");
  require(h * w_pixels == a.cols(), "spatial_strength: image size mismatch");
  const Eigen::VectorXd num = a.sq_adjoint(w);
  const Eigen::VectorXd den =
      a.sq_adjoint(Eigen::VectorXd::Ones(a.rows()));
  SpatialStrength out;
  out.psi = Image(h, w_pixels);
  for (Eigen::Index i = 0; i < den.size(); ++i) {
    if (den[i] > 0.0) {
      out.psi.v[i] = std::sqrt(num[i]) / std::sqrt(den[i]);
    } else {
      out.psi.v[i] = 0.0;  // unobserved pixel
      ++out.zero_columns;
    }
  }
  return out;
}

namespace {

Image autoencode_impl(const Image& x, const FilterBank& bank,
                      const double* scalar, const Eigen::VectorXd* per_filter,
                      const Image* per_pixel) {
  const Image xhat =
      pad_for_filter(x, bank.rh, bank.rw, BoundaryCondition::circular);
  Image out(x.h, x.w);
  for (Eigen::Index k = 0; k < bank.count(); ++k) {
    Image c = conv_same_padded(bank.filter(k), xhat, x.h, x.w);
    if (scalar)
      c = hard_threshold(c, *scalar);
    else if (per_filter)
      c = hard_threshold(c, (*per_filter)[k]);
    else
      c = hard_threshold(c, *per_pixel);
    out.v += conv_same(flip(bank.filter(k)), c,
                       BoundaryCondition::circular)
                 .v;
  }
  return out;
}

}  // namespace

Image autoencode(const Image& x, const FilterBank& bank, double threshold) {
  return autoencode_impl(x, bank, &threshold, nullptr, nullptr);
}

Image autoencode(const Image& x, const FilterBank& bank,
                 const Eigen::VectorXd& per_filter_thresholds) {
  require(per_filter_thresholds.size() == bank.count(),
          "autoencode: one threshold per filter required");
  return autoencode_impl(x, bank, nullptr, &per_filter_thresholds, nullptr);
}

Image autoencode(const Image& x, const FilterBank& bank,
                 const Image& per_pixel_thresholds) {
  require(per_pixel_thresholds.same_shape(x),
          "autoencode: per-pixel thresholds must match the image");
  return autoencode_impl(x, bank, nullptr, nullptr, &per_pixel_thresholds);
}

Image x_update(const Image& x, const Image& x_acute, const Eigen::VectorXd& y,
               const ForwardModel& a, const Eigen::VectorXd& w,
               const FilterBank& bank, const Image& psi,
               const Majorizer& m_tilde_a, double gamma, double alpha_prime) {
  require(x.same_shape(x_acute) && psi.same_shape(x),
          "x_update: shape mismatch");
  // Flip-convolution is the circular convolution adjoint only for odd
  // sizes, and the closed-form blend relies on it.
  require(bank.rh % 2 == 1 && bank.rw % 2 == 1,
          "x_update: filters must have odd sizes");
  const Eigen::VectorXd res = a.apply(x_acute.v) - y;
  const Eigen::VectorXd eta =
      x_acute.v - m_tilde_a.solve(a.adjoint(w.cwiseProduct(res)));
  if (!eta.allFinite()) throw NumericalError("x_update: diverged");
  Image thr(x.h, x.w);
  thr.v = (2.0 * alpha_prime * psi.v.array()).sqrt();
  const Image pulled = autoencode(x, bank, thr);
  Image out(x.h, x.w);
  // Mtilde_A is diagonal, so (Mtilde_A + gamma I)^{-1} acts elementwise.
  const Eigen::VectorXd md = m_tilde_a.apply(Eigen::VectorXd::Ones(x.size()));
  out.v = ((md.array() * eta.array() + gamma * pulled.v.array()) /
           (md.array() + gamma))
              .max(0.0);
  if (!out.v.allFinite()) throw NumericalError("x_update: diverged");
  return out;
}

ReconResult reconstruct(const Eigen::VectorXd& y, const ForwardModel& a,
                        const Eigen::VectorXd& w, const FilterBank& bank,
                        Eigen::Index h, Eigen::Index w_pixels,
                        const ReconConfig& config, const Image* x0) {
  config.validate();
  require(h * w_pixels == a.cols(), "reconstruct: image size mismatch");
  require(y.size() == a.rows() && w.size() == a.rows(),
          "reconstruct: measurement size mismatch");
  require(w.minCoeff() >= 0.0, "reconstruct: negative weights");
  require(bank.rh <= h && bank.rw <= w_pixels,
          "reconstruct: filters larger than the image");
  require(bank.rh % 2 == 1 && bank.rw % 2 == 1,
          "reconstruct: filters must have odd sizes");

  const Eigen::Index n = h * w_pixels;
  // Unobserved pixels (zero operator columns) get a floored majorizer
  // entry; the data gradient is zero there, so the floor only keeps the
  // diagonal invertible.
  const Eigen::VectorXd probe =
      a.abs_adjoint(w.cwiseProduct(a.abs_apply(Eigen::VectorXd::Ones(n))));
  const double floor_value =
      std::max(1e-12 * probe.maxCoeff(), 1e-300);
  const Majorizer m_a = diag_weighted_normal(a, w, floor_value);
  const Majorizer m_tilde = m_a.scaled(config.lambda_a);
  Image psi(h, w_pixels);
  if (config.use_psi) {
    psi = spatial_strength(a, w, h, w_pixels).psi;
  } else {
    psi.v.setOnes();
  }

  const double gamma = config.gamma;
  const double alpha_prime = config.alpha_prime;

  // (P3) objective with the code minimum in closed form: each response
  // entry contributes min(c^2/2, alpha' psi_n).
  auto objective = [&](const std::vector<Eigen::VectorXd>& xs) {
    Image xi(h, w_pixels, xs[0]);
    const Eigen::VectorXd res = a.apply(xs[0]) - y;
    double acc = 0.5 * res.dot(w.cwiseProduct(res));
    if (gamma > 0.0) {
      const Image xhat =
          pad_for_filter(xi, bank.rh, bank.rw, BoundaryCondition::circular);
      double reg = 0.0;
      for (Eigen::Index k = 0; k < bank.count(); ++k) {
        const Image c = conv_same_padded(bank.filter(k), xhat, h, w_pixels);
        for (Eigen::Index i = 0; i < n; ++i)
          reg += std::min(0.5 * c.v[i] * c.v[i], alpha_prime * psi.v[i]);
      }
      acc += gamma * reg;
    }
    return acc;
  };

  bpegm::BlockSpec xb;
  xb.name = "x";
  xb.dim = n;
  xb.lambda = config.lambda_a;
  xb.majorizer = [&m_a](const std::vector<Eigen::VectorXd>&, int) {
    return m_a;
  };
  xb.grad = [&](const std::vector<Eigen::VectorXd>&,
                const Eigen::VectorXd& point) {
    return Eigen::VectorXd(a.adjoint(w.cwiseProduct(a.apply(point) - y)));
  };
  // Prox of the folded regularizer: the codes are re-thresholded at the
  // current iterate xs[0] and the diagonal blend is solved in closed form.
  xb.prox = [&](const std::vector<Eigen::VectorXd>& xs,
                const Eigen::VectorXd& point, const Majorizer& mt) {
    const Eigen::VectorXd md = mt.apply(Eigen::VectorXd::Ones(n));
    Eigen::VectorXd pulled = Eigen::VectorXd::Zero(n);
    if (gamma > 0.0) {
      Image xi(h, w_pixels, xs[0]);
      Image thr(h, w_pixels);
      thr.v = (2.0 * alpha_prime * psi.v.array()).sqrt();
      pulled = autoencode(xi, bank, thr).v;
    }
    return Eigen::VectorXd(((md.array() * point.array() +
                             gamma * pulled.array()) /
                            (md.array() + gamma))
                               .max(0.0));
  };

  bpegm::SolverConfig solver = config.solver;
  solver.tol = config.tol;
  solver.max_iter = config.max_iter;

  std::vector<Eigen::VectorXd> start(1);
  if (x0) {
    require(x0->h == h && x0->w == w_pixels, "reconstruct: bad x0 shape");
    start[0] = x0->v;
  } else {
    start[0] = Eigen::VectorXd::Zero(n);
  }

  bpegm::SolveResult sr =
      bpegm::solve({xb}, objective, std::move(start), solver);

  ReconResult out;
  out.x = Image(h, w_pixels, sr.x[0]);
  out.log = std::move(sr.log);
  out.converged = sr.converged;
  out.iterations = sr.iterations;
  out.final_objective =
      out.log.empty() ? objective(sr.x) : out.log.back().objective;
  out.criticality = std::move(sr.criticality);
  return out;
}

ReconMetrics metrics(const Image& x, const Image& x_ref, const Image* roi) {
  require(x.same_shape(x_ref), "metrics: shape mismatch");
  if (roi) require(roi->same_shape(x), "metrics: roi shape mismatch");
  double acc = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (roi && roi->v[i] == 0.0) continue;
    const double d = x.v[i] - x_ref.v[i];
    acc += d * d;
    ++count;
  }
  require(count > 0, "metrics: empty roi");
  ReconMetrics out;
  out.rmse = std::sqrt(acc / static_cast<double>(count));
  out.psnr = out.rmse > 0.0
                 ? 20.0 * std::log10(1.0 / out.rmse)
                 : std::numeric_limits<double>::infinity();
  return out;
}

Eigen::VectorXd poisson_gaussian_weights(const Eigen::VectorXd& rho,
                                         double sigma2) {
  require(sigma2 >= 0.0, "poisson_gaussian_weights: negative variance");
  require(rho.minCoeff() >= 0.0,
          "poisson_gaussian_weights: negative photon count");
  return rho.array().square() / (rho.array() + sigma2).max(1e-300);
}

}  // namespace mbir
}  // namespace caol
