#include "caol/majorizers.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace caol {

namespace {

constexpr double kSymTol = 1e-12;

double smallest_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m,
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace

Majorizer Majorizer::dense(Eigen::MatrixXd m) {
  require(m.rows() == m.cols() && m.rows() >= 1, "Majorizer: not square");
  const double scale = m.cwiseAbs().maxCoeff();
  require(scale == 0.0 ||
              (m - m.transpose()).cwiseAbs().maxCoeff() <= kSymTol * scale,
          "Majorizer: dense form must be symmetric");
  const double tr = m.trace();
  const double lmin = smallest_eigenvalue(m);
  if (!(lmin > 1e-10 * std::max(tr, 0.0)) || tr <= 0.0) {
    std::ostringstream os;
    os << "Majorizer: dense form not positive definite (smallest eigenvalue "
       << lmin << ", trace " << tr << ")";
    throw NumericalError(os.str());
  }
  Majorizer out;
  out.form_ = MajorizerForm::dense;
  out.dim_ = m.rows();
  out.dense_ = std::move(m);
  out.llt_ = std::make_shared<Eigen::LLT<Eigen::MatrixXd>>(out.dense_);
  if (out.llt_->info() != Eigen::Success)
    throw NumericalError("Majorizer: Cholesky factorization failed");
  return out;
}

Majorizer Majorizer::diagonal(Eigen::VectorXd d) {
  require(d.size() >= 1, "Majorizer: empty diagonal");
  if (!(d.minCoeff() > 0.0))
    throw NumericalError("Majorizer: diagonal form needs positive entries");
  Majorizer out;
  out.form_ = MajorizerForm::diagonal;
  out.dim_ = d.size();
  out.diag_ = std::move(d);
  return out;
}

Majorizer Majorizer::scaled_identity(double c, Eigen::Index n) {
  require(n >= 1, "Majorizer: bad dimension");
  if (!(c > 0.0))
    throw NumericalError("Majorizer: scaled identity needs c > 0");
  Majorizer out;
  out.form_ = MajorizerForm::scaled_identity;
  out.dim_ = n;
  out.scale_ = c;
  return out;
}

Eigen::VectorXd Majorizer::apply(const Eigen::VectorXd& v) const {
  require(v.size() == dim_, "Majorizer::apply: dimension mismatch");
  switch (form_) {
    case MajorizerForm::dense:
      return dense_ * v;
    case MajorizerForm::diagonal:
      return diag_.cwiseProduct(v);
    default:
      return scale_ * v;
  }
}

Eigen::VectorXd Majorizer::solve(const Eigen::VectorXd& v) const {
  require(v.size() == dim_, "Majorizer::solve: dimension mismatch");
  switch (form_) {
    case MajorizerForm::dense:
      return llt_->solve(v);
    case MajorizerForm::diagonal:
      return v.cwiseQuotient(diag_);
    default:
      return v / scale_;
  }
}

double Majorizer::quad(const Eigen::VectorXd& v) const {
  return v.dot(apply(v));
}

Majorizer Majorizer::scaled(double lambda) const {
  require(lambda > 0.0, "Majorizer::scaled: lambda must be positive");
  switch (form_) {
    case MajorizerForm::dense:
      return dense(lambda * dense_);
    case MajorizerForm::diagonal:
      return diagonal(lambda * diag_);
    default:
      return scaled_identity(lambda * scale_, dim_);
  }
}

Eigen::MatrixXd Majorizer::to_dense() const {
  switch (form_) {
    case MajorizerForm::dense:
      return dense_;
    case MajorizerForm::diagonal:
      return diag_.asDiagonal();
    default:
      return scale_ * Eigen::MatrixXd::Identity(dim_, dim_);
  }
}

const Eigen::MatrixXd& Majorizer::dense_matrix() const {
  require(form_ == MajorizerForm::dense, "Majorizer: not dense form");
  return dense_;
}

const Eigen::VectorXd& Majorizer::diagonal_vector() const {
  require(form_ == MajorizerForm::diagonal, "Majorizer: not diagonal form");
  return diag_;
}

double Majorizer::scale() const {
  require(form_ == MajorizerForm::scaled_identity,
          "Majorizer: not scaled identity form");
  return scale_;
}

void TrainingSet::validate() const {
  require(!images.empty(), "TrainingSet: need at least one image");
  require(rh >= 1 && rw >= 1, "TrainingSet: bad filter shape");
  for (const auto& x : images) {
    require(x.h >= rh && x.w >= rw,
            "TrainingSet: image smaller than filter");
    require(x.all_finite(), "TrainingSet: non-finite image entries");
  }
}

std::vector<Image> TrainingSet::padded() const {
  validate();
  std::vector<Image> out;
  out.reserve(images.size());
  for (const auto& x : images) out.push_back(pad_for_filter(x, rh, rw, bc));
  return out;
}

Eigen::MatrixXd filter_hessian(const std::vector<Image>& padded,
                               Eigen::Index h, Eigen::Index w,
                               Eigen::Index rh, Eigen::Index rw) {
  const Eigen::Index r = rh * rw;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(r, r);
  for (const auto& xhat : padded) {
    const Eigen::Index wp = xhat.w;
    for (Eigen::Index t = 0; t < r; ++t) {
      // Tap (a,b) reads xhat shifted by (rh-1-a, rw-1-b); see convops.
      const Eigen::Index oa = rh - 1 - t / rw, ob = rw - 1 - t % rw;
      for (Eigen::Index u = t; u < r; ++u) {
        const Eigen::Index pa = rh - 1 - u / rw, pb = rw - 1 - u % rw;
        double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
        for (Eigen::Index i = 0; i < h; ++i) {
          const double* x1 = xhat.v.data() + (i + oa) * wp + ob;
          const double* x2 = xhat.v.data() + (i + pa) * wp + pb;
          Eigen::Index j = 0;
          for (; j + 4 <= w; j += 4) {
            acc0 += x1[j] * x2[j];
            acc1 += x1[j + 1] * x2[j + 1];
            acc2 += x1[j + 2] * x2[j + 2];
            acc3 += x1[j + 3] * x2[j + 3];
          }
          for (; j < w; ++j) acc0 += x1[j] * x2[j];
        }
        const double acc = (acc0 + acc1) + (acc2 + acc3);
        m(t, u) += acc;
        if (u != t) m(u, t) += acc;
      }
    }
  }
  return m;
}

Eigen::MatrixXd filter_hessian(const TrainingSet& ts) {
  ts.validate();
  return filter_hessian(ts.padded(), ts.images[0].h, ts.images[0].w, ts.rh,
                        ts.rw);
}

Majorizer exact_hessian(const TrainingSet& ts) {
  return Majorizer::dense(filter_hessian(ts));
}

Majorizer diag_majorizer(const TrainingSet& ts) {
  ts.validate();
  const Eigen::Index r = ts.taps();
  Eigen::VectorXd d = Eigen::VectorXd::Zero(r);
  for (const auto& x : ts.images) {
    Image xhat = pad_for_filter(x, ts.rh, ts.rw, ts.bc);
    xhat.v = xhat.v.cwiseAbs();
    // s = |Psi| 1_R, the sliding-window sum of |xhat|.
    Filter ones(ts.rh, ts.rw, Eigen::VectorXd::Ones(r));
    const Image s = conv_same_padded(ones, xhat, x.h, x.w);
    const Filter col = psi_adjoint(xhat, s, ts.rh, ts.rw);
    d += col.taps;
  }
  if (!(d.minCoeff() > 0.0))
    throw NumericalError(
        "diag_majorizer: zero diagonal entry (degenerate training data)");
  return Majorizer::diagonal(std::move(d));
}

ScaledIdentityResult scaled_identity_majorizer(const TrainingSet& ts) {
  ts.validate();
  require(ts.bc == BoundaryCondition::circular,
          "scaled_identity_majorizer: circular boundary condition required");
  const Eigen::Index r = ts.taps();
  // Training autocorrelation at every filter lag: rho(t) =
  // sum_l <window at lag 0, window at lag t>. With circular padding the
  // Hessian depends on lags only, so this is its first row up to ordering.
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(r);
  for (const auto& x : ts.images) {
    const Image xhat = pad_for_filter(x, ts.rh, ts.rw, ts.bc);
    const Eigen::Index wp = xhat.w;
    for (Eigen::Index t = 0; t < r; ++t) {
      const Eigen::Index oa = t / ts.rw, ob = t % ts.rw;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < x.h; ++i) {
        const double* x1 = xhat.v.data() + i * wp;
        const double* x2 = xhat.v.data() + (i + oa) * wp + ob;
        for (Eigen::Index j = 0; j < x.w; ++j) acc += x1[j] * x2[j];
      }
      rho[t] += acc;
    }
  }
  const double c = rho.cwiseAbs().sum();
  ScaledIdentityResult out{Majorizer::scaled_identity(c, r), true};
  // The Lemma-4 argument goes through the circulant approximant of the
  // Toeplitz Hessian; if that circulant is not PD the bound is heuristic.
  Eigen::MatrixXd circ(r, r);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j) circ(i, j) = rho[(j - i + r) % r];
  out.circulant_pd =
      smallest_eigenvalue(0.5 * (circ + circ.transpose())) > -1e-12 * c;
  return out;
}

Majorizer diag_weighted_normal(const LinearOperator& a,
                               const Eigen::VectorXd& w,
                               double diagonal_floor) {
  require(w.size() == a.rows(), "diag_weighted_normal: weight size mismatch");
  require(w.minCoeff() >= 0.0, "diag_weighted_normal: negative weight");
  require(diagonal_floor >= 0.0, "diag_weighted_normal: negative floor");
  const Eigen::VectorXd col_sums =
      a.abs_apply(Eigen::VectorXd::Ones(a.cols()));
  Eigen::VectorXd d = a.abs_adjoint(w.cwiseProduct(col_sums));
  if (diagonal_floor > 0.0) d = d.cwiseMax(diagonal_floor);
  return Majorizer::diagonal(d);
}

Majorizer diag_hermitian(const Eigen::MatrixXd& a) {
  require(a.rows() == a.cols(), "diag_hermitian: not square");
  const double scale = a.cwiseAbs().maxCoeff();
  require(scale == 0.0 ||
              (a - a.transpose()).cwiseAbs().maxCoeff() <= kSymTol * scale,
          "diag_hermitian: input must be symmetric");
  if (smallest_eigenvalue(a) < -1e-10 * std::max(a.trace(), 1e-300))
    throw std::invalid_argument("diag_hermitian: input must be PSD");
  return Majorizer::diagonal(a.cwiseAbs() *
                             Eigen::VectorXd::Ones(a.cols()));
}

double dominance_check(const Majorizer& m1, const Majorizer& m2) {
  require(m1.dim() == m2.dim(), "dominance_check: dimension mismatch");
  return smallest_eigenvalue(m2.to_dense() - m1.to_dense());
}

}  // namespace caol
