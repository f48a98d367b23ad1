#include "caol/caol.hpp"

#include "caol/rng.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace caol {

void CaolConfig::validate() const {
  require(alpha > 0.0, "CaolConfig: alpha must be positive");
  require(beta >= 0.0, "CaolConfig: beta must be nonnegative");
  require(rh >= 1 && rw >= 1 && num_filters >= 1, "CaolConfig: bad shape");
  if (model == CaolModel::orthogonal)
    require(rh * rw <= num_filters,
            "CaolConfig: orthogonal model requires R <= K");
  require(lambda_d > 1.0, "CaolConfig: lambda_d must exceed 1");
  require(max_iter >= 0, "CaolConfig: max_iter must be nonnegative");
  if (majorizer_kind == MajorizerKind::scaled_identity) {
    // checked again against the training set's boundary condition in learn()
  }
}

double CaolConfig::effective_tol() const {
  if (tol > 0.0) return tol;
  return (majorizer_kind == MajorizerKind::exact) ? 1e-13 : 1e-5;
}

Eigen::Index SparseCodeSet::nonzeros() const {
  Eigen::Index n = 0;
  for (const auto& img : z)
    n += (img.v.array() != 0.0).count();
  return n;
}

double objective_P0(const FilterBank& bank, const SparseCodeSet& codes,
                    const TrainingSet& ts, double alpha) {
  require(codes.num_images == ts.count() &&
              codes.num_filters == bank.count(),
          "objective_P0: shape mismatch");
  double acc = 0.0;
  for (Eigen::Index l = 0; l < ts.count(); ++l) {
    const Image xhat = pad_for_filter(ts.images[l], bank.rh, bank.rw, ts.bc);
    for (Eigen::Index k = 0; k < bank.count(); ++k) {
      const Image c = conv_same_padded(bank.filter(k), xhat, ts.images[l].h,
                                       ts.images[l].w);
      const Image& zk = codes.at(l, k);
      acc += 0.5 * (c.v - zk.v).squaredNorm();
      acc += alpha * static_cast<double>((zk.v.array() != 0.0).count());
    }
  }
  return acc;
}

Image hard_threshold(const Image& v, double a) {
  require(a >= 0.0, "hard_threshold: negative threshold");
  Image out = v;
  for (Eigen::Index i = 0; i < out.size(); ++i)
    if (std::abs(out.v[i]) < a) out.v[i] = 0.0;
  return out;
}

Image hard_threshold(const Image& v, const Image& a) {
  require(v.same_shape(a), "hard_threshold: threshold shape mismatch");
  require(a.v.minCoeff() >= 0.0, "hard_threshold: negative threshold");
  Image out = v;
  for (Eigen::Index i = 0; i < out.size(); ++i)
    if (std::abs(out.v[i]) < a.v[i]) out.v[i] = 0.0;
  return out;
}

SparseCodeSet sparse_code_exact(const FilterBank& bank, const TrainingSet& ts,
                                double alpha) {
  require(alpha >= 0.0, "sparse_code_exact: negative alpha");
  const double thr = std::sqrt(2.0 * alpha);
  SparseCodeSet codes(ts.count(), bank.count(), ts.images[0].h,
                      ts.images[0].w);
  for (Eigen::Index l = 0; l < ts.count(); ++l) {
    const Image xhat = pad_for_filter(ts.images[l], bank.rh, bank.rw, ts.bc);
    for (Eigen::Index k = 0; k < bank.count(); ++k)
      codes.at(l, k) = hard_threshold(
          conv_same_padded(bank.filter(k), xhat, ts.images[l].h,
                           ts.images[l].w),
          thr);
  }
  return codes;
}

SparseCodeSet sparse_code_bpegm(const FilterBank& bank, const TrainingSet& ts,
                                double alpha, double lambda_z,
                                const SparseCodeSet& z_acute) {
  require(lambda_z > 1.0, "sparse_code_bpegm: lambda_z must exceed 1");
  require(z_acute.num_images == ts.count() &&
              z_acute.num_filters == bank.count(),
          "sparse_code_bpegm: shape mismatch");
  const double thr = std::sqrt(2.0 * alpha / lambda_z);
  const double wz = 1.0 - 1.0 / lambda_z;
  SparseCodeSet codes(ts.count(), bank.count(), ts.images[0].h,
                      ts.images[0].w);
  for (Eigen::Index l = 0; l < ts.count(); ++l) {
    const Image xhat = pad_for_filter(ts.images[l], bank.rh, bank.rw, ts.bc);
    for (Eigen::Index k = 0; k < bank.count(); ++k) {
      Image zeta = conv_same_padded(bank.filter(k), xhat, ts.images[l].h,
                                    ts.images[l].w);
      zeta.v = wz * z_acute.at(l, k).v + (1.0 / lambda_z) * zeta.v;
      codes.at(l, k) = hard_threshold(zeta, thr);
    }
  }
  return codes;
}

Eigen::MatrixXd filter_gradient(const FilterBank& bank_extrap,
                                const SparseCodeSet& codes,
                                const TrainingSet& ts) {
  require(codes.num_images == ts.count() &&
              codes.num_filters == bank_extrap.count(),
          "filter_gradient: shape mismatch");
  Eigen::MatrixXd g =
      Eigen::MatrixXd::Zero(bank_extrap.taps(), bank_extrap.count());
  for (Eigen::Index l = 0; l < ts.count(); ++l) {
    const Image xhat =
        pad_for_filter(ts.images[l], bank_extrap.rh, bank_extrap.rw, ts.bc);
    for (Eigen::Index k = 0; k < bank_extrap.count(); ++k) {
      Image r = conv_same_padded(bank_extrap.filter(k), xhat,
                                 ts.images[l].h, ts.images[l].w);
      r.v -= codes.at(l, k).v;
      g.col(k) +=
          psi_adjoint(xhat, r, bank_extrap.rh, bank_extrap.rw).taps;
    }
  }
  return g;
}

FilterBank prox_orthogonal(const Eigen::MatrixXd& v, const Majorizer& mtilde,
                           Eigen::Index rh, Eigen::Index rw) {
  const Eigen::Index r = v.rows(), k = v.cols();
  require(r == rh * rw, "prox_orthogonal: matrix rows must equal rh*rw");
  require(r <= k,
          "prox_orthogonal: unsupported shape R > K (constraint infeasible)");
  require(mtilde.dim() == r, "prox_orthogonal: majorizer dimension mismatch");
  Eigen::MatrixXd p(r, k);
  for (Eigen::Index j = 0; j < k; ++j) p.col(j) = mtilde.apply(v.col(j));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      p, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::MatrixXd d = (1.0 / std::sqrt(static_cast<double>(r))) *
                            svd.matrixU() * svd.matrixV().transpose();
  return FilterBank(rh, rw, d);
}

Eigen::MatrixXd gram_complement(const FilterBank& bank, Eigen::Index k) {
  require(k >= 0 && k < bank.count(), "gram_complement: filter index");
  return bank.d * bank.d.transpose() -
         bank.d.col(k) * bank.d.col(k).transpose();
}

DiversityProxResult prox_diversity(const Eigen::VectorXd& nu,
                                   const Majorizer& mtilde, double beta,
                                   const Eigen::MatrixXd& gamma) {
  const Eigen::Index r = nu.size();
  require(beta >= 0.0, "prox_diversity: beta must be nonnegative");
  require(gamma.rows() == r && gamma.cols() == r && mtilde.dim() == r,
          "prox_diversity: dimension mismatch");
  const double target = 1.0 / static_cast<double>(r);

  Eigen::MatrixXd g_mat = mtilde.to_dense() + beta * gamma;
  g_mat = 0.5 * (g_mat + g_mat.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g_mat);
  const Eigen::VectorXd sigma = es.eigenvalues();  // ascending
  const Eigen::MatrixXd& q = es.eigenvectors();
  if (!(sigma.minCoeff() > 0.0))
    throw NumericalError("prox_diversity: G = Mtilde + beta*Gamma not PD");

  const Eigen::VectorXd g = mtilde.apply(nu);
  const Eigen::VectorXd gt = q.transpose() * g;

  // Unconstrained minimizer; optimal if already on the sphere.
  const Eigen::VectorXd d0 = q * gt.cwiseQuotient(sigma);
  if (std::abs(d0.squaredNorm() * r - 1.0) <= 1e-12)
    return {d0, 0.0, 0};

  // Modes with exactly vanishing coefficients drop out of the secular sum.
  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < r; ++i)
    if (std::abs(gt[i]) > 1e-300) active.push_back(i);

  if (active.empty()) {
    // g = 0: every feasible d has the same linear term; the minimum-energy
    // direction is the smallest eigenvector, scaled onto the sphere.
    Eigen::VectorXd d = q.col(0) / std::sqrt(static_cast<double>(r));
    return {d, -sigma[0], 0};
  }

  auto secular = [&](double phi) {
    double f = 0.0;
    for (Eigen::Index i : active) {
      const double den = phi + sigma[i];
      f += gt[i] * gt[i] / (den * den);
    }
    return f;
  };
  auto secular_deriv = [&](double phi) {
    double fp = 0.0;
    for (Eigen::Index i : active) {
      const double den = phi + sigma[i];
      fp -= 2.0 * gt[i] * gt[i] / (den * den * den);
    }
    return fp;
  };

  const double sigma_min = sigma[0];
  double phi = -sigma_min + 1e-10;

  if (secular(phi) < target) {
    // All coefficients at the smallest eigenvalue vanished and the secular
    // value is already below 1/R at the pole: put the remaining energy into
    // the smallest eigenvector (the classical hard case).
    const double f_at = secular(-sigma_min);
    Eigen::VectorXd d = Eigen::VectorXd::Zero(r);
    for (Eigen::Index i : active)
      d += (gt[i] / (sigma[i] - sigma_min)) * q.col(i);
    d += std::sqrt(std::max(target - f_at, 0.0)) * q.col(0);
    return {d, -sigma_min, 0};
  }

  // Accelerated Newton on the normalized equation 1/f = R; iterates increase
  // monotonically toward the unique root right of the pole.
  int iters = 0;
  double f = secular(phi);
  while (std::abs(f * r - 1.0) > 1e-12) {
    if (++iters > 200) {
      std::ostringstream os;
      os << "prox_diversity: Newton did not converge (residual "
         << std::abs(f * r - 1.0) << ")";
      throw NumericalError(os.str());
    }
    const double fp = secular_deriv(phi);
    phi -= 2.0 * (f / fp) * (std::sqrt(f * static_cast<double>(r)) - 1.0);
    f = secular(phi);
  }

  Eigen::VectorXd coeff = Eigen::VectorXd::Zero(r);
  for (Eigen::Index i : active) coeff[i] = gt[i] / (sigma[i] + phi);
  return {q * coeff, phi, iters};
}

double g_div(const Eigen::MatrixXd& d) {
  const Eigen::Index r = d.rows();
  Eigen::MatrixXd gram = d.transpose() * d;
  gram.diagonal().array() -= 1.0 / static_cast<double>(r);
  return gram.squaredNorm();
}

double g_div(const FilterBank& bank) { return g_div(bank.d); }

FilterBank init_filters(Eigen::Index rh, Eigen::Index rw, Eigen::Index k,
                        FilterInit mode, uint64_t seed) {
  const Eigen::Index r = rh * rw;
  if (mode == FilterInit::deterministic) {
    require(rh == rw && k == r,
            "init_filters: deterministic mode requires square filters with "
            "K = R");
    const Eigen::Index s = rh;
    Eigen::MatrixXd dct(s, s);
    const double pi = 3.14159265358979323846;
    for (Eigen::Index u = 0; u < s; ++u) {
      const double au = std::sqrt((u == 0 ? 1.0 : 2.0) / s);
      for (Eigen::Index n = 0; n < s; ++n)
        dct(u, n) = au * std::cos(pi * (2 * n + 1) * u / (2.0 * s));
    }
    FilterBank bank(rh, rw, k);
    const double scale = 1.0 / std::sqrt(static_cast<double>(r));
    for (Eigen::Index u = 0; u < s; ++u)
      for (Eigen::Index v = 0; v < s; ++v) {
        const Eigen::Index col = u * s + v;
        for (Eigen::Index a = 0; a < s; ++a)
          for (Eigen::Index b = 0; b < s; ++b)
            bank.d(a * s + b, col) = scale * dct(u, a) * dct(v, b);
      }
    return bank;
  }
  Rng rng(seed);
  FilterBank bank(rh, rw, k);
  for (Eigen::Index j = 0; j < k; ++j)
    for (Eigen::Index i = 0; i < r; ++i) bank.d(i, j) = rng.gaussian();
  bank.d.col(0).setOnes();
  const double scale = 1.0 / std::sqrt(static_cast<double>(r));
  for (Eigen::Index j = 0; j < k; ++j) {
    const double n = bank.d.col(j).norm();
    bank.d.col(j) *= scale / (n > 0.0 ? n : 1.0);
  }
  return bank;
}

namespace {

// Shared state of one learn() call; the engine closures capture a pointer.
struct LearnProblem {
  const TrainingSet* ts = nullptr;
  std::vector<Image> padded;
  Eigen::Index h = 0, w = 0, n = 0, r = 0, k = 0, l = 0;
  double alpha = 0.0, beta = 0.0;
  CaolModel model = CaolModel::orthogonal;
  Eigen::Index rh = 0, rw = 0;
  Majorizer m_d = Majorizer::scaled_identity(1.0, 1);
  bool have_hessian = false;
  Eigen::MatrixXd hessian;  // exact Hessian when available

  // Cache of Psi^T z columns, keyed by the code vector it was built from.
  Eigen::MatrixXd psi_t_z;
  Eigen::VectorXd psi_t_z_key;
  // Objective cache, valid when the full state matches the snapshot.
  double cached_objective = 0.0;
  std::vector<Eigen::VectorXd> objective_key;

  Eigen::Index num_blocks() const {
    return model == CaolModel::orthogonal ? 2 : k + 1;
  }
  Eigen::Index z_block() const { return num_blocks() - 1; }

  Eigen::MatrixXd bank_matrix(const std::vector<Eigen::VectorXd>& xs) const {
    if (model == CaolModel::orthogonal)
      return Eigen::Map<const Eigen::MatrixXd>(xs[0].data(), r, k);
    Eigen::MatrixXd d(r, k);
    for (Eigen::Index j = 0; j < k; ++j) d.col(j) = xs[j];
    return d;
  }

  const double* z_data(const std::vector<Eigen::VectorXd>& xs,
                       Eigen::Index li, Eigen::Index ki) const {
    return xs[z_block()].data() + (li * k + ki) * n;
  }

  void ensure_psi_t_z(const std::vector<Eigen::VectorXd>& xs) {
    const Eigen::VectorXd& zvec = xs[z_block()];
    if (psi_t_z_key.size() == zvec.size() && psi_t_z_key == zvec) return;
    psi_t_z.resize(r, k);
    psi_t_z.setZero();
    Image zimg(h, w);
    for (Eigen::Index li = 0; li < l; ++li)
      for (Eigen::Index ki = 0; ki < k; ++ki) {
        zimg.v = Eigen::Map<const Eigen::VectorXd>(z_data(xs, li, ki), n);
        psi_t_z.col(ki) += psi_adjoint(padded[li], zimg, rh, rw).taps;
      }
    psi_t_z_key = zvec;
  }

  // Gradient of the data term for filter column ki at the (possibly
  // extrapolated) taps `point`.
  Eigen::VectorXd filter_grad_col(const std::vector<Eigen::VectorXd>& xs,
                                  Eigen::Index ki,
                                  const Eigen::VectorXd& point) {
    if (have_hessian) {
      ensure_psi_t_z(xs);
      return hessian * point - psi_t_z.col(ki);
    }
    const Filter d(rh, rw, point);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(r);
    Image zimg(h, w);
    for (Eigen::Index li = 0; li < l; ++li) {
      Image res = conv_same_padded(d, padded[li], h, w);
      res.v -= Eigen::Map<const Eigen::VectorXd>(z_data(xs, li, ki), n);
      g += psi_adjoint(padded[li], res, rh, rw).taps;
    }
    return g;
  }

  // Constraint indicator of the model: +inf off the feasible set. The
  // random filter initialization starts infeasible for (P1); the first
  // filter update lands on the constraint set and every later iterate
  // stays there to machine precision.
  double feasibility_penalty(const Eigen::MatrixXd& bank) const {
    const double inv_r = 1.0 / static_cast<double>(r);
    if (model == CaolModel::orthogonal) {
      Eigen::MatrixXd gram = bank * bank.transpose();
      gram.diagonal().array() -= inv_r;
      if (gram.norm() > 1e-9)
        return std::numeric_limits<double>::infinity();
    } else {
      for (Eigen::Index j = 0; j < k; ++j)
        if (std::abs(bank.col(j).squaredNorm() - inv_r) > 1e-9)
          return std::numeric_limits<double>::infinity();
    }
    return 0.0;
  }

  double objective(const std::vector<Eigen::VectorXd>& xs) {
    if (objective_key.size() == xs.size()) {
      bool match = true;
      for (size_t i = 0; i < xs.size() && match; ++i)
        match = objective_key[i].size() == xs[i].size() &&
                objective_key[i] == xs[i];
      if (match) return cached_objective;
    }
    const Eigen::MatrixXd bank = bank_matrix(xs);
    if (feasibility_penalty(bank) > 0.0)
      return std::numeric_limits<double>::infinity();
    double acc = 0.0;
    Eigen::Index nnz = 0;
    for (Eigen::Index li = 0; li < l; ++li)
      for (Eigen::Index ki = 0; ki < k; ++ki) {
        const Filter d(rh, rw, bank.col(ki));
        const Image c = conv_same_padded(d, padded[li], h, w);
        const Eigen::Map<const Eigen::VectorXd> zd(z_data(xs, li, ki), n);
        acc += 0.5 * (c.v - zd).squaredNorm();
        nnz += (zd.array() != 0.0).count();
      }
    acc += alpha * static_cast<double>(nnz);
    if (model == CaolModel::diversity) acc += 0.5 * beta * g_div(bank);
    cached_objective = acc;
    objective_key = xs;
    return acc;
  }

  // Exact sparse-code solve; also refreshes the objective cache since the
  // convolutions are computed here anyway.
  Eigen::VectorXd sparse_code_solve(const std::vector<Eigen::VectorXd>& xs) {
    const Eigen::MatrixXd bank = bank_matrix(xs);
    const double penalty = feasibility_penalty(bank);
    const double thr = std::sqrt(2.0 * alpha);
    Eigen::VectorXd zout(l * k * n);
    double data_term = 0.0;
    Eigen::Index nnz = 0;
    for (Eigen::Index li = 0; li < l; ++li)
      for (Eigen::Index ki = 0; ki < k; ++ki) {
        const Filter d(rh, rw, bank.col(ki));
        const Image c = conv_same_padded(d, padded[li], h, w);
        double* dst = zout.data() + (li * k + ki) * n;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double v = c.v[i];
          if (std::abs(v) < thr) {
            dst[i] = 0.0;
            data_term += 0.5 * v * v;
          } else {
            dst[i] = v;
            ++nnz;
          }
        }
      }
    cached_objective = data_term + alpha * static_cast<double>(nnz) + penalty;
    if (model == CaolModel::diversity)
      cached_objective += 0.5 * beta * g_div(bank);
    objective_key = xs;
    objective_key[z_block()] = zout;
    return zout;
  }
};

}  // namespace

CaolResult learn(const TrainingSet& ts, const CaolConfig& config) {
  config.validate();
  ts.validate();
  require(ts.rh == config.rh && ts.rw == config.rw,
          "learn: training set and config disagree on filter shape");

  LearnProblem p;
  p.ts = &ts;
  p.padded = ts.padded();
  p.h = ts.images[0].h;
  p.w = ts.images[0].w;
  p.n = p.h * p.w;
  p.rh = config.rh;
  p.rw = config.rw;
  p.r = config.rh * config.rw;
  p.k = config.num_filters;
  p.l = ts.count();
  p.alpha = config.alpha;
  p.beta = config.beta;
  p.model = config.model;
  for (const auto& x : ts.images)
    require(x.h == p.h && x.w == p.w,
            "learn: training images must share one size");

  CaolResult result;
  if (config.custom_majorizer) {
    require(config.custom_majorizer->dim() == p.r,
            "learn: custom majorizer dimension mismatch");
    p.m_d = *config.custom_majorizer;
    if (p.m_d.form() == MajorizerForm::dense &&
        config.majorizer_kind == MajorizerKind::exact) {
      // A cached exact Hessian doubles as the gradient kernel.
      p.hessian = p.m_d.dense_matrix();
      p.have_hessian = true;
    }
  } else {
    switch (config.majorizer_kind) {
    case MajorizerKind::exact:
      p.hessian = filter_hessian(p.padded, p.h, p.w, p.rh, p.rw);
      p.have_hessian = true;
      p.m_d = Majorizer::dense(p.hessian);
      break;
    case MajorizerKind::diagonal:
      p.m_d = diag_majorizer(ts);
      break;
    case MajorizerKind::scaled_identity: {
      const ScaledIdentityResult si = scaled_identity_majorizer(ts);
      if (si.circulant_pd) {
        p.m_d = si.m;
      } else {
        // Lemma-4 scaling is heuristic here; fall back to the diagonal
        // design, which dominates unconditionally.
        p.m_d = diag_majorizer(ts);
        result.scaled_identity_fallback = true;
      }
      break;
    }
    case MajorizerKind::lipschitz_bpg: {
      p.hessian = filter_hessian(p.padded, p.h, p.w, p.rh, p.rw);
      p.have_hessian = true;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
          p.hessian, Eigen::EigenvaluesOnly);
      const double lmax = es.eigenvalues().maxCoeff();
      if (!(lmax > 0.0))
        throw NumericalError("learn: degenerate Hessian for BPG baseline");
      p.m_d = Majorizer::scaled_identity(lmax, p.r);
      break;
    }
    }
  }

  const FilterBank d0 =
      init_filters(p.rh, p.rw, p.k, config.init, config.seed);
  const SparseCodeSet z0 = sparse_code_exact(d0, ts, config.alpha);

  bpegm::SolverConfig solver = config.solver;
  solver.tol = config.effective_tol();
  solver.max_iter = config.max_iter;

  std::vector<bpegm::BlockSpec> blocks;
  std::vector<Eigen::VectorXd> x0;
  const Majorizer m_d = p.m_d;

  if (config.model == CaolModel::orthogonal) {
    bpegm::BlockSpec db;
    db.name = "D";
    db.dim = p.r * p.k;
    db.columns = p.k;  // per-filter majorizer
    db.lambda = config.lambda_d;
    db.majorizer = [&p](const std::vector<Eigen::VectorXd>&, int) {
      return p.m_d;
    };
    db.grad = [&p](const std::vector<Eigen::VectorXd>& xs,
                   const Eigen::VectorXd& point) {
      Eigen::VectorXd g(point.size());
      for (Eigen::Index ki = 0; ki < p.k; ++ki)
        g.segment(ki * p.r, p.r) =
            p.filter_grad_col(xs, ki, point.segment(ki * p.r, p.r));
      return g;
    };
    db.prox = [&p](const std::vector<Eigen::VectorXd>&,
                   const Eigen::VectorXd& point, const Majorizer& mt) {
      const Eigen::Map<const Eigen::MatrixXd> v(point.data(), p.r, p.k);
      const FilterBank bank = prox_orthogonal(v, mt, p.rh, p.rw);
      return Eigen::VectorXd(
          Eigen::Map<const Eigen::VectorXd>(bank.d.data(), p.r * p.k));
    };
    blocks.push_back(std::move(db));
    x0.emplace_back(Eigen::Map<const Eigen::VectorXd>(d0.d.data(),
                                                      p.r * p.k));
  } else {
    for (Eigen::Index ki = 0; ki < p.k; ++ki) {
      bpegm::BlockSpec db;
      db.name = "d" + std::to_string(ki);
      db.dim = p.r;
      db.lambda = config.lambda_d;
      db.majorizer = [&p](const std::vector<Eigen::VectorXd>&, int) {
        return p.m_d;
      };
      db.grad = [&p, ki](const std::vector<Eigen::VectorXd>& xs,
                         const Eigen::VectorXd& point) {
        return p.filter_grad_col(xs, ki, point);
      };
      // The column update minimizes the exact restriction of the joint
      // objective: (beta/2) g_div contributes beta * d^T Gamma_k d to
      // column k (each cross term appears under both of its columns), so
      // the QCQP coupling coefficient is 2 beta.
      db.prox = [&p, ki](const std::vector<Eigen::VectorXd>& xs,
                         const Eigen::VectorXd& point, const Majorizer& mt) {
        Eigen::MatrixXd gam = Eigen::MatrixXd::Zero(p.r, p.r);
        for (Eigen::Index j = 0; j < p.k; ++j)
          if (j != ki) gam += xs[j] * xs[j].transpose();
        return prox_diversity(point, mt, 2.0 * p.beta, gam).d;
      };
      blocks.push_back(std::move(db));
      x0.emplace_back(d0.d.col(ki));
    }
  }

  bpegm::BlockSpec zb;
  zb.name = "Z";
  zb.dim = p.l * p.k * p.n;
  zb.exact_solve = [&p](const std::vector<Eigen::VectorXd>& xs) {
    return p.sparse_code_solve(xs);
  };
  blocks.push_back(std::move(zb));
  Eigen::VectorXd zvec(p.l * p.k * p.n);
  for (Eigen::Index li = 0; li < p.l; ++li)
    for (Eigen::Index ki = 0; ki < p.k; ++ki)
      zvec.segment((li * p.k + ki) * p.n, p.n) = z0.at(li, ki).v;
  x0.push_back(std::move(zvec));

  auto objective = [&p](const std::vector<Eigen::VectorXd>& xs) {
    return p.objective(xs);
  };

  bpegm::SolveResult sr = bpegm::solve(blocks, objective, std::move(x0),
                                       solver);

  result.filters = FilterBank(p.rh, p.rw, p.bank_matrix(sr.x));
  result.codes = SparseCodeSet(p.l, p.k, p.h, p.w);
  for (Eigen::Index li = 0; li < p.l; ++li)
    for (Eigen::Index ki = 0; ki < p.k; ++ki)
      result.codes.at(li, ki).v =
          Eigen::Map<const Eigen::VectorXd>(p.z_data(sr.x, li, ki), p.n);
  result.log = std::move(sr.log);
  result.converged = sr.converged;
  result.iterations = sr.iterations;
  result.final_objective =
      result.log.empty() ? p.objective(sr.x) : result.log.back().objective;
  result.criticality = std::move(sr.criticality);
  result.g_div_value = g_div(result.filters);
  Eigen::MatrixXd gram = result.filters.d * result.filters.d.transpose();
  gram.diagonal().array() -= 1.0 / static_cast<double>(p.r);
  result.orthogonality_residual = gram.norm();
  // TF residual on a seeded probe image.
  Rng rng(0x7f4a7c15);
  Image probe(p.h, p.w);
  for (Eigen::Index i = 0; i < probe.size(); ++i) probe.v[i] = rng.gaussian();
  result.tf_residual_probe = tf_residual(result.filters, probe, ts.bc);
  return result;
}

Image rescale_unit(const Image& x) {
  const double lo = x.v.minCoeff(), hi = x.v.maxCoeff();
  Image out = x;
  if (hi > lo)
    out.v = (out.v.array() - lo) / (hi - lo);
  else
    out.v.setZero();
  return out;
}

Image mean_subtract(const Image& x) {
  Image out = x;
  out.v.array() -= out.v.mean();
  return out;
}

AlphaSuggestion suggest_alpha(const TrainingSet& ts) {
  ts.validate();
  AlphaSuggestion out;
  // Scaled first-order differences with ||d||^2 = 1/R, R = 2.
  std::vector<Filter> diffs;
  const double c = 0.5;  // 1/sqrt(2R)
  if (ts.images[0].w >= 2)
    diffs.emplace_back(1, 2, Eigen::Vector2d(c, -c));
  if (ts.images[0].h >= 2)
    diffs.emplace_back(2, 1, Eigen::Vector2d(c, -c));
  require(!diffs.empty(), "suggest_alpha: images too small");
  std::vector<double> mags;
  for (const auto& x : ts.images)
    for (const auto& d : diffs) {
      const Image cimg = conv_same(d, x, ts.bc);
      for (Eigen::Index i = 0; i < cimg.size(); ++i)
        if (cimg.v[i] != 0.0) mags.push_back(std::abs(cimg.v[i]));
    }
  if (mags.empty()) {
    out.constant_warning = true;
    return out;  // nothing to sparsify
  }
  std::sort(mags.begin(), mags.end());
  // Threshold keeping the largest 95% of the nonzero responses.
  const size_t cut = static_cast<size_t>(0.05 * static_cast<double>(mags.size()));
  const double thr = mags[std::min(cut, mags.size() - 1)];
  out.alpha_est = 0.5 * thr * thr;
  out.alpha_lo = out.alpha_est / 10.0;
  const size_t kept =
      mags.end() - std::lower_bound(mags.begin(), mags.end(), thr);
  out.nonzero_fraction =
      static_cast<double>(kept) / static_cast<double>(mags.size());
  return out;
}

}  // namespace caol
