// Acceptance suite: one check per criterion, one PASS/FAIL line each,
// nonzero exit if any fails. Run through ctest or directly.

#include "caol/caol.hpp"
#include "caol/cnn2.hpp"
#include "caol/convops.hpp"
#include "caol/majorizers.hpp"
#include "caol/mbir.hpp"
#include "caol/rng.hpp"
#include "caol/synthetic.hpp"

#include "oracles.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

using namespace caol;

namespace {

struct ConvergedRun {
  std::string name;
  double tol = 0.0;
  double max_criticality = 0.0;
};
std::vector<ConvergedRun> g_converged_runs;

void note_converged(const std::string& name, double tol,
                    const std::vector<double>& criticality, bool converged) {
  if (!converged) return;
  double worst = 0.0;
  for (double c : criticality) worst = std::max(worst, c);
  g_converged_runs.push_back({name, tol, worst});
}

TrainingSet make_ts(std::vector<Image> images, Eigen::Index rh,
                    Eigen::Index rw,
                    BoundaryCondition bc = BoundaryCondition::circular) {
  TrainingSet ts;
  ts.images = std::move(images);
  ts.rh = rh;
  ts.rw = rw;
  ts.bc = bc;
  return ts;
}

bool descent_holds(const std::vector<bpegm::IterationRecord>& log,
                   std::string* detail) {
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& rec : log)
    for (double f : rec.block_objectives) {
      if (f > prev + 1e-12 * std::abs(prev)) {
        std::ostringstream os;
        os << "increase " << prev << " -> " << f << " at iter " << rec.iter;
        *detail = os.str();
        return false;
      }
      prev = f;
    }
  return true;
}

// --------------------------------------------------------------------------

bool criterion1_tight_frame(std::string* detail) {
  const std::vector<Image> corpus = synthetic_corpus(10, 64, 64, 101);
  TrainingSet ts = make_ts(corpus, 5, 5);
  CaolConfig config;
  config.alpha = 2.5e-4;
  config.model = CaolModel::orthogonal;
  config.rh = config.rw = 5;
  config.num_filters = 25;
  config.seed = 101;
  config.max_iter = 600;
  const CaolResult result = learn(ts, config);
  note_converged("P1 64x64 5x5x25", config.effective_tol(),
                 result.criticality, result.converged);

  if (result.orthogonality_residual > 1e-10) {
    *detail = "orthogonality residual " +
              std::to_string(result.orthogonality_residual);
    return false;
  }
  Rng rng(102);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Image probe = oracle::random_image(64, 64, rng);
    worst = std::max(worst, tf_residual(result.filters, probe,
                                        BoundaryCondition::circular));
    worst = std::max(worst, tf_residual(result.filters, probe,
                                        BoundaryCondition::symmetric));
  }
  std::ostringstream os;
  os << "ortho residual " << result.orthogonality_residual
     << ", max tf residual " << worst << " over 100 probes, both boundaries";
  *detail = os.str();
  return worst <= 1e-8;
}

bool criterion2_dominance(std::string* detail) {
  // Random-pixel corpora: the diagonal bound is unconditional, and the
  // scaled-identity bound (data-dependent by construction) holds in this
  // regime with a healthy margin.
  double worst_diag = 0.0, worst_scaled = 0.0;
  int chain_holds = 0;
  for (int c = 0; c < 20; ++c) {
    Rng rng(200 + c);
    std::vector<Image> corpus;
    for (int l = 0; l < 2; ++l)
      corpus.push_back(oracle::random_image(32, 32, rng));
    TrainingSet ts = make_ts(corpus, 5, 5);
    const Majorizer exact = exact_hessian(ts);
    const Majorizer diag = diag_majorizer(ts);
    const auto scaled = scaled_identity_majorizer(ts);
    const double d1 = dominance_check(exact, diag);
    const double d2 = dominance_check(exact, scaled.m);
    worst_diag = std::min(worst_diag, d1);
    worst_scaled = std::min(worst_scaled, d2);
    if (dominance_check(scaled.m, diag) >= -1e-9) ++chain_holds;
    if (d1 < -1e-9 || d2 < -1e-9) {
      *detail = "dominance violated on corpus " + std::to_string(c);
      return false;
    }
  }
  std::ostringstream os;
  os << "min-eig(diag-exact) >= " << worst_diag
     << ", min-eig(scaledI-exact) >= " << worst_scaled
     << "; middle ordering scaledI <= diag held on " << chain_holds
     << "/20 corpora (reported, data-dependent)";
  *detail = os.str();
  return true;
}

bool criterion3_sparse_coding_oracle(std::string* detail) {
  Rng rng(301);
  for (int rep = 0; rep < 200; ++rep) {
    const Eigen::Index n = 4 + static_cast<Eigen::Index>(rng.index(9));
    Image x(1, n);
    for (Eigen::Index i = 0; i < n; ++i) x.v[i] = rng.gaussian();
    TrainingSet ts = make_ts({x}, 1, 2);
    FilterBank bank(1, 2, 1);
    bank.d.col(0) = Eigen::Vector2d(rng.gaussian(), rng.gaussian());
    const double alpha = rng.uniform(1e-4, 0.3);
    const SparseCodeSet codes = sparse_code_exact(bank, ts, alpha);
    const Image c = conv_same(bank.filter(0), x, ts.bc);
    if (codes.at(0, 0).v != oracle::brute_force_l0(c.v, alpha)) {
      *detail = "mismatch at instance " + std::to_string(rep);
      return false;
    }
  }
  *detail = "200 instances, exact match under the >=-keeps tie rule";
  return true;
}

bool criterion4_lambda_limit(std::string* detail) {
  Rng rng(401);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const Image x = oracle::random_image(8, 8, rng);
    TrainingSet ts = make_ts({x}, 3, 3);
    const FilterBank bank =
        init_filters(3, 3, 9, FilterInit::random_seeded, 400 + rep);
    const double alpha = rng.uniform(1e-4, 1e-2);
    const SparseCodeSet exact = sparse_code_exact(bank, ts, alpha);
    const SparseCodeSet stepped =
        sparse_code_bpegm(bank, ts, alpha, 1.0 + 1e-12, exact);
    for (Eigen::Index k = 0; k < 9; ++k) {
      const double diff =
          (stepped.at(0, k).v - exact.at(0, k).v).lpNorm<Eigen::Infinity>();
      worst = std::max(worst, diff);
    }
  }
  std::ostringstream os;
  os << "max deviation " << worst << " across 20 random instances";
  *detail = os.str();
  return worst <= 1e-12;
}

bool criterion5_qcqp_prox(std::string* detail) {
  Rng rng(501);
  double worst_norm = 0.0, worst_kkt = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::Index r = 2 + static_cast<Eigen::Index>(rng.index(7));
    Eigen::VectorXd nu(r);
    for (Eigen::Index i = 0; i < r; ++i) nu[i] = rng.gaussian();
    Eigen::MatrixXd base(r, r);
    for (Eigen::Index i = 0; i < base.size(); ++i)
      base.data()[i] = rng.gaussian();
    const Eigen::MatrixXd gamma = base * base.transpose() / r;
    Eigen::VectorXd mdiag(r);
    for (Eigen::Index i = 0; i < r; ++i) mdiag[i] = rng.uniform(0.5, 3.0);
    const Majorizer mt = Majorizer::diagonal(mdiag);
    const double beta = rng.uniform(0.0, 5.0);

    const DiversityProxResult res = prox_diversity(nu, mt, beta, gamma);
    worst_norm = std::max(
        worst_norm, std::abs(res.d.squaredNorm() -
                             1.0 / static_cast<double>(r)));
    const Eigen::MatrixXd g_mat = mt.to_dense() + beta * gamma;
    const Eigen::VectorXd g = mt.apply(nu);
    worst_kkt = std::max(
        worst_kkt,
        ((g_mat + res.phi * Eigen::MatrixXd::Identity(r, r)) * res.d - g)
            .norm());
    auto objective = [&](const Eigen::VectorXd& d) {
      return 0.5 * (d - nu).dot(mt.apply(d - nu)) +
             0.5 * beta * d.dot(gamma * d);
    };
    const double f_opt = objective(res.d);
    for (int trial = 0; trial < 100000; ++trial) {
      Eigen::VectorXd cand(r);
      for (Eigen::Index i = 0; i < r; ++i) cand[i] = rng.gaussian();
      cand *= 1.0 / (std::sqrt(static_cast<double>(r)) * cand.norm());
      if (objective(cand) < f_opt - 1e-9) {
        *detail = "random feasible point beat the prox at instance " +
                  std::to_string(rep);
        return false;
      }
    }
    if (worst_norm > 1e-10 || worst_kkt > 1e-8) {
      std::ostringstream os;
      os << "constraint residual " << worst_norm << ", KKT " << worst_kkt;
      *detail = os.str();
      return false;
    }
  }
  std::ostringstream os;
  os << "50 instances, max norm residual " << worst_norm
     << ", max KKT residual " << worst_kkt << ", each beating 1e5 samples";
  *detail = os.str();
  return true;
}

bool criterion6_descent(std::string* detail) {
  std::ostringstream os;

  // (P0) + orthogonality constraint.
  {
    TrainingSet ts = make_ts(synthetic_corpus(2, 16, 16, 601), 3, 3);
    CaolConfig config;
    config.alpha = 2.5e-4;
    config.model = CaolModel::orthogonal;
    config.rh = config.rw = 3;
    config.num_filters = 9;
    config.max_iter = 500;
    config.tol = 1e-30;
    config.solver.extrapolation_enabled = false;
    config.solver.track_block_objectives = true;
    const CaolResult r = learn(ts, config);
    std::string why;
    if (!descent_holds(r.log, &why)) {
      *detail = "(P1) " + why;
      return false;
    }
    note_converged("descent P1", config.effective_tol(), r.criticality,
                   r.converged);
    os << "(P1) " << r.log.size() << " iters";
  }

  // (P0) + norm constraint + diversity regularizer.
  {
    TrainingSet ts = make_ts(synthetic_corpus(2, 16, 16, 602), 2, 2);
    CaolConfig config;
    config.alpha = 1e-4;
    config.beta = 1e3;
    config.model = CaolModel::diversity;
    config.rh = config.rw = 2;
    config.num_filters = 4;
    config.max_iter = 500;
    config.tol = 1e-30;
    config.solver.extrapolation_enabled = false;
    config.solver.track_block_objectives = true;
    const CaolResult r = learn(ts, config);
    std::string why;
    if (!descent_holds(r.log, &why)) {
      *detail = "(P2) " + why;
      return false;
    }
    note_converged("descent P2", config.effective_tol(), r.criticality,
                   r.converged);
    os << "; (P2) " << r.log.size() << " iters";
  }

  // (P3) denoising objective.
  {
    const Image x_true = synthetic_phantom(16, 603);
    Rng rng(603);
    Eigen::VectorXd y = x_true.v;
    for (Eigen::Index i = 0; i < y.size(); ++i)
      y[i] += 0.05 * rng.gaussian();
    const mbir::IdentityModel a(16 * 16);
    const FilterBank dct = init_filters(3, 3, 9, FilterInit::deterministic);
    mbir::ReconConfig config;
    config.gamma = 4.0;
    config.alpha_prime = 5e-4;
    config.tol = 1e-14;
    config.max_iter = 500;
    config.solver.extrapolation_enabled = false;
    config.solver.track_block_objectives = true;
    const mbir::ReconResult r = reconstruct(
        y, a, Eigen::VectorXd::Ones(16 * 16), dct, 16, 16, config);
    std::string why;
    if (!descent_holds(r.log, &why)) {
      *detail = "(P3) " + why;
      return false;
    }
    note_converged("descent P3", config.tol, r.criticality, r.converged);
    os << "; (P3) " << r.log.size() << " iters";
  }

  // (A1) two-layer model.
  {
    const std::vector<Image> corpus = synthetic_corpus(1, 32, 32, 604);
    cnn2::Cnn2Config config;
    config.rh1 = config.rw1 = 2;
    config.num_filters1 = 4;
    config.rh2 = config.rw2 = 2;
    config.num_filters2 = 4;
    config.pool_h = config.pool_w = 2;
    config.alpha1 = 1e-4;
    config.alpha2 = 1e-4;
    config.max_iter = 500;
    config.tol = 1e-30;
    config.seed = 604;
    config.solver.extrapolation_enabled = false;
    config.solver.track_block_objectives = true;
    const cnn2::TrainResult r = cnn2::train_two_layer(corpus, config);
    std::string why;
    if (!descent_holds(r.log, &why)) {
      *detail = "(A1) " + why;
      return false;
    }
    os << "; (A1) " << r.log.size() << " iters; slack 1e-12 everywhere";
  }

  *detail = os.str();
  return true;
}

// Shared Fig.-2/Fig.-3 comparison runs on the pinned corpus (L = 10,
// 64x64, 7x7x49), preprocessed like the training experiments (rescale +
// mean subtraction), one shared iteration budget. The runs converge to
// different critical points and the slow configurations cannot reach
// their own stopping tolerances inside the time budget on one core, so
// "final" below is the baseline's final cost at the shared budget and the
// counts are iterations to come within 1% of it. Every count is finite,
// which keeps the ordering meaningful.
struct ComparisonRuns {
  std::vector<double> exact, diag, bpg, diag_l2;  // objective traces
  bool done = false;
};
ComparisonRuns g_cmp;

std::vector<double> comparison_trace(const TrainingSet& ts,
                                     MajorizerKind kind, double lambda_d) {
  CaolConfig config;
  config.alpha = 2.5e-4;
  config.model = CaolModel::orthogonal;
  config.majorizer_kind = kind;
  config.lambda_d = lambda_d;
  config.rh = config.rw = 7;
  config.num_filters = 49;
  config.seed = 701;
  config.max_iter = 500;
  const CaolResult r = learn(ts, config);
  std::vector<double> trace;
  trace.reserve(r.log.size());
  for (const auto& rec : r.log) trace.push_back(rec.objective);
  return trace;
}

void run_comparisons() {
  if (g_cmp.done) return;
  TrainingSet ts = make_ts(synthetic_corpus(10, 64, 64, 701), 7, 7);
  for (auto& x : ts.images) x = mean_subtract(rescale_unit(x));
  g_cmp.exact = comparison_trace(ts, MajorizerKind::exact, 1.0 + 1e-10);
  g_cmp.diag = comparison_trace(ts, MajorizerKind::diagonal, 1.0 + 1e-10);
  g_cmp.bpg = comparison_trace(ts, MajorizerKind::lipschitz_bpg, 2.0);
  g_cmp.done = true;
}

int iters_to_target(const std::vector<double>& trace, double target) {
  const double thr = target + 0.01 * std::abs(target);
  for (size_t i = 0; i < trace.size(); ++i)
    if (trace[i] <= thr) return static_cast<int>(i) + 1;
  return static_cast<int>(trace.size()) + 1;
}

bool criterion7_majorizer_ordering(std::string* detail) {
  run_comparisons();
  const double final_cost = g_cmp.bpg.back();
  const int it_exact = iters_to_target(g_cmp.exact, final_cost);
  const int it_diag = iters_to_target(g_cmp.diag, final_cost);
  const int it_bpg = iters_to_target(g_cmp.bpg, final_cost);
  std::ostringstream os;
  os << "iters to within 1% of the BPG final cost (" << final_cost
     << "): exact=" << it_exact << ", diagonal=" << it_diag
     << ", lipschitz-bpg=" << it_bpg;
  *detail = os.str();
  return it_exact < it_diag && it_diag <= it_bpg && 2 * it_exact <= it_bpg;
}

bool criterion8_lambda_ordering(std::string* detail) {
  run_comparisons();
  // Same diagonal majorizer, lambda = 2 instead of 1 + eps.
  TrainingSet ts = make_ts(synthetic_corpus(10, 64, 64, 701), 7, 7);
  for (auto& x : ts.images) x = mean_subtract(rescale_unit(x));
  if (g_cmp.diag_l2.empty())
    g_cmp.diag_l2 = comparison_trace(ts, MajorizerKind::diagonal, 2.0);
  const double final_cost = g_cmp.diag_l2.back();
  const int it_sharp = iters_to_target(g_cmp.diag, final_cost);
  const int it_extrap = iters_to_target(g_cmp.diag_l2, final_cost);
  std::ostringstream os;
  os << "iters to within 1% of the lambda=2 final cost (" << final_cost
     << "): lambda=1+eps " << it_sharp << " vs lambda=2 " << it_extrap;
  *detail = os.str();
  return it_sharp <= it_extrap;
}

bool criterion9_diversity_direction(std::string* detail) {
  TrainingSet ts = make_ts(synthetic_corpus(4, 32, 32, 901), 5, 5);
  auto run_one = [&](double beta) {
    CaolConfig config;
    config.alpha = 1e-4;
    config.beta = beta;
    config.model = CaolModel::diversity;
    config.rh = config.rw = 5;
    config.num_filters = 20;
    config.seed = 901;
    config.max_iter = 300;
    const CaolResult r = learn(ts, config);
    return r.g_div_value;
  };
  const double tight = run_one(5e6);
  const double loose = run_one(5e4);
  std::ostringstream os;
  os << "g_div(beta=5e6) = " << tight << ", g_div(beta=5e4) = " << loose
     << ", ratio " << loose / std::max(tight, 1e-300);
  *detail = os.str();
  return tight * 10.0 <= loose;
}

bool criterion10_mbir(std::string* detail) {
  // Learned tight-frame bank, trained without mean subtraction.
  TrainingSet ts = make_ts(synthetic_corpus(6, 48, 48, 1001), 5, 5);
  CaolConfig tc;
  tc.alpha = 1e-4;
  tc.model = CaolModel::orthogonal;
  tc.rh = tc.rw = 5;
  tc.num_filters = 25;
  tc.seed = 1001;
  tc.max_iter = 200;
  const CaolResult trained = learn(ts, tc);
  const FilterBank& bank = trained.filters;

  std::ostringstream os;

  // Sparse-view tomography: 25% of a 60-view acquisition.
  {
    const Eigen::Index n = 64;
    const Image phantom = synthetic_phantom(n, 1002);
    // Every fourth view of a 60-view, 3-degree-spaced acquisition.
    std::vector<double> angles;
    for (int a = 0; a < 15; ++a) angles.push_back(12.0 * a);
    const mbir::RadonModel radon(angles, n);
    const Eigen::VectorXd y = radon.apply(phantom.v);
    const Eigen::VectorXd w = Eigen::VectorXd::Ones(radon.rows());

    mbir::ReconConfig wls;
    wls.gamma = 0.0;
    wls.alpha_prime = 1e-4;
    wls.tol = 1e-9;
    wls.max_iter = 800;
    const mbir::ReconResult base =
        reconstruct(y, radon, w, bank, n, n, wls);
    note_converged("radon WLS", wls.tol, base.criticality, base.converged);

    mbir::ReconConfig reg = wls;
    reg.gamma = 50.0;
    reg.alpha_prime = 2e-5;
    const mbir::ReconResult rec =
        reconstruct(y, radon, w, bank, n, n, reg);
    note_converged("radon learned", reg.tol, rec.criticality, rec.converged);

    const double rmse_wls = mbir::metrics(base.x, phantom).rmse;
    const double rmse_reg = mbir::metrics(rec.x, phantom).rmse;
    os << "radon 25% views: rmse " << rmse_reg << " (learned) vs "
       << rmse_wls << " (WLS)";
    if (!(rmse_reg < rmse_wls)) {
      *detail = os.str();
      return false;
    }
  }

  // Denoising at sigma = 0.05: at least 2 dB PSNR gain.
  {
    const Eigen::Index n = 64;
    const std::vector<Image> clean = synthetic_corpus(3, n, n, 1003);
    Rng rng(1004);
    double gain_sum = 0.0;
    for (const Image& x_true : clean) {
      Eigen::VectorXd y = x_true.v;
      for (Eigen::Index i = 0; i < y.size(); ++i)
        y[i] += 0.05 * rng.gaussian();
      const mbir::IdentityModel ident(n * n);
      mbir::ReconConfig config;
      config.gamma = 2.0;
      config.alpha_prime = 1e-4;
      config.tol = 1e-8;
      config.max_iter = 300;
      const mbir::ReconResult rec = reconstruct(
          y, ident, Eigen::VectorXd::Ones(n * n), bank, n, n, config);
      note_converged("denoise", config.tol, rec.criticality, rec.converged);
      Image noisy(n, n, y);
      gain_sum += mbir::metrics(rec.x, x_true).psnr -
                  mbir::metrics(noisy, x_true).psnr;
    }
    const double mean_gain = gain_sum / 3.0;
    os << "; denoising mean PSNR gain " << mean_gain << " dB";
    *detail = os.str();
    return mean_gain >= 2.0;
  }
}

bool criterion11_autoencoder_identity(std::string* detail) {
  Rng rng(1101);
  double worst = 0.0;
  const FilterBank dct = init_filters(5, 5, 25, FilterInit::deterministic);
  for (int rep = 0; rep < 10; ++rep) {
    const Image x = oracle::random_image(24, 24, rng);
    const Image back = mbir::autoencode(x, dct, 0.0);
    worst = std::max(worst, (back.v - x.v).norm() / x.v.norm());
  }
  for (int rep = 0; rep < 10; ++rep) {
    const FilterBank tf(3, 3, oracle::random_feasible_bank(9, 12, rng));
    const Image x = oracle::random_image(20, 20, rng);
    const Image back = mbir::autoencode(x, tf, 0.0);
    worst = std::max(worst, (back.v - x.v).norm() / x.v.norm());
  }
  std::ostringstream os;
  os << "max relative reconstruction error " << worst
     << " over 20 random inputs";
  *detail = os.str();
  return worst <= 1e-10;
}

bool criterion12_pooling_and_layer1(std::string* detail) {
  for (Eigen::Index omega : {2, 4, 16}) {
    const Eigen::Index blocks = 4;
    const Eigen::Index nn = blocks * omega;
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(blocks, nn);
    for (Eigen::Index b = 0; b < blocks; ++b)
      p.block(b, b * omega, 1, omega)
          .setConstant(1.0 / static_cast<double>(omega));
    const Eigen::MatrixXd gap =
        Eigen::MatrixXd::Identity(nn, nn) / static_cast<double>(omega) -
        p.transpose() * p;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gap,
                                                      Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-12) {
      *detail = "pooling majorizer gap indefinite at omega = " +
                std::to_string(omega);
      return false;
    }
  }
  Rng rng(1201);
  for (int rep = 0; rep < 500; ++rep) {
    const double c = rng.gaussian();
    const double zeta = rng.gaussian();
    const double op = rng.uniform(0.25, 16.0);
    const double alpha1 = rng.uniform(0.0, 0.5);
    Image ci(1, 1), zi(1, 1);
    ci.v[0] = c;
    zi.v[0] = zeta;
    const double z = cnn2::layer1_feature_core(ci, zi, alpha1, op).v[0];
    const double m = (op * c + zeta) / (op + 1.0);
    const double cost_zero = 0.5 * c * c + zeta * zeta / (2.0 * op);
    const double cost_keep = 0.5 * (c - m) * (c - m) +
                             (m - zeta) * (m - zeta) / (2.0 * op) + alpha1;
    const double expect = cost_keep <= cost_zero ? m : 0.0;
    if (z != expect) {
      *detail = "layer-1 core disagreed with the two-branch oracle";
      return false;
    }
  }
  *detail = "pooling gap PSD for omega in {2,4,16}; 500 exact two-branch "
            "matches";
  return true;
}

bool criterion13_criticality(std::string* detail) {
  std::ostringstream os;
  os << g_converged_runs.size() << " converged runs;";
  bool ok = true;
  for (const auto& run : g_converged_runs) {
    os << " " << run.name << ": " << run.max_criticality << " (tol "
       << run.tol << ")";
    if (run.max_criticality > 10.0 * run.tol) ok = false;
  }
  *detail = os.str();
  return ok;
}

}  // namespace

int main() {
  struct Criterion {
    int index;
    std::string name;
    std::function<bool(std::string*)> fn;
  };
  const std::vector<Criterion> criteria = {
      {1, "tight-frame feasibility after (P1)", criterion1_tight_frame},
      {2, "majorizer dominance on random corpora", criterion2_dominance},
      {3, "sparse coding equals exhaustive l0", criterion3_sparse_coding_oracle},
      {4, "lambda_Z -> 1 equivalence", criterion4_lambda_limit},
      {5, "QCQP prox feasibility/KKT/optimality", criterion5_qcqp_prox},
      {6, "descent with extrapolation disabled", criterion6_descent},
      {7, "majorizer sharpness ordering", criterion7_majorizer_ordering},
      {8, "lambda tradeoff under the diagonal majorizer",
       criterion8_lambda_ordering},
      {9, "diversity weight direction", criterion9_diversity_direction},
      {10, "MBIR beats unregularized baselines", criterion10_mbir},
      {11, "zero-threshold autoencoder identity",
       criterion11_autoencoder_identity},
      {12, "pooling majorizer and layer-1 oracle",
       criterion12_pooling_and_layer1},
      {13, "criticality proxy on converged runs", criterion13_criticality},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    std::string detail;
    const auto t0 = std::chrono::steady_clock::now();
    bool pass = false;
    try {
      pass = c.fn(&detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    std::printf("%s criterion %2d [%s] (%.1fs)%s%s\n",
                pass ? "PASS" : "FAIL", c.index, c.name.c_str(), secs,
                detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
  }
  if (failures > 0)
    std::printf("%d criterion(s) failed\n", failures);
  else
    std::printf("all 13 criteria passed\n");
  return failures == 0 ? 0 : 1;
}
