#pragma once

#include "caol/bpegm.hpp"
#include "caol/convops.hpp"
#include "caol/majorizers.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace caol {

enum class CaolModel { orthogonal, diversity };

enum class MajorizerKind {
  exact,            // Prop.-2 Hessian, dense
  diagonal,         // Lemma-3 diagonal
  scaled_identity,  // Lemma-4 scaled identity (circular boundary)
  lipschitz_bpg,    // BPG baseline: largest Hessian eigenvalue times identity
};

enum class FilterInit { deterministic, random_seeded };

struct CaolConfig {
  double alpha = 1e-4;          // > 0
  double beta = 0.0;            // diversity weight, >= 0 (P2 only)
  CaolModel model = CaolModel::orthogonal;
  MajorizerKind majorizer_kind = MajorizerKind::exact;
  double lambda_d = 1.0 + 1e-10;
  FilterInit init = FilterInit::random_seeded;
  uint64_t seed = 0;
  Eigen::Index rh = 5, rw = 5, num_filters = 25;
  /// 0 picks the default: 1e-13 with the exact Hessian, 1e-5 otherwise.
  double tol = 0.0;
  int max_iter = 20000;
  bpegm::SolverConfig solver;
  /// Optional precomputed filter majorizer (e.g. loaded from a cache file);
  /// overrides majorizer_kind construction. Not owned.
  const Majorizer* custom_majorizer = nullptr;

  void validate() const;
  double effective_tol() const;
};

/// Per-(image, filter) coefficient arrays, same size as the training
/// images. Index order: codes[l * K + k].
struct SparseCodeSet {
  Eigen::Index num_images = 0;
  Eigen::Index num_filters = 0;
  std::vector<Image> z;

  SparseCodeSet() = default;
  SparseCodeSet(Eigen::Index l, Eigen::Index k, Eigen::Index h,
                Eigen::Index w)
      : num_images(l), num_filters(k), z(l * k, Image(h, w)) {}
  Image& at(Eigen::Index l, Eigen::Index k) {
    return z[l * num_filters + k];
  }
  const Image& at(Eigen::Index l, Eigen::Index k) const {
    return z[l * num_filters + k];
  }
  Eigen::Index nonzeros() const;
};

struct CaolResult {
  FilterBank filters;
  SparseCodeSet codes;
  std::vector<bpegm::IterationRecord> log;
  bool converged = false;
  int iterations = 0;
  double final_objective = 0.0;
  double g_div_value = 0.0;
  double orthogonality_residual = 0.0;  // ||D D^T - (1/R) I||_F
  double tf_residual_probe = 0.0;       // on a seeded random probe image
  bool scaled_identity_fallback = false;
  std::vector<double> criticality;
};

/// F(D, Z) = sum_{l,k} 1/2 ||d_k (*) x_l - z_{l,k}||^2 + alpha ||z_{l,k}||_0.
double objective_P0(const FilterBank& bank, const SparseCodeSet& codes,
                    const TrainingSet& ts, double alpha);

/// Entrywise keep-or-kill at level a; |v| == a keeps the value.
Image hard_threshold(const Image& v, double a);
Image hard_threshold(const Image& v, const Image& a);

/// Exact sparse-code minimizer z_{l,k} = H_{sqrt(2 alpha)}(d_k (*) x_l).
SparseCodeSet sparse_code_exact(const FilterBank& bank, const TrainingSet& ts,
                                double alpha);

/// Majorized sparse-code step with explicit lambda_Z; z_acute is the
/// extrapolated previous codes (pass the previous codes for no
/// extrapolation). Kept for the lambda_Z -> 1 equivalence check; the
/// trainers use sparse_code_exact.
SparseCodeSet sparse_code_bpegm(const FilterBank& bank, const TrainingSet& ts,
                                double alpha, double lambda_z,
                                const SparseCodeSet& z_acute);

/// Filter-update gradients sum_l Psi_l^T (Psi_l d_k - z_{l,k}), one column
/// per filter.
Eigen::MatrixXd filter_gradient(const FilterBank& bank_extrap,
                                const SparseCodeSet& codes,
                                const TrainingSet& ts);

/// Orthogonality-constrained prox (reduced-rank Procrustes): the feasible
/// D with D D^T = (1/R) I closest to V in the Mtilde metric, via the SVD of
/// Mtilde V. Requires R <= K.
FilterBank prox_orthogonal(const Eigen::MatrixXd& v, const Majorizer& mtilde,
                           Eigen::Index rh, Eigen::Index rw);

/// Gamma_k = sum_{k' != k} d_k' d_k'^T.
Eigen::MatrixXd gram_complement(const FilterBank& bank, Eigen::Index k);

struct DiversityProxResult {
  Eigen::VectorXd d;
  double phi = 0.0;     // Lagrange multiplier of the norm constraint
  int newton_iters = 0;
};

/// Norm-constrained quadratic prox
///   min_d 1/2 ||d - nu||_Mtilde^2 + (beta/2) d^T Gamma d
///   subject to ||d||^2 = 1/R,
/// solved through the secular equation of G = Mtilde + beta Gamma with an
/// accelerated Newton iteration. The unconstrained minimizer is returned
/// directly when it already satisfies the constraint.
DiversityProxResult prox_diversity(const Eigen::VectorXd& nu,
                                   const Majorizer& mtilde, double beta,
                                   const Eigen::MatrixXd& gamma);

/// Filter coherence penalty ||D^T D - (1/R) I||_F^2.
double g_div(const FilterBank& bank);
double g_div(const Eigen::MatrixXd& d);

/// Deterministic init: separable 2D DCT-II basis scaled by 1/sqrt(R)
/// (requires square filters with K = R). Random init: unit-variance i.i.d.
/// entries with an all-ones first filter, every column rescaled to norm
/// 1/sqrt(R).
FilterBank init_filters(Eigen::Index rh, Eigen::Index rw, Eigen::Index k,
                        FilterInit mode, uint64_t seed = 0);

/// Two-block (P1) or (K+1)-block (P2) reBPEG-M training loop.
CaolResult learn(const TrainingSet& ts, const CaolConfig& config);

// Preprocessing. Both maps are idempotent; rescale handles constant images
// by mapping them to zero.
Image rescale_unit(const Image& x);
Image mean_subtract(const Image& x);

struct AlphaSuggestion {
  double alpha_est = 0.0;
  double alpha_lo = 0.0;  // alpha_est / 10
  double nonzero_fraction = 0.0;
  bool constant_warning = false;
};

/// Threshold-selection heuristic: sparsify with scaled first-order
/// finite-difference filters and pick the alpha keeping the largest 95% of
/// the nonzero responses.
AlphaSuggestion suggest_alpha(const TrainingSet& ts);

}  // namespace caol
