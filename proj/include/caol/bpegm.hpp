#pragma once

#include "caol/majorizers.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace caol {
namespace bpegm {

/// Solver-wide knobs. delta and omega_restart follow the extrapolation and
/// restart rules; tol is the relative-change stopping threshold.
struct SolverConfig {
  double delta = 0.99;          // < 1
  double omega_restart = 0.0;   // in [-1, 0]
  double tol = 1e-5;
  int max_iter = 20000;
  bool extrapolation_enabled = true;
  /// Record the objective after every block update (used by the descent
  /// checks); otherwise only once per outer iteration.
  bool track_block_objectives = false;

  void validate() const;
};

/// One block of the multi-block problem. Oracles receive the full current
/// state so cross-block couplings can be read where needed.
struct BlockSpec {
  std::string name;
  Eigen::Index dim = 0;
  double lambda = 1.0 + 1e-10;  // > 1
  bool extrapolate = true;
  /// Number of identically-majorized columns the block splits into: the
  /// block majorizer is I_columns (x) M with M the per-column majorizer
  /// returned by the oracle (dim = columns * M.dim()). Filter banks use one
  /// column per filter.
  Eigen::Index columns = 1;

  /// Majorizer of the block-partial gradient; called once per iteration
  /// (constant majorizers just return a copy).
  std::function<Majorizer(const std::vector<Eigen::VectorXd>& xs, int iter)>
      majorizer;
  /// Block-partial gradient of the smooth term, evaluated at `point` with
  /// the other blocks taken from xs.
  std::function<Eigen::VectorXd(const std::vector<Eigen::VectorXd>& xs,
                                const Eigen::VectorXd& point)>
      grad;
  /// Proximal map of the block's nonsmooth term in the Mtilde metric.
  std::function<Eigen::VectorXd(const std::vector<Eigen::VectorXd>& xs,
                                const Eigen::VectorXd& point,
                                const Majorizer& mtilde)>
      prox;
  /// Optional: exact minimizer of F over this block with the others fixed.
  /// When set, the gradient/prox machinery is bypassed (the sharp-majorizer
  /// shortcut used for the sparse-code blocks).
  std::function<Eigen::VectorXd(const std::vector<Eigen::VectorXd>& xs)>
      exact_solve;

  void validate() const;
};

struct IterationRecord {
  int iter = 0;
  double objective = 0.0;
  std::vector<double> step_norms;          // per block
  std::vector<uint8_t> restarts;           // per block
  double elapsed_ms = 0.0;
  std::vector<double> block_objectives;    // only when tracked
};

struct SolveResult {
  std::vector<Eigen::VectorXd> x;
  std::vector<IterationRecord> log;
  bool converged = false;
  int iterations = 0;
  /// Prox fixed-point residual per block at the final iterate, the
  /// first-order criticality proxy.
  std::vector<double> criticality;
};

/// Advances the momentum recursion theta' = (1 + sqrt(1 + 4 theta^2))/2 and
/// returns the coefficient e = (theta - 1)/theta' in [0, 1).
double momentum_step(double& theta);

/// Extrapolation matrix E = e * delta(lambda-1)/(2(lambda+1)) *
/// M_curr^{-1/2} M_prev^{1/2}, returned in the matching diagonal or
/// scaled-identity shape. When the two majorizers are identical the scaling
/// collapses to a scalar and no roots are formed. The construction verifies
/// E^T M_curr E <= delta^2 (lambda-1)^2 / (4 (lambda+1)^2) * M_prev.
Majorizer extrapolation_matrix(double e, double lambda, double delta,
                               const Majorizer& m_prev,
                               const Majorizer& m_curr);

/// Gradient-mapping restart test: true iff the cosine of the angle between
/// M (x_extrapolated - x_new) and (x_new - x_old) exceeds omega. Zero
/// vectors never restart.
bool restart_check(const Majorizer& m_curr,
                   const Eigen::VectorXd& x_extrapolated,
                   const Eigen::VectorXd& x_new, const Eigen::VectorXd& x_old,
                   double omega, Eigen::Index columns = 1);

/// One extrapolated majorized step for a single block:
/// x' = x + E (x - x_prev), then prox(x' - Mtilde^{-1} grad(x'), Mtilde).
/// Exposed for unit tests; solve() uses the same path.
Eigen::VectorXd block_step(const BlockSpec& block,
                           const std::vector<Eigen::VectorXd>& xs,
                           const Eigen::VectorXd& x,
                           const Eigen::VectorXd& x_prev, double e,
                           const Majorizer& m_prev, const Majorizer& m_curr,
                           const SolverConfig& config,
                           Eigen::VectorXd* x_extrapolated = nullptr);

/// Cyclic multi-block solve with momentum and gradient-mapping restart.
/// The objective oracle is evaluated on full states for logging and, with
/// extrapolation disabled, for the monotonicity guard.
SolveResult solve(const std::vector<BlockSpec>& blocks,
                  const std::function<double(
                      const std::vector<Eigen::VectorXd>&)>& objective,
                  std::vector<Eigen::VectorXd> x0, const SolverConfig& config);

/// Convergence log as CSV: iter, objective, one step-norm and restart flag
/// column per block, elapsed_ms.
void write_convergence_csv(const std::string& path,
                           const std::vector<IterationRecord>& log,
                           const std::vector<std::string>& block_names);

}  // namespace bpegm
}  // namespace caol
