#include "caol/bpegm.hpp"

#include "caol/io.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace caol {
namespace bpegm {

void SolverConfig::validate() const {
  require(delta >= 0.0 && delta < 1.0, "SolverConfig: need 0 <= delta < 1");
  require(omega_restart >= -1.0 && omega_restart <= 0.0,
          "SolverConfig: omega must lie in [-1, 0]");
  require(tol > 0.0, "SolverConfig: tol must be positive");
  require(max_iter >= 0, "SolverConfig: max_iter must be nonnegative");
}

void BlockSpec::validate() const {
  require(dim >= 1, "BlockSpec: dimension must be >= 1");
  if (exact_solve) return;
  require(columns >= 1 && dim % columns == 0,
          "BlockSpec: dim must be a multiple of columns");
  require(lambda > 1.0, "BlockSpec: lambda must exceed 1");
  require(static_cast<bool>(majorizer) && static_cast<bool>(grad) &&
              static_cast<bool>(prox),
          "BlockSpec: majorizer/grad/prox oracles required");
}

namespace {

// I_cols (x) M applied to (solved against) a stacked vector.
Eigen::VectorXd apply_columns(const Majorizer& m, const Eigen::VectorXd& v,
                              Eigen::Index cols) {
  if (cols == 1) return m.apply(v);
  const Eigen::Index n = m.dim();
  Eigen::VectorXd out(v.size());
  for (Eigen::Index c = 0; c < cols; ++c)
    out.segment(c * n, n) = m.apply(v.segment(c * n, n));
  return out;
}

Eigen::VectorXd solve_columns(const Majorizer& m, const Eigen::VectorXd& v,
                              Eigen::Index cols) {
  if (cols == 1) return m.solve(v);
  const Eigen::Index n = m.dim();
  Eigen::VectorXd out(v.size());
  for (Eigen::Index c = 0; c < cols; ++c)
    out.segment(c * n, n) = m.solve(v.segment(c * n, n));
  return out;
}

}  // namespace

double momentum_step(double& theta) {
  const double prev = theta;
  theta = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * prev * prev));
  return (prev - 1.0) / theta;
}

namespace {

double extrapolation_gain(double e, double lambda, double delta) {
  return e * delta * (lambda - 1.0) / (2.0 * (lambda + 1.0));
}

void check_assumption3(const Eigen::VectorXd& e_diag,
                       const Eigen::VectorXd& m_curr_diag,
                       const Eigen::VectorXd& m_prev_diag, double lambda,
                       double delta) {
  // E^T M_curr E and the bound are all diagonal here, so the semidefinite
  // ordering is an entrywise comparison.
  const double cap =
      delta * delta * (lambda - 1.0) * (lambda - 1.0) /
      (4.0 * (lambda + 1.0) * (lambda + 1.0));
  const Eigen::VectorXd lhs =
      e_diag.cwiseProduct(e_diag).cwiseProduct(m_curr_diag);
  const Eigen::VectorXd rhs = cap * m_prev_diag;
  if (((lhs - rhs).array() > 1e-12 * (1.0 + rhs.array().abs())).any())
    throw NumericalError(
        "extrapolation_matrix: assumption-3 bound violated");
}

Eigen::VectorXd majorizer_diag(const Majorizer& m) {
  switch (m.form()) {
    case MajorizerForm::diagonal:
      return m.diagonal_vector();
    case MajorizerForm::scaled_identity:
      return Eigen::VectorXd::Constant(m.dim(), m.scale());
    default:
      return m.dense_matrix().diagonal();
  }
}

bool same_dense(const Majorizer& a, const Majorizer& b) {
  return a.form() == MajorizerForm::dense &&
         b.form() == MajorizerForm::dense &&
         a.dense_matrix() == b.dense_matrix();
}

}  // namespace

Majorizer extrapolation_matrix(double e, double lambda, double delta,
                               const Majorizer& m_prev,
                               const Majorizer& m_curr) {
  require(m_prev.dim() == m_curr.dim(),
          "extrapolation_matrix: dimension mismatch");
  require(e >= 0.0 && e <= 1.0, "extrapolation_matrix: e must be in [0, 1]");
  const double gain = extrapolation_gain(e, lambda, delta);
  const bool dense_prev = m_prev.form() == MajorizerForm::dense;
  const bool dense_curr = m_curr.form() == MajorizerForm::dense;
  if (dense_prev || dense_curr) {
    // Only the constant-majorizer case is supported in dense form; then
    // M_curr^{-1/2} M_prev^{1/2} = I and E is a scalar matrix.
    if (!same_dense(m_prev, m_curr))
      throw std::invalid_argument(
          "extrapolation_matrix: unsupported combination of forms (dense "
          "majorizers must be identical)");
    if (gain == 0.0) return Majorizer::scaled_identity(1e-300, m_curr.dim());
    return Majorizer::scaled_identity(gain, m_curr.dim());
  }
  const Eigen::VectorXd prev = majorizer_diag(m_prev);
  const Eigen::VectorXd curr = majorizer_diag(m_curr);
  Eigen::VectorXd ediag =
      gain * prev.cwiseSqrt().cwiseQuotient(curr.cwiseSqrt());
  check_assumption3(ediag, curr, prev, lambda, delta);
  if (gain == 0.0) return Majorizer::scaled_identity(1e-300, m_curr.dim());
  if (m_prev.form() == MajorizerForm::scaled_identity &&
      m_curr.form() == MajorizerForm::scaled_identity)
    return Majorizer::scaled_identity(ediag[0], m_curr.dim());
  return Majorizer::diagonal(std::move(ediag));
}

bool restart_check(const Majorizer& m_curr,
                   const Eigen::VectorXd& x_extrapolated,
                   const Eigen::VectorXd& x_new, const Eigen::VectorXd& x_old,
                   double omega, Eigen::Index columns) {
  const Eigen::VectorXd gmap =
      apply_columns(m_curr, x_extrapolated - x_new, columns);
  const Eigen::VectorXd mom = x_new - x_old;
  const double ng = gmap.norm();
  const double nm = mom.norm();
  if (ng == 0.0 || nm == 0.0) return false;
  return gmap.dot(mom) / (ng * nm) > omega;
}

Eigen::VectorXd block_step(const BlockSpec& block,
                           const std::vector<Eigen::VectorXd>& xs,
                           const Eigen::VectorXd& x,
                           const Eigen::VectorXd& x_prev, double e,
                           const Majorizer& m_prev, const Majorizer& m_curr,
                           const SolverConfig& config,
                           Eigen::VectorXd* x_extrapolated) {
  require(m_curr.dim() * block.columns == block.dim,
          "block_step: majorizer does not match the block's column shape");
  Eigen::VectorXd xa = x;
  if (config.extrapolation_enabled && block.extrapolate && e > 0.0) {
    const Majorizer ex = extrapolation_matrix(e, block.lambda, config.delta,
                                              m_prev, m_curr);
    xa += apply_columns(ex, x - x_prev, block.columns);
  }
  if (x_extrapolated) *x_extrapolated = xa;
  const Majorizer mtilde = m_curr.scaled(block.lambda);
  const Eigen::VectorXd g = block.grad(xs, xa);
  if (!g.allFinite())
    throw NumericalError("block_step: non-finite gradient for block '" +
                         block.name + "'");
  return block.prox(xs, xa - solve_columns(mtilde, g, block.columns), mtilde);
}

SolveResult solve(const std::vector<BlockSpec>& blocks,
                  const std::function<double(
                      const std::vector<Eigen::VectorXd>&)>& objective,
                  std::vector<Eigen::VectorXd> x0, const SolverConfig& config) {
  config.validate();
  require(!blocks.empty(), "solve: need at least one block");
  require(x0.size() == blocks.size(), "solve: initial state size mismatch");
  const size_t nb = blocks.size();
  for (size_t b = 0; b < nb; ++b) {
    blocks[b].validate();
    require(x0[b].size() == blocks[b].dim, "solve: block dimension mismatch");
  }

  SolveResult result;
  result.x = std::move(x0);
  std::vector<Eigen::VectorXd> x_prev = result.x;  // x^{(0)} = x^{(-1)}
  std::vector<Majorizer> m_prev(nb, Majorizer::scaled_identity(1.0, 1));
  std::vector<bool> has_m_prev(nb, false);

  double theta = 1.0;
  double e = 0.0;  // e^{(0)} = 0 since theta^{(0)} = 1
  double f_last = objective(result.x);
  const auto t0 = std::chrono::steady_clock::now();

  for (int iter = 0; iter < config.max_iter; ++iter) {
    IterationRecord rec;
    rec.iter = iter;
    rec.step_norms.resize(nb, 0.0);
    rec.restarts.resize(nb, 0);
    bool any_restart = false;

    for (size_t b = 0; b < nb; ++b) {
      const BlockSpec& block = blocks[b];
      Eigen::VectorXd x_new;
      if (block.exact_solve) {
        x_new = block.exact_solve(result.x);
      } else {
        const Majorizer m_curr = block.majorizer(result.x, iter);
        const Majorizer& mp = has_m_prev[b] ? m_prev[b] : m_curr;
        Eigen::VectorXd xa;
        x_new = block_step(block, result.x, result.x[b], x_prev[b], e, mp,
                           m_curr, config, &xa);
        if (config.extrapolation_enabled && block.extrapolate &&
            restart_check(m_curr, xa, x_new, result.x[b],
                          config.omega_restart, block.columns)) {
          // Recompute the update from the unextrapolated point.
          const Majorizer mtilde = m_curr.scaled(block.lambda);
          const Eigen::VectorXd g = block.grad(result.x, result.x[b]);
          if (!g.allFinite())
            throw NumericalError("solve: non-finite gradient on restart");
          x_new = block.prox(
              result.x,
              result.x[b] - solve_columns(mtilde, g, block.columns), mtilde);
          rec.restarts[b] = 1;
          any_restart = true;
        }
        m_prev[b] = m_curr;
        has_m_prev[b] = true;
      }
      if (!x_new.allFinite())
        throw NumericalError("solve: non-finite iterate for block '" +
                             block.name + "'");
      rec.step_norms[b] = (x_new - result.x[b]).norm();
      x_prev[b] = std::move(result.x[b]);
      result.x[b] = std::move(x_new);
      if (config.track_block_objectives)
        rec.block_objectives.push_back(objective(result.x));
    }

    rec.objective = config.track_block_objectives
                        ? rec.block_objectives.back()
                        : objective(result.x);
    if (!std::isfinite(rec.objective))
      throw NumericalError("solve: objective diverged");
    if (!config.extrapolation_enabled) {
      // Per-update majorized minimization must not increase the cost; an
      // increase beyond roundoff slack indicates an invalid majorizer.
      const std::vector<double> seq =
          config.track_block_objectives ? rec.block_objectives
                                        : std::vector<double>{rec.objective};
      double ref = f_last;
      for (double f : seq) {
        if (f > ref + 1e-12 * std::abs(ref)) {
          std::ostringstream os;
          os << "solve: monotonicity violation at iteration " << iter
             << " (objective " << ref << " -> " << f << ")";
          throw NumericalError(os.str());
        }
        ref = f;
      }
    }
    f_last = rec.objective;
    rec.elapsed_ms =
        std::chrono::duration<double, std::milli>(
            std::chrono::steady_clock::now() - t0)
            .count();
    result.log.push_back(rec);
    result.iterations = iter + 1;

    // Relative-change stopping rule over all blocks.
    double rel = 0.0;
    for (size_t b = 0; b < nb; ++b)
      rel = std::max(rel,
                     rec.step_norms[b] / (result.x[b].norm() + 1e-30));
    if (rel <= config.tol) {
      result.converged = true;
    }

    // Shared momentum: advance theta once per outer iteration; a restart in
    // any block resets it to 1 so the momentum rebuilds from zero.
    if (any_restart) {
      theta = 1.0;
      e = 0.0;
    } else {
      e = momentum_step(theta);
    }
    if (result.converged) break;
  }

  // First-order criticality proxy at the final iterate.
  result.criticality.assign(nb, 0.0);
  for (size_t b = 0; b < nb; ++b) {
    const BlockSpec& block = blocks[b];
    Eigen::VectorXd fixed_point;
    if (block.exact_solve) {
      fixed_point = block.exact_solve(result.x);
    } else {
      const Majorizer m_curr =
          block.majorizer(result.x, result.iterations);
      const Majorizer mtilde = m_curr.scaled(block.lambda);
      const Eigen::VectorXd g = block.grad(result.x, result.x[b]);
      fixed_point = block.prox(
          result.x, result.x[b] - solve_columns(mtilde, g, block.columns),
          mtilde);
    }
    result.criticality[b] = (result.x[b] - fixed_point).norm() /
                            (result.x[b].norm() + 1e-30);
  }
  return result;
}

void write_convergence_csv(const std::string& path,
                           const std::vector<IterationRecord>& log,
                           const std::vector<std::string>& block_names) {
  std::vector<std::string> header{"iter", "objective"};
  for (const auto& n : block_names) header.push_back("step_norm_" + n);
  for (const auto& n : block_names) header.push_back("restart_" + n);
  header.push_back("elapsed_ms");
  std::vector<std::vector<double>> rows;
  rows.reserve(log.size());
  for (const auto& rec : log) {
    std::vector<double> row{static_cast<double>(rec.iter), rec.objective};
    for (double s : rec.step_norms) row.push_back(s);
    for (uint8_t r : rec.restarts) row.push_back(static_cast<double>(r));
    row.push_back(rec.elapsed_ms);
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

}  // namespace bpegm
}  // namespace caol
