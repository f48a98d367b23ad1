#pragma once

#include "caol/convops.hpp"
#include "caol/image.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <memory>
#include <vector>

namespace caol {

enum class MajorizerForm : char { dense = 0, diagonal = 1, scaled_identity = 2 };

/// Positive-definite majorization matrix in dense, diagonal or
/// scaled-identity form. Construction validates positive definiteness
/// (dense symmetry to 1e-12, smallest eigenvalue above 1e-10 * trace);
/// instances are immutable and cheap to share.
class Majorizer {
 public:
  static Majorizer dense(Eigen::MatrixXd m);
  static Majorizer diagonal(Eigen::VectorXd d);
  static Majorizer scaled_identity(double c, Eigen::Index n);

  MajorizerForm form() const { return form_; }
  Eigen::Index dim() const { return dim_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  /// Solves M u = v.
  Eigen::VectorXd solve(const Eigen::VectorXd& v) const;
  double quad(const Eigen::VectorXd& v) const;  // v^T M v

  /// lambda * M, the upper-bounded matrix of the update rule.
  Majorizer scaled(double lambda) const;

  Eigen::MatrixXd to_dense() const;

  // Raw payload (valid only for the matching form).
  const Eigen::MatrixXd& dense_matrix() const;
  const Eigen::VectorXd& diagonal_vector() const;
  double scale() const;

 private:
  Majorizer() = default;
  MajorizerForm form_ = MajorizerForm::scaled_identity;
  Eigen::Index dim_ = 0;
  Eigen::MatrixXd dense_;
  Eigen::VectorXd diag_;
  double scale_ = 0.0;
  std::shared_ptr<Eigen::LLT<Eigen::MatrixXd>> llt_;  // dense solves
};

/// Training images plus the filter geometry the majorizers are built for.
struct TrainingSet {
  std::vector<Image> images;
  BoundaryCondition bc = BoundaryCondition::circular;
  Eigen::Index rh = 1;
  Eigen::Index rw = 1;

  Eigen::Index count() const { return static_cast<Eigen::Index>(images.size()); }
  Eigen::Index taps() const { return rh * rw; }
  void validate() const;
  /// Images padded once for the filter shape; every Psi application reuses
  /// these.
  std::vector<Image> padded() const;
};

/// The exact filter-update Hessian sum_l Psi_l^T Psi_l as a raw matrix
/// (no positive-definiteness check). O(L R^2 N).
Eigen::MatrixXd filter_hessian(const TrainingSet& ts);
Eigen::MatrixXd filter_hessian(const std::vector<Image>& padded,
                               Eigen::Index h, Eigen::Index w,
                               Eigen::Index rh, Eigen::Index rw);

/// Exact Hessian wrapped as a dense majorizer; degenerate data (e.g. all
/// zero images) raises NumericalError with the smallest eigenvalue.
Majorizer exact_hessian(const TrainingSet& ts);

/// Diagonal majorizer diag(sum_l |Psi_l^T||Psi_l| 1). Always dominates the
/// exact Hessian. O(L R N).
Majorizer diag_majorizer(const TrainingSet& ts);

struct ScaledIdentityResult {
  Majorizer m;
  /// Lemma-4-style dominance is proved only when the circulant built from
  /// the training autocorrelation is PD; false means the scaling is
  /// heuristic and callers should prefer the diagonal design.
  bool circulant_pd = true;
};

/// Scaled identity majorizer c*I with c the absolute sum of the training
/// autocorrelation over all filter lags. Circular boundary only. O(L R N).
ScaledIdentityResult scaled_identity_majorizer(const TrainingSet& ts);

/// Linear operator with entrywise-absolute application, the interface the
/// weighted-normal majorizer construction needs.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;
  virtual Eigen::Index rows() const = 0;
  virtual Eigen::Index cols() const = 0;
  virtual Eigen::VectorXd apply(const Eigen::VectorXd& v) const = 0;
  virtual Eigen::VectorXd adjoint(const Eigen::VectorXd& v) const = 0;
  virtual Eigen::VectorXd abs_apply(const Eigen::VectorXd& v) const = 0;
  virtual Eigen::VectorXd abs_adjoint(const Eigen::VectorXd& v) const = 0;
};

/// diag(|A^T| W |A| 1) >= A^T W A for nonnegative diagonal W. Operators
/// with zero columns (unobserved coordinates) produce zero entries, which
/// are rejected unless a positive floor is supplied; raising the diagonal
/// keeps the dominance.
Majorizer diag_weighted_normal(const LinearOperator& a,
                               const Eigen::VectorXd& w,
                               double diagonal_floor = 0.0);

/// diag(|A| 1) >= A for symmetric PSD A.
Majorizer diag_hermitian(const Eigen::MatrixXd& a);

/// Smallest eigenvalue of (M2 - M1); nonnegative means M1 <= M2.
double dominance_check(const Majorizer& m1, const Majorizer& m2);

}  // namespace caol
