#pragma once

#include <Eigen/Dense>

#include <optional>

namespace ellcomb {

using GenMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Symmetric dense matrix. Construction symmetrizes the input as (M + M^T) / 2
/// so downstream eigen-solvers see exactly symmetric data.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const GenMatrix& m);

  static SymMatrix identity(Eigen::Index k) {
    return SymMatrix(GenMatrix::Identity(k, k));
  }

  Eigen::Index dim() const { return m_.rows(); }
  const GenMatrix& mat() const { return m_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

 private:
  GenMatrix m_;
};

struct PsdReport {
  bool is_psd = false;
  bool is_pd = false;
  double min_eigenvalue = 0.0;
  double tolerance_used = 0.0;
};

/// k * eps * max(1, max |eigenvalue|).
double default_psd_tolerance(Eigen::Index k, double max_abs_eigenvalue);

PsdReport check_psd(const SymMatrix& m, std::optional<double> tol = std::nullopt);

/// Principal square root of an SPD matrix.
SymMatrix spd_sqrt(const SymMatrix& m);

/// Inverse of an SPD matrix via its eigendecomposition. Throws DomainError if
/// not positive definite.
SymMatrix spd_inverse(const SymMatrix& m);

/// Principal square root of the product e1 * e2 of two SPD matrices, built as
///   e1^{1/2} * sqrt(e1^{1/2} e2 e1^{1/2}) * e1^{-1/2}.
/// The result N is generally non-symmetric with a real positive spectrum and
/// satisfies N * e2^{-1} * N^T == e1.
GenMatrix spd_product_sqrt(const SymMatrix& e1, const SymMatrix& e2);

/// Eigen-based pseudo-inverse; eigenvalues below rel_tol * lambda_max are
/// dropped. Indefinite input (beyond the default PSD tolerance) is rejected.
SymMatrix pseudo_inverse(const SymMatrix& m, std::optional<double> rel_tol = std::nullopt);

GenMatrix adjugate(const GenMatrix& m);

double determinant(const GenMatrix& m);

/// log|M| for an SPD matrix; throws DomainError otherwise.
double log_det_spd(const SymMatrix& m);

/// Differential entropy of N(., P): k/2 + (k/2) ln(2 pi) + ln|P| / 2.
double gaussian_entropy(const SymMatrix& p);

/// Throws InvalidInput if any entry is NaN or infinite.
void require_finite(const GenMatrix& m, const char* what);

}  // namespace ellcomb
