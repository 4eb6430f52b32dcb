#pragma once

#include "ellcomb/linalg.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ellcomb {

/// One location estimate: value y with covariance E, plus the optional
/// metadata the structured model consumes.
struct Estimate {
  Vector y;
  SymMatrix E;
  std::optional<double> t;
  std::vector<SymMatrix> components;  // B_0..B_m, summing to E when present
  std::optional<std::string> instrument;

  Eigen::Index dim() const { return y.size(); }
};

/// Checks shapes, finiteness, PSD-ness of E and of each component, and that
/// the components sum to E. Throws InvalidInput.
void validate_estimate(const Estimate& e, std::optional<double> tol = std::nullopt);

/// Stacked observation vector over an implicit design matrix A made of n
/// k-by-k identity blocks. A is never materialized.
class StackedSystem {
 public:
  StackedSystem(std::span<const Vector> ys);
  static StackedSystem from_estimates(std::span<const Estimate> estimates);

  Eigen::Index n() const { return n_; }
  Eigen::Index k() const { return k_; }
  const Vector& y() const { return y_; }
  Eigen::VectorBlock<const Vector> block(Eigen::Index i) const {
    return y_.segment(i * k_, k_);
  }
  /// Dense nk-by-k A, for tests and diagnostics.
  GenMatrix design_matrix() const;

 private:
  Eigen::Index n_ = 0;
  Eigen::Index k_ = 0;
  Vector y_;
};

struct FusionResult {
  Vector x_hat;
  SymMatrix P;
  std::string method;
  std::vector<GenMatrix> weights;   // per-estimate k-by-k blocks, sum to I
  double entropy = 0.0;
  std::vector<double> coefficients; // pairwise r values used, (i<j) row-major
  std::vector<std::string> notes;
};

/// G = (A^T W A)^{-1} A^T W, the k-by-nk linear combiner for weight W.
GenMatrix gain_matrix(const StackedSystem& sys, const SymMatrix& w);

/// A^T W A by block accumulation.
SymMatrix normal_matrix(const StackedSystem& sys, const SymMatrix& w);

/// x_hat = (A^T W A)^{-1} A^T W y with reported covariance (A^T W A)^{-1}.
FusionResult gls_solve(const StackedSystem& sys, const SymMatrix& w);

/// P(W, R) = G R G^T.
SymMatrix power_covariance(const StackedSystem& sys, const SymMatrix& w, const SymMatrix& r);

/// sqrt(|P(W,R)| / |P(W,W^-1)|): true error integral over the reported one.
double alpha_metric(const StackedSystem& sys, const SymMatrix& w, const SymMatrix& r);

/// sqrt(|P(W,R)| / |P(R^-1,R)|): achieved error integral over the BLUE one.
double beta_metric(const StackedSystem& sys, const SymMatrix& w, const SymMatrix& r);

}  // namespace ellcomb
