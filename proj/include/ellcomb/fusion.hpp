#pragma once

#include "ellcomb/gls.hpp"
#include "ellcomb/joint.hpp"

#include <span>
#include <vector>

namespace ellcomb {

/// Information-form accumulator shared by convolving and the
/// convolve-with-inflated-covariance variant, so both produce the same x_hat
/// bit for bit. Appending the n-th estimate costs n-1 pairwise r_max solves
/// when cross terms are tracked.
class InformationAccumulator {
 public:
  explicit InformationAccumulator(bool track_cross_terms = false)
      : track_cross_(track_cross_terms) {}

  void add(const Estimate& e);

  Eigen::Index size() const { return static_cast<Eigen::Index>(inverses_.size()); }

  /// Convolved solution; P = (sum E_i^-1)^-1.
  FusionResult convolved() const;

  /// Same x_hat; P = P_c + P_c C P_c where
  /// C = sum_{i<j} r_ij,max (sqrt(E_i^-1 E_j^-1) + sqrt(E_j^-1 E_i^-1)).
  FusionResult inflated() const;

 private:
  GenMatrix solve_info() const;

  bool track_cross_;
  Eigen::Index k_ = 0;
  GenMatrix info_;       // sum E_i^-1
  Vector info_y_;        // sum E_i^-1 y_i
  GenMatrix cross_;      // C
  std::vector<SymMatrix> covariances_;
  std::vector<SymMatrix> inverses_;
  std::vector<double> coefficients_;  // r_ij,max in arrival order of pairs
};

FusionResult fuse_convolve(std::span<const Estimate> estimates);

enum class MaxEntropyMode { Exact, PairwiseMax };

FusionResult fuse_max_entropy(std::span<const Estimate> estimates, MaxEntropyMode mode,
                              const SearchOptions& options = {});

FusionResult fuse_convolve_inflated(std::span<const Estimate> estimates);

FusionResult fuse_structured(std::span<const Estimate> estimates, const StructuredModel& model);

/// BLUE with W = R^+; throws Infeasible when A^T R^+ A is not positive definite.
FusionResult blue_from_joint(std::span<const Estimate> estimates, const SymMatrix& joint);

}  // namespace ellcomb
