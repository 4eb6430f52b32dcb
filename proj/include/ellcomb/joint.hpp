#pragma once

#include "ellcomb/gls.hpp"
#include "ellcomb/linalg.hpp"
#include "ellcomb/pairwise.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace ellcomb {

/// n(n-1)/2 pairwise correlation coefficients r_ij (i < j), stored row-major
/// over the strict upper triangle: (0,1), (0,2), ..., (0,n-1), (1,2), ...
class CorrelationVector {
 public:
  explicit CorrelationVector(Eigen::Index n = 0);
  CorrelationVector(Eigen::Index n, std::vector<double> values);

  static std::size_t pair_count(Eigen::Index n) {
    return static_cast<std::size_t>(n * (n - 1) / 2);
  }

  Eigen::Index n() const { return n_; }
  std::size_t size() const { return values_.size(); }
  std::size_t index(Eigen::Index i, Eigen::Index j) const;

  double operator()(Eigen::Index i, Eigen::Index j) const { return values_[index(i, j)]; }
  double& at(Eigen::Index i, Eigen::Index j) { return values_[index(i, j)]; }
  double operator[](std::size_t flat) const { return values_[flat]; }
  double& operator[](std::size_t flat) { return values_[flat]; }
  const std::vector<double>& values() const { return values_; }

  // Diagnostics filled in by the producers below.
  std::optional<PsdReport> feasible;
  std::vector<bool> degenerate;  // per pair, from solve_rmax
  bool fallback_start = false;   // search started from r = 0

 private:
  Eigen::Index n_ = 0;
  std::vector<double> values_;
};

/// R(r): diagonal blocks E_i, upper blocks r_ij sqrt(E_i E_j), lower blocks the
/// transposes. Pairs with r_ij == 0 never touch the square root, so singular
/// covariances are allowed there.
SymMatrix build_joint(std::span<const SymMatrix> covariances, const CorrelationVector& r);
SymMatrix build_joint(std::span<const Estimate> estimates, const CorrelationVector& r);

/// Per-pair entropy-maximizing coefficients. With allow_singular, a pair
/// involving a non-PD covariance gets coefficient 0 instead of an error.
CorrelationVector pairwise_max_vector(std::span<const SymMatrix> covariances,
                                      bool allow_singular = false);
CorrelationVector pairwise_max_vector(std::span<const Estimate> estimates);

/// log|P(R^-1(r), R(r))| = -log|A^T R^+(r) A|; -inf when R(r) is not PSD or
/// the normal matrix is singular.
double joint_log_det_p(std::span<const SymMatrix> covariances, const CorrelationVector& r);

struct SearchOptions {
  int max_sweeps = 50;
  double rel_tol = 1e-10;
};

/// Coordinate ascent on log|P| over feasible r in [0, 1]^(n(n-1)/2),
/// starting from the pairwise-max vector. Each coordinate moves by golden-section
/// search over its PSD-feasible interval; a move is kept only if it improves the
/// objective. Sweep order is lexicographic over pairs.
///
/// This is a local heuristic. The returned vector is feasible and its objective
/// is never below that of the start.
CorrelationVector search_rmax_vector(std::span<const SymMatrix> covariances,
                                     const SearchOptions& options = {});
CorrelationVector search_rmax_vector(std::span<const Estimate> estimates,
                                     const SearchOptions& options = {});

// ---------------------------------------------------------------------------
// Conjecture experiment

/// Random SPD matrix with eigenvalues log-uniform in 10^[-log10_cond/2, log10_cond/2]
/// and a Haar-ish random eigenbasis.
SymMatrix random_spd(std::mt19937_64& rng, Eigen::Index k, double log10_cond = 2.0);

struct ConjectureReport {
  std::int64_t trials = 0;
  std::int64_t violations = 0;
  double worst_min_eigenvalue = 0.0;       // raw min eigenvalue of the worst trial
  double worst_relative_eigenvalue = 0.0;  // that value over the largest eigenvalue
  std::uint64_t worst_seed = 0;
};

/// Samples `trials` ensembles of n random SPD k-by-k covariances (trial t uses
/// seed + t), builds R(r_pm) and records how often its smallest eigenvalue falls
/// below -tol. Reports; never asserts.
ConjectureReport psd_conjecture_trial(std::uint64_t seed, Eigen::Index n, Eigen::Index k,
                                      std::int64_t trials);

// ---------------------------------------------------------------------------
// Structured sum-of-components model

enum class CoefficientRule { Zero, PairwiseMax, TimeDecay, GroupedByInstrument };

std::string to_string(CoefficientRule rule);
CoefficientRule parse_coefficient_rule(const std::string& name);

struct ComponentRule {
  CoefficientRule rule = CoefficientRule::PairwiseMax;
  double gamma = 0.0;  // decay rate, TimeDecay only
};

/// Rules for components B_1..B_m. Component B_0 is always independent.
struct StructuredModel {
  std::vector<ComponentRule> rules;
};

struct StructuredJoint {
  SymMatrix R;
  std::vector<CorrelationVector> coefficients;  // one per correlated component
  PsdReport report;
};

StructuredJoint assemble_structured(std::span<const Estimate> estimates,
                                    const StructuredModel& model);

SymMatrix build_structured_joint(std::span<const Estimate> estimates, const StructuredModel& model);

/// r_max * exp(-gamma |t_i - t_j|), with a zero gap always giving r_max.
double decayed_coefficient(double r_max, double gamma, double gap);

}  // namespace ellcomb
