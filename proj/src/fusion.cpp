#include "ellcomb/fusion.hpp"

#include "ellcomb/errors.hpp"

#include <sstream>

namespace ellcomb {

void InformationAccumulator::add(const Estimate& e) {
  if (inverses_.empty()) {
    k_ = e.dim();
    info_ = GenMatrix::Zero(k_, k_);
    info_y_ = Vector::Zero(k_);
    cross_ = GenMatrix::Zero(k_, k_);
  } else if (e.dim() != k_) {
    throw InvalidInput("fusion: estimates differ in dimension");
  }
  if (e.E.dim() != k_) {
    throw InvalidInput("fusion: E must be k-by-k with k = len(y)");
  }
  const SymMatrix inv = pseudo_inverse(e.E);
  if (track_cross_) {
    for (const SymMatrix& prev : covariances_) {
      const PairwiseGeometry g = build_geometry(prev, e.E);
      const double r = solve_rmax(g).r_max;
      cross_ += r * g.Z.mat();
      coefficients_.push_back(r);
    }
  }
  info_ += inv.mat();
  info_y_ += inv.mat() * e.y;
  covariances_.push_back(e.E);
  inverses_.push_back(inv);
}

GenMatrix InformationAccumulator::solve_info() const {
  if (inverses_.empty()) {
    throw InvalidInput("fusion: need at least one estimate");
  }
  const SymMatrix info(info_);
  const PsdReport rep = check_psd(info);
  if (!rep.is_pd) {
    std::ostringstream os;
    os << "insufficient information: sum of E_i^-1 is not positive definite (min eigenvalue "
       << rep.min_eigenvalue << ")";
    throw Infeasible(os.str(), rep.min_eigenvalue);
  }
  return spd_inverse(info).mat();
}

FusionResult InformationAccumulator::convolved() const {
  const GenMatrix p_c = solve_info();
  FusionResult res;
  res.method = "convolve";
  res.x_hat = p_c * info_y_;
  res.P = SymMatrix(p_c);
  for (const SymMatrix& inv : inverses_) res.weights.push_back(p_c * inv.mat());
  res.entropy = gaussian_entropy(res.P);
  return res;
}

FusionResult InformationAccumulator::inflated() const {
  if (!track_cross_) {
    throw InvalidInput("InformationAccumulator: cross terms were not tracked");
  }
  FusionResult res = convolved();
  res.method = "convolve-inflated";
  const GenMatrix& p_c = res.P.mat();
  res.P = SymMatrix(p_c + p_c * cross_ * p_c);
  res.entropy = gaussian_entropy(res.P);

  // Pairs arrived column by column, (0,j), (1,j), ..., (j-1,j); report row-major.
  const Eigen::Index n = size();
  CorrelationVector r(n);
  std::size_t arrival = 0;
  for (Eigen::Index j = 1; j < n; ++j) {
    for (Eigen::Index i = 0; i < j; ++i) r.at(i, j) = coefficients_[arrival++];
  }
  res.coefficients = r.values();
  return res;
}

FusionResult fuse_convolve(std::span<const Estimate> estimates) {
  InformationAccumulator acc;
  for (const auto& e : estimates) acc.add(e);
  return acc.convolved();
}

FusionResult fuse_convolve_inflated(std::span<const Estimate> estimates) {
  InformationAccumulator acc(/*track_cross_terms=*/true);
  for (const auto& e : estimates) acc.add(e);
  return acc.inflated();
}

FusionResult blue_from_joint(std::span<const Estimate> estimates, const SymMatrix& joint) {
  const StackedSystem sys = StackedSystem::from_estimates(estimates);
  const PsdReport rep = check_psd(joint);
  if (!rep.is_psd) {
    std::ostringstream os;
    os << "joint covariance is not positive semidefinite (min eigenvalue " << rep.min_eigenvalue
       << ")";
    throw Infeasible(os.str(), rep.min_eigenvalue);
  }
  return gls_solve(sys, pseudo_inverse(joint));
}

FusionResult fuse_max_entropy(std::span<const Estimate> estimates, MaxEntropyMode mode,
                              const SearchOptions& options) {
  if (estimates.empty()) throw InvalidInput("fusion: need at least one estimate");
  const CorrelationVector r = mode == MaxEntropyMode::Exact
                                  ? search_rmax_vector(estimates, options)
                                  : pairwise_max_vector(estimates);
  FusionResult res = blue_from_joint(estimates, build_joint(estimates, r));
  res.method = mode == MaxEntropyMode::Exact ? "max-entropy" : "max-entropy-pm";
  res.coefficients = r.values();
  if (r.fallback_start) res.notes.push_back("r_pm infeasible; search started from r = 0");
  for (std::size_t i = 0; i < r.degenerate.size(); ++i) {
    if (r.degenerate[i]) {
      res.notes.push_back("pair " + std::to_string(i) + " has a boundary r_max (degenerate)");
    }
  }
  return res;
}

FusionResult fuse_structured(std::span<const Estimate> estimates, const StructuredModel& model) {
  const StructuredJoint joint = assemble_structured(estimates, model);
  FusionResult res = blue_from_joint(estimates, joint.R);
  res.method = "structured";
  for (const auto& r : joint.coefficients) {
    res.coefficients.insert(res.coefficients.end(), r.values().begin(), r.values().end());
  }
  return res;
}

}  // namespace ellcomb
