#include "ellcomb/joint.hpp"

#include "ellcomb/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ellcomb {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kFeasibilityBisections = 48;
constexpr double kGoldenTol = 1e-10;

std::vector<SymMatrix> covariances_of(std::span<const Estimate> estimates) {
  std::vector<SymMatrix> covs;
  covs.reserve(estimates.size());
  for (const auto& e : estimates) covs.push_back(e.E);
  return covs;
}

void require_uniform_dim(std::span<const SymMatrix> covs, const char* what) {
  if (covs.empty()) return;
  const Eigen::Index k = covs.front().dim();
  for (const auto& c : covs) {
    if (c.dim() != k) {
      throw InvalidInput(std::string(what) + ": covariances differ in dimension");
    }
  }
}

bool is_psd(const SymMatrix& m) { return check_psd(m).is_psd; }

// Objective along one coordinate, -inf where R leaves the PSD cone.
class CoordinateObjective {
 public:
  CoordinateObjective(std::span<const SymMatrix> covs, CorrelationVector& r, std::size_t flat)
      : covs_(covs), r_(r), flat_(flat) {}

  double operator()(double v) {
    const double saved = r_[flat_];
    r_[flat_] = v;
    const double f = joint_log_det_p(covs_, r_);
    r_[flat_] = saved;
    return f;
  }

  bool feasible(double v) {
    const double saved = r_[flat_];
    r_[flat_] = v;
    const bool ok = is_psd(build_joint(covs_, r_));
    r_[flat_] = saved;
    return ok;
  }

 private:
  std::span<const SymMatrix> covs_;
  CorrelationVector& r_;
  std::size_t flat_;
};

// Largest feasible point between `from` (feasible) and `to`.
double feasible_edge(CoordinateObjective& obj, double from, double to) {
  if (obj.feasible(to)) return to;
  double good = from, bad = to;
  for (int i = 0; i < kFeasibilityBisections; ++i) {
    const double mid = 0.5 * (good + bad);
    if (obj.feasible(mid)) {
      good = mid;
    } else {
      bad = mid;
    }
  }
  return good;
}

double golden_argmax(CoordinateObjective& obj, double lo, double hi) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = obj(c), fd = obj(d);
  while (b - a > kGoldenTol) {
    if (fc < fd) {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = obj(d);
    } else {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = obj(c);
    }
  }
  return fc > fd ? c : d;
}

bool improves(double candidate, double current) {
  return candidate > current + 1e-12 * std::max(1.0, std::abs(current));
}

}  // namespace

// ---------------------------------------------------------------------------
// CorrelationVector

CorrelationVector::CorrelationVector(Eigen::Index n)
    : n_(n), values_(pair_count(n), 0.0) {
  if (n < 0) throw InvalidInput("CorrelationVector: negative n");
}

CorrelationVector::CorrelationVector(Eigen::Index n, std::vector<double> values)
    : n_(n), values_(std::move(values)) {
  if (n < 0 || values_.size() != pair_count(n)) {
    throw InvalidInput("CorrelationVector: expected n(n-1)/2 values");
  }
  for (double v : values_) {
    if (!(v >= -1.0 && v <= 1.0)) {
      throw InvalidInput("CorrelationVector: coefficients must lie in [-1, 1]");
    }
  }
}

std::size_t CorrelationVector::index(Eigen::Index i, Eigen::Index j) const {
  if (!(0 <= i && i < j && j < n_)) {
    throw InvalidInput("CorrelationVector: pair index out of range (need i < j < n)");
  }
  return static_cast<std::size_t>(i * n_ - i * (i + 1) / 2 + (j - i - 1));
}

// ---------------------------------------------------------------------------
// Joint covariance

SymMatrix build_joint(std::span<const SymMatrix> covs, const CorrelationVector& r) {
  const auto n = static_cast<Eigen::Index>(covs.size());
  if (n < 1) throw InvalidInput("build_joint: need at least one covariance");
  if (r.n() != n) throw InvalidInput("build_joint: correlation vector sized for a different n");
  require_uniform_dim(covs, "build_joint");
  const Eigen::Index k = covs.front().dim();

  GenMatrix joint = GenMatrix::Zero(n * k, n * k);
  for (Eigen::Index i = 0; i < n; ++i) {
    joint.block(i * k, i * k, k, k) = covs[i].mat();
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double rij = r(i, j);
      if (rij == 0.0) continue;
      const GenMatrix cross = rij * spd_product_sqrt(covs[i], covs[j]);
      joint.block(i * k, j * k, k, k) = cross;
      joint.block(j * k, i * k, k, k) = cross.transpose();
    }
  }
  return SymMatrix(joint);
}

SymMatrix build_joint(std::span<const Estimate> estimates, const CorrelationVector& r) {
  return build_joint(covariances_of(estimates), r);
}

CorrelationVector pairwise_max_vector(std::span<const SymMatrix> covs, bool allow_singular) {
  const auto n = static_cast<Eigen::Index>(covs.size());
  require_uniform_dim(covs, "pairwise_max_vector");
  CorrelationVector r(n);
  r.degenerate.assign(r.size(), false);
  std::vector<bool> pd(covs.size(), true);
  if (allow_singular) {
    for (std::size_t i = 0; i < covs.size(); ++i) pd[i] = check_psd(covs[i]).is_pd;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (!pd[i] || !pd[j]) continue;
      const RmaxResult res = solve_rmax(build_geometry(covs[i], covs[j]));
      r.at(i, j) = res.r_max;
      r.degenerate[r.index(i, j)] = res.degenerate;
    }
  }
  return r;
}

CorrelationVector pairwise_max_vector(std::span<const Estimate> estimates) {
  return pairwise_max_vector(covariances_of(estimates));
}

double joint_log_det_p(std::span<const SymMatrix> covs, const CorrelationVector& r) {
  const SymMatrix joint = build_joint(covs, r);
  if (!is_psd(joint)) return kNegInf;
  std::vector<Vector> zeros(covs.size(), Vector::Zero(covs.front().dim()));
  const StackedSystem sys(zeros);
  const SymMatrix normal = normal_matrix(sys, pseudo_inverse(joint));
  if (!check_psd(normal).is_pd) return kNegInf;
  return -log_det_spd(normal);
}

CorrelationVector search_rmax_vector(std::span<const SymMatrix> covs, const SearchOptions& options) {
  const auto n = static_cast<Eigen::Index>(covs.size());
  CorrelationVector r = pairwise_max_vector(covs);
  if (n < 2) {
    r.feasible = check_psd(build_joint(covs, r));
    return r;
  }
  double current = joint_log_det_p(covs, r);
  if (current == kNegInf) {
    const std::vector<bool> degenerate = r.degenerate;
    r = CorrelationVector(n);
    r.degenerate = degenerate;
    r.fallback_start = true;
    current = joint_log_det_p(covs, r);
  }

  for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
    const double sweep_start = current;
    for (std::size_t flat = 0; flat < r.size(); ++flat) {
      CoordinateObjective obj(covs, r, flat);
      const double v = r[flat];
      const double lo = feasible_edge(obj, v, 0.0);
      const double hi = feasible_edge(obj, v, 1.0);
      if (hi - lo <= kGoldenTol) continue;
      const double cand = golden_argmax(obj, lo, hi);
      const double f = obj(cand);
      if (improves(f, current)) {
        r[flat] = cand;
        current = f;
      }
    }
    if (current - sweep_start <= options.rel_tol * std::max(1.0, std::abs(sweep_start))) {
      break;
    }
  }
  r.feasible = check_psd(build_joint(covs, r));
  return r;
}

CorrelationVector search_rmax_vector(std::span<const Estimate> estimates,
                                     const SearchOptions& options) {
  return search_rmax_vector(covariances_of(estimates), options);
}

// ---------------------------------------------------------------------------
// Conjecture experiment

SymMatrix random_spd(std::mt19937_64& rng, Eigen::Index k, double log10_cond) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> expo(-0.5 * log10_cond, 0.5 * log10_cond);
  GenMatrix g(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) g(i, j) = normal(rng);
  }
  const GenMatrix q = Eigen::HouseholderQR<GenMatrix>(g).householderQ();
  Vector ev(k);
  for (Eigen::Index i = 0; i < k; ++i) ev(i) = std::pow(10.0, expo(rng));
  return SymMatrix(q * ev.asDiagonal() * q.transpose());
}

ConjectureReport psd_conjecture_trial(std::uint64_t seed, Eigen::Index n, Eigen::Index k,
                                      std::int64_t trials) {
  if (n < 2 || k < 1 || trials < 1) {
    throw InvalidInput("psd_conjecture_trial: need n >= 2, k >= 1, trials >= 1");
  }
  ConjectureReport report;
  report.trials = trials;
  bool first = true;
  for (std::int64_t t = 0; t < trials; ++t) {
    const std::uint64_t trial_seed = seed + static_cast<std::uint64_t>(t);
    std::mt19937_64 rng(trial_seed);
    std::vector<SymMatrix> covs;
    for (Eigen::Index i = 0; i < n; ++i) covs.push_back(random_spd(rng, k));
    const SymMatrix joint = build_joint(covs, pairwise_max_vector(covs));

    Eigen::SelfAdjointEigenSolver<GenMatrix> es(joint.mat(), Eigen::EigenvaluesOnly);
    const double min_ev = es.eigenvalues()(0);
    const double max_abs = es.eigenvalues().cwiseAbs().maxCoeff();
    const double relative = min_ev / max_abs;
    if (min_ev < -default_psd_tolerance(joint.dim(), max_abs)) ++report.violations;
    if (first || relative < report.worst_relative_eigenvalue) {
      first = false;
      report.worst_relative_eigenvalue = relative;
      report.worst_min_eigenvalue = min_ev;
      report.worst_seed = trial_seed;
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Structured model

std::string to_string(CoefficientRule rule) {
  switch (rule) {
    case CoefficientRule::Zero:
      return "zero";
    case CoefficientRule::PairwiseMax:
      return "pairwise-max";
    case CoefficientRule::TimeDecay:
      return "time-decay";
    case CoefficientRule::GroupedByInstrument:
      return "grouped-by-instrument";
  }
  return "unknown";
}

CoefficientRule parse_coefficient_rule(const std::string& name) {
  for (auto rule : {CoefficientRule::Zero, CoefficientRule::PairwiseMax,
                    CoefficientRule::TimeDecay, CoefficientRule::GroupedByInstrument}) {
    if (to_string(rule) == name) return rule;
  }
  throw InvalidInput("unknown coefficient rule '" + name + "'");
}

double decayed_coefficient(double r_max, double gamma, double gap) {
  if (gap == 0.0) return r_max;
  return r_max * std::exp(-gamma * std::abs(gap));
}

StructuredJoint assemble_structured(std::span<const Estimate> estimates,
                                    const StructuredModel& model) {
  const auto n = static_cast<Eigen::Index>(estimates.size());
  if (n < 1) throw InvalidInput("structured model: need at least one estimate");
  const std::size_t components = model.rules.size() + 1;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (estimates[i].components.size() != components) {
      std::ostringstream os;
      os << "structured model: estimate " << i << " carries "
         << estimates[i].components.size() << " components, model needs " << components;
      throw InvalidInput(os.str());
    }
  }
  for (const auto& rule : model.rules) {
    if (rule.rule != CoefficientRule::TimeDecay) continue;
    if (!(rule.gamma > 0.0)) {
      throw InvalidInput("structured model: time-decay requires gamma > 0");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!estimates[i].t) {
        throw InvalidInput("structured model: time-decay requires a timestamp on estimate " +
                           std::to_string(i));
      }
    }
  }

  const Eigen::Index k = estimates.front().dim();
  StructuredJoint out;
  GenMatrix total = GenMatrix::Zero(n * k, n * k);
  for (std::size_t a = 0; a < components; ++a) {
    std::vector<SymMatrix> covs;
    covs.reserve(estimates.size());
    for (const auto& e : estimates) covs.push_back(e.components[a]);

    CorrelationVector r(n);
    if (a > 0) {
      const ComponentRule& rule = model.rules[a - 1];
      if (rule.rule != CoefficientRule::Zero) {
        r = pairwise_max_vector(covs, /*allow_singular=*/true);
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
          double& rij = r.at(i, j);
          switch (rule.rule) {
            case CoefficientRule::Zero:
            case CoefficientRule::PairwiseMax:
              break;
            case CoefficientRule::TimeDecay:
              rij = decayed_coefficient(rij, rule.gamma, *estimates[i].t - *estimates[j].t);
              break;
            case CoefficientRule::GroupedByInstrument: {
              const auto& ti = estimates[i].instrument;
              const auto& tj = estimates[j].instrument;
              if (!ti || !tj || *ti != *tj) rij = 0.0;
              break;
            }
          }
        }
      }
      out.coefficients.push_back(r);
    }
    total += build_joint(covs, r).mat();
  }
  out.R = SymMatrix(total);
  out.report = check_psd(out.R);
  if (!out.report.is_psd) {
    std::ostringstream os;
    os << "structured model: assembled R is not positive semidefinite (min eigenvalue "
       << out.report.min_eigenvalue << ")";
    throw Infeasible(os.str(), out.report.min_eigenvalue);
  }
  return out;
}

SymMatrix build_structured_joint(std::span<const Estimate> estimates, const StructuredModel& model) {
  return assemble_structured(estimates, model).R;
}

}  // namespace ellcomb
