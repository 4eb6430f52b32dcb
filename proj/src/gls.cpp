#include "ellcomb/gls.hpp"

#include "ellcomb/errors.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace ellcomb {

namespace {

void require_shape(const StackedSystem& sys, const SymMatrix& m, const char* what) {
  if (m.dim() != sys.n() * sys.k()) {
    std::ostringstream os;
    os << what << ": expected " << sys.n() * sys.k() << "x" << sys.n() * sys.k()
       << " matrix, got " << m.dim() << "x" << m.dim();
    throw InvalidInput(os.str());
  }
}

// Column blocks of A^T W: block j = sum_i W_ij.
GenMatrix at_w(const StackedSystem& sys, const SymMatrix& w) {
  const Eigen::Index n = sys.n(), k = sys.k();
  GenMatrix out = GenMatrix::Zero(k, n * k);
  for (Eigen::Index i = 0; i < n; ++i) {
    out += w.mat().middleRows(i * k, k);
  }
  return out;
}

SymMatrix invert_normal(const SymMatrix& normal) {
  const PsdReport rep = check_psd(normal);
  if (!rep.is_pd) {
    std::ostringstream os;
    os << "insufficient information: A^T W A is not positive definite (min eigenvalue "
       << rep.min_eigenvalue << ")";
    throw Infeasible(os.str(), rep.min_eigenvalue);
  }
  return spd_inverse(normal);
}

// log|M| for a PSD matrix; -inf when singular.
double log_det_psd(const SymMatrix& m) {
  const PsdReport rep = check_psd(m);
  if (!rep.is_pd) {
    return -std::numeric_limits<double>::infinity();
  }
  return log_det_spd(m);
}

}  // namespace

void validate_estimate(const Estimate& e, std::optional<double> tol) {
  require_finite(e.y, "estimate y");
  require_finite(e.E.mat(), "estimate E");
  if (e.E.dim() != e.y.size()) {
    throw InvalidInput("estimate: E must be k-by-k with k = len(y)");
  }
  const PsdReport rep = check_psd(e.E, tol);
  if (!rep.is_psd) {
    std::ostringstream os;
    os << "estimate: E is not positive semidefinite (min eigenvalue " << rep.min_eigenvalue
       << ")";
    throw InvalidInput(os.str());
  }
  if (e.components.empty()) {
    return;
  }
  GenMatrix sum = GenMatrix::Zero(e.E.dim(), e.E.dim());
  for (std::size_t a = 0; a < e.components.size(); ++a) {
    const SymMatrix& b = e.components[a];
    if (b.dim() != e.E.dim()) {
      throw InvalidInput("estimate: component " + std::to_string(a) + " has wrong dimension");
    }
    const PsdReport brep = check_psd(b, tol);
    if (!brep.is_psd) {
      std::ostringstream os;
      os << "estimate: component " << a << " is not positive semidefinite (min eigenvalue "
         << brep.min_eigenvalue << ")";
      throw InvalidInput(os.str());
    }
    sum += b.mat();
  }
  const double scale = std::max(e.E.mat().norm(), std::numeric_limits<double>::min());
  if ((sum - e.E.mat()).norm() > 1e-9 * scale) {
    throw InvalidInput("estimate: components do not sum to E");
  }
}

StackedSystem::StackedSystem(std::span<const Vector> ys) {
  if (ys.empty()) {
    throw InvalidInput("StackedSystem: need at least one estimate");
  }
  n_ = static_cast<Eigen::Index>(ys.size());
  k_ = ys.front().size();
  if (k_ < 1) {
    throw InvalidInput("StackedSystem: estimates must have dimension >= 1");
  }
  y_.resize(n_ * k_);
  for (Eigen::Index i = 0; i < n_; ++i) {
    if (ys[i].size() != k_) {
      throw InvalidInput("StackedSystem: estimates differ in dimension");
    }
    y_.segment(i * k_, k_) = ys[i];
  }
}

StackedSystem StackedSystem::from_estimates(std::span<const Estimate> estimates) {
  std::vector<Vector> ys;
  ys.reserve(estimates.size());
  for (const auto& e : estimates) ys.push_back(e.y);
  return StackedSystem(ys);
}

GenMatrix StackedSystem::design_matrix() const {
  GenMatrix a(n_ * k_, k_);
  for (Eigen::Index i = 0; i < n_; ++i) {
    a.middleRows(i * k_, k_).setIdentity();
  }
  return a;
}

SymMatrix normal_matrix(const StackedSystem& sys, const SymMatrix& w) {
  require_shape(sys, w, "normal_matrix");
  const Eigen::Index n = sys.n(), k = sys.k();
  GenMatrix acc = GenMatrix::Zero(k, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      acc += w.mat().block(i * k, j * k, k, k);
    }
  }
  return SymMatrix(acc);
}

GenMatrix gain_matrix(const StackedSystem& sys, const SymMatrix& w) {
  const SymMatrix normal_inv = invert_normal(normal_matrix(sys, w));
  return normal_inv.mat() * at_w(sys, w);
}

FusionResult gls_solve(const StackedSystem& sys, const SymMatrix& w) {
  const SymMatrix normal_inv = invert_normal(normal_matrix(sys, w));
  const GenMatrix gain = normal_inv.mat() * at_w(sys, w);

  FusionResult res;
  res.x_hat = gain * sys.y();
  res.P = normal_inv;
  res.method = "gls";
  res.weights.reserve(static_cast<std::size_t>(sys.n()));
  for (Eigen::Index i = 0; i < sys.n(); ++i) {
    res.weights.push_back(gain.middleCols(i * sys.k(), sys.k()));
  }
  res.entropy = gaussian_entropy(res.P);
  return res;
}

SymMatrix power_covariance(const StackedSystem& sys, const SymMatrix& w, const SymMatrix& r) {
  require_shape(sys, r, "power_covariance");
  const GenMatrix gain = gain_matrix(sys, w);
  return SymMatrix(gain * r.mat() * gain.transpose());
}

double alpha_metric(const StackedSystem& sys, const SymMatrix& w, const SymMatrix& r) {
  const SymMatrix normal = normal_matrix(sys, w);
  const SymMatrix normal_inv = invert_normal(normal);
  const GenMatrix gain = normal_inv.mat() * at_w(sys, w);
  require_shape(sys, r, "alpha_metric");
  const SymMatrix p(gain * r.mat() * gain.transpose());
  // |P(W, W^-1)| = |(A^T W A)^-1|.
  return std::exp(0.5 * (log_det_psd(p) + log_det_spd(normal)));
}

double beta_metric(const StackedSystem& sys, const SymMatrix& w, const SymMatrix& r) {
  const GenMatrix gain = gain_matrix(sys, w);
  require_shape(sys, r, "beta_metric");
  const SymMatrix p(gain * r.mat() * gain.transpose());
  const SymMatrix blue_normal = normal_matrix(sys, pseudo_inverse(r));
  const PsdReport rep = check_psd(blue_normal);
  if (!rep.is_pd) {
    throw Infeasible("beta_metric: R admits no BLUE (A^T R^-1 A singular)", rep.min_eigenvalue);
  }
  // |P(R^-1, R)| = 1 / |A^T R^-1 A|.
  return std::exp(0.5 * (log_det_psd(p) + log_det_spd(blue_normal)));
}

}  // namespace ellcomb
