#include "ellcomb/pairwise.hpp"

#include "ellcomb/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ellcomb {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Imaginary-part cutoff for accepting a companion-matrix root as a
// candidate. Near-double roots split into conjugate pairs with imaginary
// parts around sqrt(eps); every candidate is re-scored on log|P| so a loose
// cutoff cannot select a wrong maximizer.
constexpr double kCandidateImagTol = 1e-6;

// Relative ||S - Z|| below which a pair is treated as two equal ellipses.
constexpr double kEqualPairTol = 1e-8;

constexpr int kBracketIntervals = 256;
constexpr double kBisectionTol = 1e-12;

void require_open_unit(double r, const char* what) {
  if (!(std::abs(r) < 1.0)) {
    std::ostringstream os;
    os << what << ": |r| must be < 1 (got " << r << "); R(r) is singular at |r| = 1";
    throw DomainError(os.str());
  }
}

double log_det_psd(const SymMatrix& m) {
  // Cholesky when clearly definite; the eigen route decides the rest.
  const Eigen::LLT<GenMatrix> llt(m.mat());
  if (llt.info() == Eigen::Success) {
    const Vector d = llt.matrixLLT().diagonal();
    if (d.minCoeff() > 1e-6 * d.maxCoeff()) return 2.0 * d.array().log().sum();
  }
  const PsdReport rep = check_psd(m);
  return rep.is_pd ? log_det_spd(m) : kNegInf;
}

// a S + b Z with the mismatch coefficients for (r_p, r_n).
SymMatrix mismatch_middle(const PairwiseGeometry& g, double r_p, double r_n) {
  const double a = 1.0 - 2.0 * r_p * r_n + r_p * r_p;
  const double b = r_n - 2.0 * r_p + r_n * r_p * r_p;
  return SymMatrix(a * g.S.mat() + b * g.Z.mat());
}

SymMatrix shifted(const PairwiseGeometry& g, double r) {
  return SymMatrix(g.S.mat() - r * g.Z.mat());
}

void require_mismatch_args(const PairwiseGeometry& g, double r_p, double r_n,
                           const char* what) {
  require_open_unit(r_p, what);
  if (!(std::abs(r_n) <= 1.0)) {
    throw DomainError(std::string(what) + ": |r_n| must be <= 1");
  }
  const PsdReport rep = check_psd(shifted(g, r_p));
  if (!rep.is_pd) {
    std::ostringstream os;
    os << what << ": S - r_p Z is singular (min eigenvalue " << rep.min_eigenvalue << ")";
    throw DomainError(os.str());
  }
}

bool verify_monotone(const PairwiseGeometry& g, double r_max) {
  double prev = pairwise_log_det_p(g, 0.0);
  for (int i = 1; i < kMonotoneGrid; ++i) {
    const double r = r_max * static_cast<double>(i) / (kMonotoneGrid - 1);
    const double cur = pairwise_log_det_p(g, r);
    if (cur < prev - 1e-12) {
      return false;
    }
    prev = cur;
  }
  return true;
}

// Scores every interior candidate and both ends of [0, 1 - kBoundaryEps] on
// log|P| and keeps the best.
bool equal_pair(const PairwiseGeometry& g) {
  return (g.S.mat() - g.Z.mat()).norm() <= kEqualPairTol * g.S.mat().norm();
}

RmaxResult select_rmax(const PairwiseGeometry& g, std::vector<double> roots, RmaxMethod method) {
  RmaxResult res;
  res.method = method;
  const double upper = 1.0 - kBoundaryEps;

  // S == Z means E1 == E2: |P|(r) = |E| ((1 + r) / 2)^k rises all the way to
  // r = 1. Near there S - rZ is pure rounding noise, so decide up front.
  if (equal_pair(g)) {
    for (double r : roots) {
      if (r > 0.0 && r <= 1.0) res.candidates.push_back(r);
    }
    res.r_max = upper;
    res.degenerate = true;
    res.monotone_interval_verified = verify_monotone(g, res.r_max);
    return res;
  }

  double best_r = 0.0;
  double best_val = pairwise_log_det_p(g, 0.0);
  bool interior = false;
  for (double r : roots) {
    if (!(r > 0.0 && r <= 1.0)) continue;
    res.candidates.push_back(r);
    if (r >= upper) continue;
    const double val = pairwise_log_det_p(g, r);
    if (val > best_val) {
      best_val = val;
      best_r = r;
      interior = true;
    }
  }
  const double boundary_val = pairwise_log_det_p(g, upper);
  if (boundary_val > best_val) {
    best_r = upper;
    interior = false;
  }
  res.r_max = best_r;
  res.degenerate = !interior;
  res.monotone_interval_verified = verify_monotone(g, res.r_max);
  return res;
}

double bisect(const PairwiseGeometry& g, double lo, double hi, double f_lo) {
  while (hi - lo > kBisectionTol) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = derivative_numerator(g, mid);
    if (f_mid == 0.0) return mid;
    if ((f_mid < 0.0) == (f_lo < 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double golden_section_max(const PairwiseGeometry& g, double lo, double hi) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = pairwise_log_det_p(g, c);
  double fd = pairwise_log_det_p(g, d);
  while (b - a > kBisectionTol) {
    if (fc < fd) {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = pairwise_log_det_p(g, d);
    } else {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = pairwise_log_det_p(g, c);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

std::string to_string(RmaxMethod m) {
  switch (m) {
    case RmaxMethod::ClosedForm1d:
      return "closed-form-1d";
    case RmaxMethod::Cubic2d:
      return "cubic-2d";
    case RmaxMethod::NumericGeneral:
      return "numeric-general";
  }
  return "unknown";
}

PairwiseGeometry build_geometry(const SymMatrix& e1, const SymMatrix& e2) {
  if (e1.dim() != e2.dim()) {
    throw InvalidInput("build_geometry: covariances differ in dimension");
  }
  PairwiseGeometry g;
  g.k = e1.dim();
  g.E1 = e1;
  g.E2 = e2;
  const SymMatrix inv1 = spd_inverse(e1);
  const SymMatrix inv2 = spd_inverse(e2);
  g.S = SymMatrix(inv1.mat() + inv2.mat());
  if (g.k == 1) {
    const double root = std::sqrt(e1(0, 0) * e2(0, 0));
    g.root = GenMatrix::Constant(1, 1, root);
    g.inv_root = GenMatrix::Constant(1, 1, 1.0 / root);
  } else {
    g.root = spd_product_sqrt(e1, e2);
    g.inv_root = spd_product_sqrt(inv1, inv2);
  }
  g.Z = SymMatrix(g.inv_root + g.inv_root.transpose());
  g.lambda = (g.S.mat() * adjugate(g.Z.mat())).trace();
  return g;
}

SymMatrix pairwise_precision(const PairwiseGeometry& g, double r) {
  require_open_unit(r, "pairwise_precision");
  return SymMatrix((g.S.mat() - r * g.Z.mat()) / (1.0 - r * r));
}

double pairwise_log_det_p(const PairwiseGeometry& g, double r) {
  require_open_unit(r, "pairwise_log_det_p");
  const double shifted_log_det = log_det_psd(shifted(g, r));
  if (shifted_log_det == kNegInf) {
    // Only reachable through rounding right at the boundary; never a maximizer.
    return kNegInf;
  }
  return static_cast<double>(g.k) * std::log1p(-r * r) - shifted_log_det;
}

double derivative_numerator(const PairwiseGeometry& g, double r) {
  const GenMatrix m = g.S.mat() - r * g.Z.mat();
  const double t = (adjugate(m) * g.Z.mat()).trace();
  return r * r * t + 2.0 * static_cast<double>(g.k) * r * determinant(m) - t;
}

double dP_inv_det_derivative(const PairwiseGeometry& g, double r) {
  require_open_unit(r, "dP_inv_det_derivative");
  return derivative_numerator(g, r) / std::pow(1.0 - r * r, static_cast<double>(g.k + 1));
}

std::array<double, 4> cubic_coefficients(const PairwiseGeometry& g) {
  const double det_z = determinant(g.Z.mat());
  const double det_s = determinant(g.S.mat());
  return {2.0 * det_z, -3.0 * g.lambda, 4.0 * det_s + 2.0 * det_z, -g.lambda};
}

std::vector<double> cubic_real_roots(const std::array<double, 4>& c, double imag_tol) {
  const double scale = std::max({std::abs(c[0]), std::abs(c[1]), std::abs(c[2]), std::abs(c[3])});
  if (scale == 0.0) {
    return {};
  }
  // Drop vanishing leading coefficients so the companion matrix stays finite.
  std::size_t lead = 0;
  while (lead < 3 && std::abs(c[lead]) <= 1e-14 * scale) ++lead;
  const int degree = 3 - static_cast<int>(lead);
  if (degree == 0) {
    return {};
  }
  GenMatrix companion = GenMatrix::Zero(degree, degree);
  for (int i = 1; i < degree; ++i) companion(i, i - 1) = 1.0;
  for (int i = 0; i < degree; ++i) {
    companion(0, i) = -c[lead + 1 + i] / c[lead];
  }
  Eigen::EigenSolver<GenMatrix> es(companion, false);
  std::vector<double> roots;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const auto z = es.eigenvalues()(i);
    if (std::abs(z.imag()) <= imag_tol * std::max(1.0, std::abs(z.real()))) {
      roots.push_back(z.real());
    }
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

RmaxResult solve_rmax_numeric(const PairwiseGeometry& g) {
  std::vector<double> roots;
  // The derivative is rounding noise everywhere for equal pairs.
  if (equal_pair(g)) return select_rmax(g, std::move(roots), RmaxMethod::NumericGeneral);
  double a = 0.0;
  double fa = derivative_numerator(g, a);
  for (int i = 1; i <= kBracketIntervals; ++i) {
    const double b = static_cast<double>(i) / kBracketIntervals;
    const double fb = derivative_numerator(g, b);
    if (fb == 0.0 && b < 1.0) {
      roots.push_back(b);
    } else if (fa != 0.0 && (fa < 0.0) != (fb < 0.0)) {
      roots.push_back(bisect(g, a, b, fa));
    }
    a = b;
    fa = fb;
  }
  if (roots.empty()) {
    roots.push_back(golden_section_max(g, 0.0, 1.0 - kBoundaryEps));
  }
  return select_rmax(g, std::move(roots), RmaxMethod::NumericGeneral);
}

RmaxResult solve_rmax(const PairwiseGeometry& g) {
  if (g.k == 1) {
    const double s1 = std::sqrt(g.E1(0, 0));
    const double s2 = std::sqrt(g.E2(0, 0));
    RmaxResult res;
    res.method = RmaxMethod::ClosedForm1d;
    const double r = std::min(s1 / s2, s2 / s1);
    res.candidates = {r};
    if (r >= 1.0 - kBoundaryEps) {
      res.r_max = 1.0 - kBoundaryEps;
      res.degenerate = true;
    } else {
      res.r_max = r;
    }
    res.monotone_interval_verified = verify_monotone(g, res.r_max);
    return res;
  }
  if (g.k == 2) {
    return select_rmax(g, cubic_real_roots(cubic_coefficients(g), kCandidateImagTol),
                       RmaxMethod::Cubic2d);
  }
  return solve_rmax_numeric(g);
}

SymMatrix mismatch_covariance(const PairwiseGeometry& g, double r_p, double r_n) {
  require_mismatch_args(g, r_p, r_n, "mismatch_covariance");
  const SymMatrix inv = spd_inverse(shifted(g, r_p));
  return SymMatrix(inv.mat() * mismatch_middle(g, r_p, r_n).mat() * inv.mat());
}

double pairwise_alpha(const PairwiseGeometry& g, double r_p, double r_n) {
  require_mismatch_args(g, r_p, r_n, "pairwise_alpha");
  const double k = static_cast<double>(g.k);
  const double log_ratio =
      log_det_psd(mismatch_middle(g, r_p, r_n)) - log_det_spd(shifted(g, r_p));
  return std::exp(0.5 * (log_ratio - k * std::log1p(-r_p * r_p)));
}

double pairwise_beta(const PairwiseGeometry& g, double r_p, double r_n) {
  require_mismatch_args(g, r_p, r_n, "pairwise_beta");
  require_open_unit(r_n, "pairwise_beta");
  const double k = static_cast<double>(g.k);
  const double log_num =
      log_det_spd(shifted(g, r_n)) + log_det_psd(mismatch_middle(g, r_p, r_n));
  const double log_den = k * std::log1p(-r_n * r_n) + 2.0 * log_det_spd(shifted(g, r_p));
  return std::exp(0.5 * (log_num - log_den));
}

ScalarWeights scalar_weights(double sigma1, double sigma2, double r) {
  if (!(sigma1 > 0.0) || !(sigma2 > 0.0)) {
    throw InvalidInput("scalar_weights: standard deviations must be positive");
  }
  const double cross = r * sigma1 * sigma2;
  const double v1 = sigma1 * sigma1, v2 = sigma2 * sigma2;
  const double denom = v1 + v2 - 2.0 * cross;
  if (std::abs(denom) <= 4.0 * std::numeric_limits<double>::epsilon() * (v1 + v2)) {
    throw DomainError("scalar_weights: degenerate denominator (equal sigmas with r = 1)");
  }
  return {(v2 - cross) / denom, (v1 - cross) / denom};
}

SymMatrix pairwise_joint(const PairwiseGeometry& g, double r) {
  const Eigen::Index k = g.k;
  GenMatrix joint(2 * k, 2 * k);
  joint.topLeftCorner(k, k) = g.E1.mat();
  joint.bottomRightCorner(k, k) = g.E2.mat();
  joint.topRightCorner(k, k) = r * g.root;
  joint.bottomLeftCorner(k, k) = r * g.root.transpose();
  return SymMatrix(joint);
}

}  // namespace ellcomb
