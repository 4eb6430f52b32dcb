#pragma once

#include "ellcomb/linalg.hpp"

#include <array>
#include <string>
#include <vector>

namespace ellcomb {

/// Distance from r = 1 at which a boundary maximizer is reported; R(r) is
/// singular at r = 1 itself.
inline constexpr double kBoundaryEps = 1e-9;

/// Grid size used to verify that |P|(r) is non-decreasing on [0, r_max].
inline constexpr int kMonotoneGrid = 64;

/// Cached quantities for combining two estimates with covariances E1, E2
/// under the joint model R(r) = [[E1, r sqrt(E1 E2)], [r sqrt(E1 E2)^T, E2]].
///   S = E1^-1 + E2^-1
///   Z = sqrt(E1^-1 E2^-1) + sqrt(E1^-1 E2^-1)^T
///   lambda = tr(S adj(Z))
struct PairwiseGeometry {
  Eigen::Index k = 0;
  SymMatrix E1, E2;
  SymMatrix S, Z;
  GenMatrix root;      // sqrt(E1 E2)
  GenMatrix inv_root;  // sqrt(E1^-1 E2^-1)
  double lambda = 0.0;
};

PairwiseGeometry build_geometry(const SymMatrix& e1, const SymMatrix& e2);

/// P^-1(r) = (S - r Z) / (1 - r^2).
SymMatrix pairwise_precision(const PairwiseGeometry& g, double r);

/// log|P|(r) of the BLUE combine at coefficient r.
double pairwise_log_det_p(const PairwiseGeometry& g, double r);

/// d/dr |P^-1|(r) via Jacobi's formula.
double dP_inv_det_derivative(const PairwiseGeometry& g, double r);

/// Numerator of the derivative above:
///   r^2 tr(adj(S - rZ) Z) + 2 k r |S - rZ| - tr(adj(S - rZ) Z).
double derivative_numerator(const PairwiseGeometry& g, double r);

/// Coefficients (c3, c2, c1, c0) of 2|Z| r^3 - 3 lambda r^2 + (4|S| + 2|Z|) r - lambda.
/// Only meaningful for k == 2.
std::array<double, 4> cubic_coefficients(const PairwiseGeometry& g);

/// Real roots of c3 r^3 + c2 r^2 + c1 r + c0 via companion-matrix eigenvalues.
/// Roots whose imaginary part exceeds imag_tol are dropped.
std::vector<double> cubic_real_roots(const std::array<double, 4>& c, double imag_tol = 1e-9);

enum class RmaxMethod { ClosedForm1d, Cubic2d, NumericGeneral };

std::string to_string(RmaxMethod m);

struct RmaxResult {
  double r_max = 0.0;
  RmaxMethod method = RmaxMethod::ClosedForm1d;
  std::vector<double> candidates;
  bool monotone_interval_verified = false;
  // No interior critical point: r_max sits at 0 or at 1 - kBoundaryEps.
  bool degenerate = false;
};

RmaxResult solve_rmax(const PairwiseGeometry& g);

/// The general-k route (bracketed roots of the derivative numerator, falling
/// back to golden-section maximization). solve_rmax uses it for k >= 3; it is
/// exposed so the closed forms can be checked against it.
RmaxResult solve_rmax_numeric(const PairwiseGeometry& g);

/// Covariance of the combine that weights with r_p while the truth is r_n:
///   (S - r_p Z)^-1 [(1 - 2 r_p r_n + r_p^2) S + (r_n - 2 r_p + r_n r_p^2) Z] (S - r_p Z)^-1
SymMatrix mismatch_covariance(const PairwiseGeometry& g, double r_p, double r_n);

double pairwise_alpha(const PairwiseGeometry& g, double r_p, double r_n);
double pairwise_beta(const PairwiseGeometry& g, double r_p, double r_n);

struct ScalarWeights {
  double w1 = 0.0;
  double w2 = 0.0;
};

/// BLUE weights for two scalar estimates with standard deviations sigma1,
/// sigma2 and correlation r.
ScalarWeights scalar_weights(double sigma1, double sigma2, double r);

/// Joint covariance of the pair at coefficient r (2k-by-2k).
SymMatrix pairwise_joint(const PairwiseGeometry& g, double r);

}  // namespace ellcomb
