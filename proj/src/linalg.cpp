#include "ellcomb/linalg.hpp"

#include "ellcomb/errors.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

namespace ellcomb {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

using EigenSolver = Eigen::SelfAdjointEigenSolver<GenMatrix>;

EigenSolver decompose(const SymMatrix& m, const char* what) {
  require_finite(m.mat(), what);
  EigenSolver es(m.mat());
  if (es.info() != Eigen::Success) {
    throw DomainError(std::string(what) + ": eigendecomposition failed");
  }
  return es;
}

// Eigenvalues come back in increasing order.
void require_pd(const EigenSolver& es, const char* what) {
  const auto& ev = es.eigenvalues();
  const double scale = ev.cwiseAbs().maxCoeff();
  const double floor = static_cast<double>(ev.size()) * kEps * scale;
  if (!(ev(0) > floor)) {
    std::ostringstream os;
    os << what << ": matrix is not positive definite (min eigenvalue "
       << ev(0) << ")";
    throw DomainError(os.str());
  }
}

SymMatrix spectral_map(const EigenSolver& es, const Vector& mapped) {
  const auto& q = es.eigenvectors();
  return SymMatrix(q * mapped.asDiagonal() * q.transpose());
}

}  // namespace

SymMatrix::SymMatrix(const GenMatrix& m) {
  if (m.rows() < 1 || m.rows() != m.cols()) {
    throw InvalidInput("SymMatrix: expected a non-empty square matrix");
  }
  m_ = 0.5 * (m + m.transpose());
}

void require_finite(const GenMatrix& m, const char* what) {
  if (!m.allFinite()) {
    throw InvalidInput(std::string(what) + ": non-finite entry");
  }
}

double default_psd_tolerance(Eigen::Index k, double max_abs_eigenvalue) {
  return static_cast<double>(k) * kEps * std::max(1.0, max_abs_eigenvalue);
}

PsdReport check_psd(const SymMatrix& m, std::optional<double> tol) {
  const EigenSolver es = decompose(m, "check_psd");
  const auto& ev = es.eigenvalues();
  PsdReport report;
  report.min_eigenvalue = ev(0);
  report.tolerance_used =
      tol ? *tol : default_psd_tolerance(m.dim(), ev.cwiseAbs().maxCoeff());
  report.is_psd = report.min_eigenvalue >= -report.tolerance_used;
  report.is_pd = report.min_eigenvalue > report.tolerance_used;
  return report;
}

SymMatrix spd_sqrt(const SymMatrix& m) {
  const EigenSolver es = decompose(m, "spd_sqrt");
  require_pd(es, "spd_sqrt");
  return spectral_map(es, es.eigenvalues().cwiseSqrt());
}

SymMatrix spd_inverse(const SymMatrix& m) {
  const EigenSolver es = decompose(m, "spd_inverse");
  require_pd(es, "spd_inverse");
  return spectral_map(es, es.eigenvalues().cwiseInverse());
}

GenMatrix spd_product_sqrt(const SymMatrix& e1, const SymMatrix& e2) {
  if (e1.dim() != e2.dim()) {
    throw InvalidInput("spd_product_sqrt: dimension mismatch");
  }
  const EigenSolver es1 = decompose(e1, "spd_product_sqrt");
  require_pd(es1, "spd_product_sqrt");
  const Vector root = es1.eigenvalues().cwiseSqrt();
  const auto& q = es1.eigenvectors();
  const GenMatrix half = q * root.asDiagonal() * q.transpose();
  const GenMatrix inv_half = q * root.cwiseInverse().asDiagonal() * q.transpose();

  const EigenSolver es2 = decompose(e2, "spd_product_sqrt");
  require_pd(es2, "spd_product_sqrt");

  const SymMatrix inner(half * e2.mat() * half);
  return half * spd_sqrt(inner).mat() * inv_half;
}

SymMatrix pseudo_inverse(const SymMatrix& m, std::optional<double> rel_tol) {
  const EigenSolver es = decompose(m, "pseudo_inverse");
  const auto& ev = es.eigenvalues();
  const double lambda_max = ev.cwiseAbs().maxCoeff();
  const double psd_tol = default_psd_tolerance(m.dim(), lambda_max);
  if (ev(0) < -psd_tol) {
    std::ostringstream os;
    os << "pseudo_inverse: matrix is indefinite (min eigenvalue " << ev(0) << ")";
    throw DomainError(os.str());
  }
  const double cutoff =
      (rel_tol ? *rel_tol : static_cast<double>(m.dim()) * kEps) * lambda_max;
  Vector mapped(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    mapped(i) = ev(i) > cutoff ? 1.0 / ev(i) : 0.0;
  }
  return spectral_map(es, mapped);
}

GenMatrix adjugate(const GenMatrix& m) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw InvalidInput("adjugate: expected a square matrix");
  }
  const Eigen::Index k = m.rows();
  if (k == 1) {
    return GenMatrix::Ones(1, 1);
  }
  if (k == 2) {
    GenMatrix a(2, 2);
    a << m(1, 1), -m(0, 1), -m(1, 0), m(0, 0);
    return a;
  }
  if (k == 3) {
    // Transposed cofactors.
    GenMatrix a(3, 3);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        const int r0 = (j + 1) % 3, r1 = (j + 2) % 3;
        const int c0 = (i + 1) % 3, c1 = (i + 2) % 3;
        a(i, j) = m(r0, c0) * m(r1, c1) - m(r0, c1) * m(r1, c0);
      }
    }
    return a;
  }
  // M = U S V^T  =>  adj(M) = det(U) det(V) * V adj(S) U^T, which stays
  // well defined when M is singular.
  Eigen::JacobiSVD<GenMatrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  Vector adj_s(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    double prod = 1.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (j != i) prod *= s(j);
    }
    adj_s(i) = prod;
  }
  const double sign = svd.matrixU().determinant() * svd.matrixV().determinant();
  return sign * svd.matrixV() * adj_s.asDiagonal() * svd.matrixU().transpose();
}

double determinant(const GenMatrix& m) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw InvalidInput("determinant: expected a square matrix");
  }
  switch (m.rows()) {
    case 1:
      return m(0, 0);
    case 2:
      return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    default:
      return m.fullPivLu().determinant();
  }
}

double log_det_spd(const SymMatrix& m) {
  const EigenSolver es = decompose(m, "log_det_spd");
  require_pd(es, "log_det_spd");
  return es.eigenvalues().array().log().sum();
}

double gaussian_entropy(const SymMatrix& p) {
  const double k = static_cast<double>(p.dim());
  return 0.5 * k + 0.5 * k * std::log(2.0 * std::numbers::pi) + 0.5 * log_det_spd(p);
}

}  // namespace ellcomb
