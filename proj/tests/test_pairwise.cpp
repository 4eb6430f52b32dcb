#include "ellcomb/errors.hpp"
#include "ellcomb/gls.hpp"
#include "ellcomb/pairwise.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace ellcomb;
using namespace testing;

namespace {

PairwiseGeometry scalar_pair() { return build_geometry(scalar(1.0), scalar(4.0)); }
PairwiseGeometry planar_pair() { return build_geometry(diag({1, 4}), diag({3, 2})); }

// |P^-1|(r) from the dense joint covariance via LU inverses and Laplace
// expansion.
double dense_precision_det(const PairwiseGeometry& g, double r) {
  const GenMatrix joint = dense_pair_joint(g.E1.mat(), g.E2.mat(), g.root, r);
  const GenMatrix a = dense_design(2, g.k);
  return laplace_det(a.transpose() * joint.partialPivLu().inverse() * a);
}

double dense_p_det(const PairwiseGeometry& g, double r) { return 1.0 / dense_precision_det(g, r); }

}  // namespace

TEST_CASE("build_geometry") {
  SUBCASE("scalar pair") {
    const PairwiseGeometry g = scalar_pair();
    CHECK(g.S(0, 0) == 1.25);
    CHECK(g.Z(0, 0) == 1.0);
  }
  SUBCASE("diagonal 2x2 pair") {
    const PairwiseGeometry g = planar_pair();
    CHECK(rel_frob(g.S.mat(), diag({4.0 / 3.0, 0.75}).mat()) < 1e-15);
    CHECK(rel_frob(g.Z.mat(), diag({2.0 / std::sqrt(3.0), 1.0 / std::sqrt(2.0)}).mat()) < 1e-15);
    CHECK(g.lambda == doctest::Approx(2.0 * std::sqrt(2.0) / 3.0 + std::sqrt(3.0) / 2.0)
                          .epsilon(1e-15));
  }
  SUBCASE("equal covariances") {
    const SymMatrix e = sym({{2.0, 0.4}, {0.4, 1.0}});
    const PairwiseGeometry g = build_geometry(e, e);
    const GenMatrix twice_inv = 2.0 * e.mat().inverse();
    CHECK(rel_frob(g.S.mat(), twice_inv) < 1e-14);
    CHECK(rel_frob(g.Z.mat(), twice_inv) < 1e-14);
  }
  SUBCASE("scalar S and Z are exact closed forms") {
    for (double s1 : {0.3, 1.0, 2.5}) {
      for (double s2 : {0.7, 1.9, 4.0}) {
        const PairwiseGeometry g = build_geometry(scalar(s1 * s1), scalar(s2 * s2));
        CHECK(g.Z(0, 0) == doctest::Approx(2.0 / (s1 * s2)).epsilon(1e-15));
        CHECK(g.S(0, 0) == doctest::Approx(1.0 / (s1 * s1) + 1.0 / (s2 * s2)).epsilon(1e-15));
      }
    }
  }
  CHECK_THROWS_AS(build_geometry(diag({1, 0}), diag({1, 1})), DomainError);
}

TEST_CASE("pairwise_precision") {
  const PairwiseGeometry g1 = scalar_pair();
  CHECK(pairwise_precision(g1, 0.0)(0, 0) == 1.25);
  CHECK(pairwise_precision(g1, 0.5)(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(pairwise_precision(g1, 1.0), DomainError);
  CHECK_THROWS_AS(pairwise_precision(g1, -1.0), DomainError);

  SUBCASE("matches A^T R^-1 A from the dense joint") {
    std::mt19937_64 rng(201);
    std::uniform_real_distribution<double> ur(-0.99, 0.99);
    for (int t = 0; t < 100; ++t) {
      const Eigen::Index k = 1 + t % 4;
      const PairwiseGeometry g = build_geometry(random_spd(rng, k), random_spd(rng, k));
      const double r = ur(rng);
      const GenMatrix joint = dense_pair_joint(g.E1.mat(), g.E2.mat(), g.root, r);
      const GenMatrix a = dense_design(2, k);
      const GenMatrix normal = a.transpose() * joint.partialPivLu().inverse() * a;
      CHECK(rel_frob(pairwise_precision(g, r).mat(), normal) < 1e-9);
    }
  }
}

TEST_CASE("joint covariance: Schur boundary and inverse formula") {
  std::mt19937_64 rng(202);
  for (int t = 0; t < 100; ++t) {
    const Eigen::Index k = 1 + t % 4;
    const PairwiseGeometry g = build_geometry(random_spd(rng, k), random_spd(rng, k));
    CHECK(check_psd(pairwise_joint(g, 0.999999)).is_psd);
    CHECK(check_psd(pairwise_joint(g, -0.999999)).is_psd);
    CHECK_FALSE(check_psd(pairwise_joint(g, 1.000001)).is_psd);
    CHECK_FALSE(check_psd(pairwise_joint(g, -1.000001)).is_psd);

    const double det0 = pairwise_joint(g, 0.0).mat().determinant();
    CHECK(std::abs(pairwise_joint(g, 1.0 - 1e-8).mat().determinant()) < 1e-6 * det0);

    for (double r : {0.0, 0.3, -0.6, 0.99}) {
      GenMatrix inv(2 * k, 2 * k);
      inv << g.E1.mat().inverse(), -r * g.inv_root, -r * g.inv_root.transpose(),
          g.E2.mat().inverse();
      inv /= (1.0 - r * r);
      CHECK((pairwise_joint(g, r).mat() * inv - GenMatrix::Identity(2 * k, 2 * k)).norm() < 1e-9);
    }
  }
}

TEST_CASE("derivative of |P^-1|") {
  const PairwiseGeometry g1 = scalar_pair();
  CHECK(std::abs(dP_inv_det_derivative(g1, 0.5)) < 1e-15);
  CHECK(dP_inv_det_derivative(g1, 0.0) == doctest::Approx(-1.0).epsilon(1e-15));

  const PairwiseGeometry g2 = planar_pair();
  const double expected0 = -(adjugate(g2.S.mat()) * g2.Z.mat()).trace();
  CHECK(expected0 < 0.0);
  CHECK(dP_inv_det_derivative(g2, 0.0) == doctest::Approx(expected0).epsilon(1e-14));

  SUBCASE("central differences of the dense determinant") {
    std::mt19937_64 rng(203);
    std::uniform_real_distribution<double> ur(0.05, 0.9);
    const double h = 1e-6;
    for (int t = 0; t < 20; ++t) {
      const Eigen::Index k = 1 + t % 3;
      const PairwiseGeometry g = build_geometry(random_spd(rng, k), random_spd(rng, k));
      const double r = ur(rng);
      const double fd = (dense_precision_det(g, r + h) - dense_precision_det(g, r - h)) / (2 * h);
      const double exact = dP_inv_det_derivative(g, r);
      CHECK(std::abs(exact - fd) <= 1e-6 * std::max(std::abs(fd), 1e-3 * dense_precision_det(g, r)));
    }
  }
}

TEST_CASE("cubic roots") {
  // (r - 1)(r - 2)(r + 3) = r^3 - 7r + 6
  const auto roots = cubic_real_roots({1.0, 0.0, -7.0, 6.0});
  REQUIRE(roots.size() == 3);
  CHECK(roots[0] == doctest::Approx(-3.0));
  CHECK(roots[1] == doctest::Approx(1.0));
  CHECK(roots[2] == doctest::Approx(2.0));
  // r^2 + 1 has no real roots; degree drops to 2.
  CHECK(cubic_real_roots({0.0, 1.0, 0.0, 1.0}).empty());
  CHECK(cubic_real_roots({0.0, 0.0, 2.0, -1.0}) == std::vector<double>{0.5});
}

TEST_CASE("solve_rmax") {
  SUBCASE("scalar closed form") {
    const RmaxResult res = solve_rmax(scalar_pair());
    CHECK(res.r_max == 0.5);
    CHECK(res.method == RmaxMethod::ClosedForm1d);
    CHECK(res.monotone_interval_verified);
    CHECK_FALSE(res.degenerate);
  }
  SUBCASE("2x2 cubic") {
    const PairwiseGeometry g = planar_pair();
    const auto c = cubic_coefficients(g);
    const double s2 = std::sqrt(2.0), s3 = std::sqrt(3.0), s6 = std::sqrt(6.0);
    CHECK(std::abs(c[0] - 2.0 * s6 / 3.0) < 1e-12);
    CHECK(std::abs(c[1] + (3.0 * s3 + 4.0 * s2) / 2.0) < 1e-12);
    CHECK(std::abs(c[2] - (2.0 * s6 + 12.0) / 3.0) < 1e-12);
    CHECK(std::abs(c[3] + 2.0 * s2 / 3.0 + s3 / 2.0) < 1e-12);

    const RmaxResult res = solve_rmax(g);
    CHECK(res.method == RmaxMethod::Cubic2d);
    CHECK(std::abs(res.r_max - 0.6376189) < 1e-6);
    CHECK(res.monotone_interval_verified);
    CHECK_FALSE(res.degenerate);

    // Brute-force grid maximization of the dense |P|.
    double best_r = 0.0, best = 0.0;
    for (int i = 0; i <= 20000; ++i) {
      const double r = 0.99 * i / 20000.0;
      const double v = dense_p_det(g, r);
      if (v > best) {
        best = v;
        best_r = r;
      }
    }
    CHECK(std::abs(best_r - res.r_max) < 1e-4);
  }
  SUBCASE("equal covariances hit the boundary") {
    for (const SymMatrix& e : {scalar(2.0), diag({1.0, 3.0}), sym({{2, 0.5, 0}, {0.5, 1, 0.2}, {0, 0.2, 1}})}) {
      const RmaxResult res = solve_rmax(build_geometry(e, e));
      CHECK(res.degenerate);
      CHECK(res.r_max == 1.0 - kBoundaryEps);
      CHECK(res.monotone_interval_verified);
      // |P| = |E| ((1 + r) / 2)^k along the way.
      const PairwiseGeometry g = build_geometry(e, e);
      const double k = static_cast<double>(e.dim());
      CHECK(std::exp(pairwise_log_det_p(g, 0.3)) ==
            doctest::Approx(e.mat().determinant() * std::pow(0.65, k)).epsilon(1e-12));
    }
  }
  SUBCASE("cubic agrees with the general numeric route") {
    std::mt19937_64 rng(204);
    for (int t = 0; t < 100; ++t) {
      const PairwiseGeometry g = build_geometry(random_spd(rng, 2), random_spd(rng, 2));
      const RmaxResult cubic = solve_rmax(g);
      const RmaxResult numeric = solve_rmax_numeric(g);
      CHECK(std::abs(cubic.r_max - numeric.r_max) < 1e-8);
      CHECK(cubic.monotone_interval_verified);
    }
  }
  SUBCASE("scalar closed form agrees with the general numeric route") {
    std::mt19937_64 rng(205);
    std::uniform_real_distribution<double> ur(0.1, 10.0);
    for (int t = 0; t < 50; ++t) {
      const PairwiseGeometry g = build_geometry(scalar(ur(rng)), scalar(ur(rng)));
      CHECK(std::abs(solve_rmax(g).r_max - solve_rmax_numeric(g).r_max) < 1e-9);
    }
  }
  SUBCASE("k >= 3 interior maxima are critical points") {
    std::mt19937_64 rng(206);
    for (int t = 0; t < 40; ++t) {
      const Eigen::Index k = 3 + t % 3;
      const PairwiseGeometry g = build_geometry(random_spd(rng, k), random_spd(rng, k));
      const RmaxResult res = solve_rmax(g);
      CHECK(res.method == RmaxMethod::NumericGeneral);
      CHECK(res.monotone_interval_verified);
      if (!res.degenerate) {
        const double scale = std::abs(dP_inv_det_derivative(g, 0.0));
        CHECK(std::abs(dP_inv_det_derivative(g, res.r_max)) < 1e-8 * std::max(1.0, scale));
        CHECK(pairwise_log_det_p(g, res.r_max) >= pairwise_log_det_p(g, res.r_max * 0.99));
        CHECK(pairwise_log_det_p(g, res.r_max) >=
              pairwise_log_det_p(g, std::min(0.999, res.r_max * 1.01 + 1e-3)));
      }
    }
  }
  SUBCASE("scalar P(r_max, r_max) equals the smaller variance") {
    std::mt19937_64 rng(207);
    std::uniform_real_distribution<double> ur(0.1, 10.0);
    for (int t = 0; t < 100; ++t) {
      const double v1 = ur(rng), v2 = ur(rng);
      const PairwiseGeometry g = build_geometry(scalar(v1), scalar(v2));
      const double r = solve_rmax(g).r_max;
      CHECK(mismatch_covariance(g, r, r)(0, 0) == doctest::Approx(std::min(v1, v2)).epsilon(1e-10));
    }
  }
}

TEST_CASE("mismatch covariance") {
  const PairwiseGeometry g1 = scalar_pair();
  CHECK(mismatch_covariance(g1, 0.0, 0.0)(0, 0) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(mismatch_covariance(g1, 0.5, 0.5)(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(mismatch_covariance(g1, 0.0, 0.5)(0, 0) == doctest::Approx(1.12).epsilon(1e-14));
  CHECK_THROWS_AS(mismatch_covariance(g1, 1.0, 0.5), DomainError);
  CHECK_THROWS_AS(mismatch_covariance(g1, 0.5, 1.5), DomainError);

  SUBCASE("equals the dense sandwich with W = R(r_p)^-1, R = R(r_n)") {
    std::mt19937_64 rng(208);
    std::uniform_real_distribution<double> ur(0.0, 0.95);
    for (int t = 0; t < 100; ++t) {
      const Eigen::Index k = 1 + t % 4;
      const PairwiseGeometry g = build_geometry(random_spd(rng, k), random_spd(rng, k));
      const double rp = ur(rng), rn = ur(rng);
      const GenMatrix w =
          dense_pair_joint(g.E1.mat(), g.E2.mat(), g.root, rp).partialPivLu().inverse();
      const GenMatrix truth = dense_pair_joint(g.E1.mat(), g.E2.mat(), g.root, rn);
      CHECK(rel_frob(mismatch_covariance(g, rp, rn).mat(), dense_sandwich(w, truth, k)) < 1e-9);
      CHECK(rel_frob(mismatch_covariance(g, rp, rp).mat(),
                     pairwise_precision(g, rp).mat().inverse()) < 1e-9);
    }
  }
}

TEST_CASE("pairwise alpha and beta") {
  const PairwiseGeometry g1 = scalar_pair();
  CHECK(pairwise_alpha(g1, 0.0, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pairwise_alpha(g1, 0.0, 0.5) == doctest::Approx(std::sqrt(1.12 / 0.8)).epsilon(1e-14));
  CHECK(pairwise_beta(g1, 0.0, 0.5) == doctest::Approx(std::sqrt(1.12)).epsilon(1e-14));
  CHECK_THROWS_AS(pairwise_beta(g1, 0.0, 1.0), DomainError);

  SUBCASE("agree with the generic metrics on assembled joints") {
    std::mt19937_64 rng(209);
    std::uniform_real_distribution<double> ur(0.0, 0.95);
    for (int t = 0; t < 100; ++t) {
      const Eigen::Index k = 1 + t % 3;
      const PairwiseGeometry g = build_geometry(random_spd(rng, k), random_spd(rng, k));
      const double rp = ur(rng), rn = ur(rng);
      std::vector<Vector> ys(2, Vector::Zero(k));
      const StackedSystem sys(ys);
      const SymMatrix w = pseudo_inverse(pairwise_joint(g, rp));
      const SymMatrix truth = pairwise_joint(g, rn);
      CHECK(std::abs(pairwise_alpha(g, rp, rn) - alpha_metric(sys, w, truth)) < 1e-9);
      CHECK(std::abs(pairwise_beta(g, rp, rn) - beta_metric(sys, w, truth)) < 1e-9);
      CHECK(std::abs(pairwise_alpha(g, rp, rp) - 1.0) < 1e-12);
      CHECK(std::abs(pairwise_beta(g, rn, rn) - 1.0) < 1e-12);
      CHECK(pairwise_beta(g, rp, rn) >= 1.0 - 1e-9);
    }
  }
  SUBCASE("commuting pairs: alpha(0, r_n) >= 1 and non-decreasing on [0, r_max]") {
    std::mt19937_64 rng(210);
    std::uniform_real_distribution<double> ur(0.1, 10.0);
    for (int t = 0; t < 50; ++t) {
      const Eigen::Index k = 1 + t % 3;
      Vector d1(k), d2(k);
      for (Eigen::Index i = 0; i < k; ++i) {
        d1(i) = ur(rng);
        d2(i) = ur(rng);
      }
      const PairwiseGeometry g =
          build_geometry(SymMatrix(GenMatrix(d1.asDiagonal())), SymMatrix(GenMatrix(d2.asDiagonal())));
      const double r_max = solve_rmax(g).r_max;
      double prev = 1.0;
      for (int i = 0; i < 32; ++i) {
        const double a = pairwise_alpha(g, 0.0, r_max * i / 31.0);
        CHECK(a >= 1.0 - 1e-12);
        CHECK(a >= prev - 1e-12);
        prev = a;
      }
    }
  }
}

TEST_CASE("alpha(0, r_n) on non-commuting pairs is only recorded") {
  std::mt19937_64 rng(212);
  int below_one = 0, decreasing = 0;
  const int pairs = 200;
  for (int t = 0; t < pairs; ++t) {
    const Eigen::Index k = 2 + t % 2;
    const PairwiseGeometry g = build_geometry(random_spd(rng, k), random_spd(rng, k));
    const double r_max = solve_rmax(g).r_max;
    double prev = 1.0;
    bool low = false, down = false;
    for (int i = 0; i < 32; ++i) {
      const double a = pairwise_alpha(g, 0.0, r_max * i / 31.0);
      low = low || a < 1.0 - 1e-12;
      down = down || a < prev - 1e-12;
      prev = a;
    }
    below_one += low;
    decreasing += down;
  }
  MESSAGE("non-commuting pairs: " << below_one << " of " << pairs << " with alpha(0, r_n) < 1, "
                                  << decreasing << " not monotone on [0, r_max]");
}

TEST_CASE("monotone entropy on [0, r_max]") {
  std::mt19937_64 rng(211);
  for (int t = 0; t < 60; ++t) {
    const Eigen::Index k = 1 + t % 3;
    const PairwiseGeometry g = build_geometry(random_spd(rng, k), random_spd(rng, k));
    const double r_max = solve_rmax(g).r_max;
    double prev = -1e300;
    for (int i = 0; i < kMonotoneGrid; ++i) {
      const double r = r_max * i / (kMonotoneGrid - 1);
      const double h = gaussian_entropy(SymMatrix(pairwise_precision(g, r).mat().inverse()));
      CHECK(h >= prev - 1e-12);
      prev = h;
    }
  }
}

TEST_CASE("scalar weights") {
  ScalarWeights w = scalar_weights(1.0, 2.0, 0.0);
  CHECK(w.w1 == doctest::Approx(0.8));
  CHECK(w.w2 == doctest::Approx(0.2));
  w = scalar_weights(1.0, 2.0, 0.5);
  CHECK(w.w1 == doctest::Approx(1.0));
  CHECK(std::abs(w.w2) < 1e-15);
  w = scalar_weights(1.0, 2.0, 0.8);
  CHECK(w.w2 == doctest::Approx((1.0 - 1.6) / (5.0 - 3.2)));
  CHECK(w.w2 < 0.0);
  CHECK_THROWS_AS(scalar_weights(1.5, 1.5, 1.0), DomainError);
  CHECK_THROWS_AS(scalar_weights(0.0, 1.0, 0.0), InvalidInput);

  SUBCASE("sign pattern around r_max") {
    std::mt19937_64 rng(212);
    std::uniform_real_distribution<double> ur(0.1, 5.0);
    for (int t = 0; t < 100; ++t) {
      const double s1 = ur(rng), s2 = ur(rng);
      const double r_max = std::min(s1 / s2, s2 / s1);
      const ScalarWeights in = scalar_weights(s1, s2, 0.9 * r_max);
      CHECK(in.w1 + in.w2 == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(in.w1 >= 0.0);
      CHECK(in.w2 >= 0.0);
      const ScalarWeights out = scalar_weights(s1, s2, r_max + 0.5 * (1.0 - r_max));
      CHECK(((out.w1 < 0.0) != (out.w2 < 0.0)));
    }
  }
}
