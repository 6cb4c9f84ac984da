#include "doctest.h"

#include "jivekit/robust_svd.hpp"

#include <cmath>
#include <random>

using namespace jivekit;

namespace {

Matrix gaussian(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = z(rng);
  return m;
}

Vector unit(Eigen::Index n, std::mt19937_64& rng) {
  Vector v = gaussian(n, 1, rng).col(0);
  return v / v.norm();
}

// Low-rank matrix with prescribed singular values and random orthonormal factors.
Matrix low_rank(Eigen::Index m, Eigen::Index n, const Vector& d, std::mt19937_64& rng) {
  const Matrix u = gaussian(m, d.size(), rng).householderQr().householderQ() * Matrix::Identity(m, d.size());
  const Matrix v = gaussian(n, d.size(), rng).householderQr().householderQ() * Matrix::Identity(n, d.size());
  return u * d.asDiagonal() * v.transpose();
}

}  // namespace

TEST_SUITE("huber") {
  TEST_CASE("rho at zero, at the knot, and outside") {
    CHECK(huber_rho(0.0, 1.345) == 0.0);
    CHECK(huber_rho(1.345, 1.345) == doctest::Approx(1.809025).epsilon(1e-12));
    CHECK(huber_rho(3.0, 1.345) == doctest::Approx(2 * 1.345 * 3 - 1.345 * 1.345).epsilon(1e-12));
    CHECK(huber_rho(-3.0, 1.345) == doctest::Approx(6.260975).epsilon(1e-12));
  }

  TEST_CASE("rho is continuous at the knot") {
    for (double c : {0.5, 1.345, 4.0}) {
      CHECK(std::abs(huber_rho(c + 1e-9, c) - huber_rho(c - 1e-9, c)) < 1e-7);
    }
  }

  TEST_CASE("rho rejects bad input") {
    CHECK_THROWS_AS(huber_rho(1.0, 0.0), InvalidArgument);
    CHECK_THROWS_AS(huber_rho(NAN, 1.0), InvalidArgument);
  }

  TEST_CASE("weights") {
    CHECK(huber_weight(0.0, 1.0, 1.345) == 1.0);
    CHECK(huber_weight(1.345, 1.0, 1.345) == 1.0);
    CHECK(huber_weight(13.45, 1.0, 1.345) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK_THROWS_AS(huber_weight(1.0, 0.0, 1.345), InvalidArgument);
  }

  TEST_CASE("weights stay in (0, 1]") {
    std::mt19937_64 rng(3);
    std::cauchy_distribution<double> cau(0.0, 100.0);
    for (int i = 0; i < 1000; ++i) {
      const double w = huber_weight(cau(rng), 0.5, 1.345);
      CHECK(w > 0.0);
      CHECK(w <= 1.0);
    }
  }
}

TEST_SUITE("mad_scale") {
  TEST_CASE("all-zero residuals clamp to the floor") {
    const std::vector<double> r{0, 0, 0, 0};
    CHECK(mad_scale(r, 1e-8) == 1e-8);
  }

  TEST_CASE("hand example") {
    const std::vector<double> r{-1, 0, 1};
    CHECK(mad_scale(r, 1e-8) == doctest::Approx(1.4826).epsilon(1e-12));
  }

  TEST_CASE("consistent for the normal scale") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> r(100000);
    for (auto& x : r) x = z(rng);
    CHECK(std::abs(mad_scale(r, 1e-8) - 1.0) < 0.02);
  }

  TEST_CASE("masked cells are ignored; empty input is rejected") {
    Matrix m(2, 2);
    m << -1, 1e9, 0, 1;
    MissingMask mask(2, 2);
    mask << true, false, true, true;
    CHECK(mad_scale(m, &mask, 1e-8) == doctest::Approx(1.4826));
    CHECK_THROWS_AS(mad_scale(std::vector<double>{}, 1e-8), InvalidArgument);
  }
}

TEST_SUITE("robust_rank_one") {
  TEST_CASE("exact rank-one is a fixed point") {
    std::mt19937_64 rng(5);
    const Vector u0 = unit(30, rng), v0 = unit(20, rng);
    const Matrix x = 7.5 * u0 * v0.transpose();
    const RankOneFit f = robust_rank_one(x, nullptr, HuberConfig{});
    CHECK(f.delta == doctest::Approx(7.5).epsilon(1e-8));
    CHECK(std::abs(std::abs(f.u.dot(u0)) - 1.0) < 1e-8);
    CHECK(std::abs(std::abs(f.v.dot(v0)) - 1.0) < 1e-8);
    CHECK(std::abs(f.u.norm() - 1.0) < 1e-10);
    CHECK(std::abs(f.v.norm() - 1.0) < 1e-10);
  }

  TEST_CASE("one huge cell barely moves the robust fit") {
    std::mt19937_64 rng(6);
    const Vector u0 = unit(50, rng), v0 = unit(40, rng);
    const Matrix clean = 10.0 * u0 * v0.transpose();
    Matrix x = clean;
    x(7, 3) = 1e6;
    const RankOneFit oracle = classical_svd(clean, 1).components[0];
    const RankOneFit f = robust_rank_one(x, nullptr, HuberConfig{});
    CHECK(std::abs(f.delta - oracle.delta) < 1e-3);
    CHECK((f.u - oracle.u).cwiseAbs().maxCoeff() < 1e-3);
    CHECK((f.v - oracle.v).cwiseAbs().maxCoeff() < 1e-3);
    const RankOneFit bad = classical_svd(x, 1).components[0];
    const double angle = std::acos(std::min(1.0, std::abs(bad.u.dot(oracle.u))));
    CHECK(angle > 0.1);
  }

  TEST_CASE("missing cells on an exact rank-one matrix") {
    std::mt19937_64 rng(8);
    const Vector u0 = unit(40, rng), v0 = unit(30, rng);
    Matrix x = 3.0 * u0 * v0.transpose();
    MissingMask mask = MissingMask::Constant(40, 30, true);
    std::uniform_int_distribution<int> ri(0, 39), cj(0, 29);
    for (int t = 0; t < 120; ++t) {
      const int i = ri(rng), j = cj(rng);
      mask(i, j) = false;
      x(i, j) = std::nan("");
    }
    validate_mask(mask, 40, 30);
    const RankOneFit f = robust_rank_one(x, &mask, HuberConfig{});
    CHECK(f.delta == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(std::abs(std::abs(f.u.dot(u0)) - 1.0) < 1e-6);
    CHECK(std::abs(std::abs(f.v.dot(v0)) - 1.0) < 1e-6);
  }

  TEST_CASE("too few observed cells in a row is rejected") {
    Matrix x = Matrix::Ones(4, 4);
    MissingMask mask = MissingMask::Constant(4, 4, true);
    mask(0, 0) = mask(0, 1) = mask(0, 2) = false;
    CHECK_THROWS_AS(robust_rank_one(x, &mask, HuberConfig{}), InvalidArgument);
  }

  TEST_CASE("bad config is rejected") {
    HuberConfig cfg;
    cfg.c = -1;
    CHECK_THROWS_AS(robust_rank_one(Matrix::Ones(3, 3), nullptr, cfg), InvalidArgument);
  }
}

TEST_SUITE("robust_svd") {
  TEST_CASE("padded diagonal") {
    Matrix x = Matrix::Zero(5, 5);
    x(0, 0) = 3;
    x(1, 1) = 2;
    x(2, 2) = 1;
    const SvdResult r = robust_svd(x, 3, nullptr, HuberConfig{});
    REQUIRE(r.rank() == 3);
    CHECK(r.singular_values()(0) == doctest::Approx(3).epsilon(1e-8));
    CHECK(r.singular_values()(1) == doctest::Approx(2).epsilon(1e-8));
    CHECK(r.singular_values()(2) == doctest::Approx(1).epsilon(1e-8));
  }

  TEST_CASE("agrees with the classical SVD on clean low-rank data") {
    std::mt19937_64 rng(21);
    Vector d(5);
    d << 50, 40, 30, 20, 10;
    Matrix x = low_rank(60, 40, d, rng) + 0.01 * gaussian(60, 40, rng);
    const SvdResult rob = robust_svd(x, 5, nullptr, HuberConfig{});
    const SvdResult cls = classical_svd(x, 5);
    for (int k = 0; k < 5; ++k) {
      CHECK(std::abs(rob.singular_values()(k) / cls.singular_values()(k) - 1.0) < 0.01);
    }
  }

  TEST_CASE("cell shifts: robust stays near the clean values, classical does not") {
    std::mt19937_64 rng(22);
    Vector d(5);
    d << 50, 40, 30, 20, 10;
    const Matrix clean = low_rank(80, 60, d, rng) + 0.01 * gaussian(80, 60, rng);
    Matrix x = clean;
    std::uniform_int_distribution<int> ri(0, 79), cj(0, 59);
    for (int t = 0; t < 240; ++t) x(ri(rng), cj(rng)) += 15.0;
    const Vector oracle = classical_svd(clean, 5).singular_values();
    const Vector rob = robust_svd(x, 5, nullptr, HuberConfig{}).singular_values();
    const Vector cls = classical_svd(x, 5).singular_values();
    double rob_dev = 0, cls_dev = 0;
    for (int k = 0; k < 5; ++k) {
      rob_dev = std::max(rob_dev, std::abs(rob(k) / oracle(k) - 1.0));
      cls_dev = std::max(cls_dev, std::abs(cls(k) / oracle(k) - 1.0));
    }
    CHECK(rob_dev < 0.05);
    CHECK(cls_dev > 0.05);
  }

  TEST_CASE("properties on random inputs") {
    std::mt19937_64 rng(23);
    for (int t = 0; t < 10; ++t) {
      const Eigen::Index m = 15 + 5 * t, n = 12 + 3 * t;
      Vector d(3);
      d << 20, 10, 5;
      const Matrix x = low_rank(m, n, d, rng) + 0.05 * gaussian(m, n, rng);
      const SvdResult r = robust_svd(x, 3, nullptr, HuberConfig{});

      // descending order and sign convention
      for (int k = 0; k + 1 < 3; ++k) CHECK(r.singular_values()(k) >= r.singular_values()(k + 1));
      for (const auto& c : r.components) {
        Eigen::Index imax = 0;
        c.u.cwiseAbs().maxCoeff(&imax);
        CHECK(c.u(imax) >= 0.0);
      }

      // reconstruction identity
      const double rel = (r.reconstruct() + r.residual - x).norm() / x.norm();
      CHECK(rel < 1e-8);

      // deflation monotonicity
      double prev = x.norm();
      for (Eigen::Index k = 1; k <= 3; ++k) {
        const double now = (x - r.reconstruct(k)).norm();
        CHECK(now <= prev + 1e-9);
        prev = now;
      }
    }
  }

  TEST_CASE("masked cell contents do not matter") {
    std::mt19937_64 rng(24);
    Vector d(2);
    d << 10, 4;
    Matrix x = low_rank(30, 25, d, rng) + 0.05 * gaussian(30, 25, rng);
    MissingMask mask = MissingMask::Constant(30, 25, true);
    mask(3, 4) = mask(10, 20) = mask(29, 0) = false;
    Matrix y = x;
    y(3, 4) = 1e5;
    y(10, 20) = -7;
    y(29, 0) = std::nan("");
    const SvdResult a = robust_svd(x, 2, &mask, HuberConfig{});
    const SvdResult b = robust_svd(y, 2, &mask, HuberConfig{});
    CHECK((a.singular_values() - b.singular_values()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((a.left_vectors() - b.left_vectors()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((a.right_vectors() - b.right_vectors()).cwiseAbs().maxCoeff() <= 1e-12);
  }

  TEST_CASE("rank larger than the smaller dimension is rejected") {
    CHECK_THROWS_AS(robust_svd(Matrix::Ones(3, 4), 4, nullptr, HuberConfig{}), InvalidArgument);
    CHECK_THROWS_AS(classical_svd(Matrix::Ones(3, 4), 4), InvalidArgument);
  }
}

TEST_SUITE("classical_svd") {
  TEST_CASE("identity") {
    const SvdResult r = classical_svd(Matrix::Identity(4, 4), 4);
    for (int k = 0; k < 4; ++k) CHECK(r.singular_values()(k) == doctest::Approx(1.0));
    for (const auto& c : r.components) {
      CHECK(c.converged);
      CHECK(c.iterations == 0);
    }
  }

  TEST_CASE("outer product") {
    std::mt19937_64 rng(31);
    const Vector u = unit(10, rng), v = unit(8, rng);
    const SvdResult r = classical_svd(u * v.transpose(), 2);
    CHECK(r.singular_values()(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(r.singular_values()(1)) < 1e-12);
  }

  TEST_CASE("full-rank reconstruction") {
    std::mt19937_64 rng(32);
    const Matrix x = gaussian(50, 40, rng);
    const SvdResult r = classical_svd(x, 40);
    CHECK((r.reconstruct() - x).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(r.residual.cwiseAbs().maxCoeff() < 1e-10);
  }
}
