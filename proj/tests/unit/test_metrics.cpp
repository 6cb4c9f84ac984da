#include "doctest.h"

#include "jivekit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace jivekit;

namespace {

Matrix random_orthonormal(Eigen::Index n, Eigen::Index r, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix g(n, r);
  for (Eigen::Index j = 0; j < r; ++j)
    for (Eigen::Index i = 0; i < n; ++i) g(i, j) = z(rng);
  return g.householderQr().householderQ() * Matrix::Identity(n, r);
}

// Brute-force projection distance.
double projection_distance(const Matrix& a, const Matrix& b) {
  return (a * a.transpose() - b * b.transpose()).norm() / static_cast<double>(b.cols());
}

// Pairwise Mann-Whitney count.
double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

// Trapezoidal area under the empirical ROC curve.
double trapezoid_auc(const std::vector<double>& s, const std::vector<int>& y) {
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return s[a] > s[b]; });
  const double np = static_cast<double>(std::count(y.begin(), y.end(), 1));
  const double nn = static_cast<double>(y.size()) - np;
  double tp = 0, fp = 0, area = 0;
  for (std::size_t i = 0; i < idx.size();) {
    double dtp = 0, dfp = 0;
    std::size_t j = i;
    while (j < idx.size() && s[idx[j]] == s[idx[i]]) {
      (y[idx[j]] == 1 ? dtp : dfp) += 1;
      ++j;
    }
    area += (dfp / nn) * (tp + dtp / 2) / np;
    tp += dtp;
    fp += dfp;
    i = j;
  }
  return area;
}

}  // namespace

TEST_SUITE("sre") {
  TEST_CASE("identical and permuted bases") {
    std::mt19937_64 rng(1);
    const Matrix u = random_orthonormal(50, 3, rng);
    CHECK(subspace_recovery_error(u, u) < 1e-12);
    Matrix perm(50, 3);
    perm << u.col(2), u.col(0), u.col(1);
    CHECK(subspace_recovery_error(perm, u) < 1e-7);
  }

  TEST_CASE("orthogonal one-dimensional subspaces") {
    Matrix a = Matrix::Zero(5, 1), b = Matrix::Zero(5, 1);
    a(0, 0) = 1;
    b(1, 0) = 1;
    CHECK(subspace_recovery_error(a, b) == doctest::Approx(std::sqrt(2.0)));
    CHECK(projection_distance(a, b) == doctest::Approx(std::sqrt(2.0)));
  }

  TEST_CASE("matches the brute-force projection distance") {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 30; ++t) {
      const Eigen::Index r = 1 + t % 4, rh = 1 + (t / 4) % 5;
      const Matrix u = random_orthonormal(40, r, rng);
      const Matrix uh = random_orthonormal(40, rh, rng);
      CHECK(subspace_recovery_error(uh, u) == doctest::Approx(projection_distance(uh, u)).epsilon(1e-9));
      if (r == rh) {
        CHECK(subspace_recovery_error(uh, u) <= std::sqrt(2.0 * r) / r + 1e-12);
        CHECK(subspace_recovery_error(uh, u) == doctest::Approx(subspace_recovery_error(u, uh)));
      } else {
        // symmetric up to the rank normalization
        CHECK(subspace_recovery_error(uh, u) * r ==
              doctest::Approx(subspace_recovery_error(u, uh) * rh).epsilon(1e-9));
      }
      // basis invariance
      const Matrix q = random_orthonormal(r, r, rng);
      CHECK(subspace_recovery_error(uh, u * q) == doctest::Approx(subspace_recovery_error(uh, u)).epsilon(1e-9));
    }
  }

  TEST_CASE("empty estimate and rank-zero truth") {
    std::mt19937_64 rng(3);
    const Matrix u = random_orthonormal(20, 2, rng);
    CHECK(subspace_recovery_error(Matrix(20, 0), u) == doctest::Approx(std::sqrt(2.0) / 2.0));
    CHECK_THROWS_AS(subspace_recovery_error(u, Matrix(20, 0)), InvalidArgument);
  }
}

TEST_SUITE("logistic") {
  TEST_CASE("null labels give slopes near zero") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> z(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    Matrix x(1000, 2);
    std::vector<int> y(1000);
    for (int i = 0; i < 1000; ++i) {
      x(i, 0) = z(rng);
      x(i, 1) = z(rng);
      y[i] = coin(rng);
    }
    const LogisticFit f = fit_logistic(x, y);
    CHECK(f.converged);
    CHECK(!f.separated);
    CHECK(std::abs(f.coefficients(1)) < 0.1);
    CHECK(std::abs(f.coefficients(2)) < 0.1);
  }

  TEST_CASE("perfect separation is flagged") {
    Matrix x(20, 1);
    std::vector<int> y(20);
    for (int i = 0; i < 20; ++i) {
      x(i, 0) = i;
      y[i] = i >= 10;
    }
    const LogisticFit f = fit_logistic(x, y);
    CHECK(f.separated);
  }

  TEST_CASE("recovers a known slope at large n") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const int n = 100000;
    Matrix x(n, 1);
    std::vector<int> y(n);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = z(rng);
      y[i] = unif(rng) < 1.0 / (1.0 + std::exp(-2.0 * x(i, 0)));
    }
    const LogisticFit f = fit_logistic(x, y);
    CHECK(f.coefficients(1) >= 1.9);
    CHECK(f.coefficients(1) <= 2.1);
  }

  TEST_CASE("input validation") {
    Matrix x = Matrix::Ones(5, 1);
    const std::vector<int> one_class(5, 1);
    CHECK_THROWS_AS(fit_logistic(x, one_class), InvalidArgument);
    const std::vector<int> short_labels{0, 1};
    CHECK_THROWS_AS(fit_logistic(x, short_labels), InvalidArgument);
  }
}

TEST_SUITE("auc") {
  TEST_CASE("hand examples") {
    const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
    const std::vector<int> y{0, 0, 1, 1};
    CHECK(auc(s, y) == doctest::Approx(0.75));
    CHECK(pairwise_auc(s, y) == doctest::Approx(0.75));
    const std::vector<double> perfect{0.1, 0.2, 0.9, 0.95};
    CHECK(auc(perfect, y) == 1.0);
    const std::vector<double> flat(4, 0.3);
    CHECK(auc(flat, y) == 0.5);
  }

  TEST_CASE("single class is rejected") {
    const std::vector<double> s{0.1, 0.2};
    const std::vector<int> y{1, 1};
    CHECK_THROWS_AS(auc(s, y), InvalidArgument);
  }

  TEST_CASE("rank-sum equals the pairwise and trapezoidal forms") {
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<int> coarse(0, 20);
    std::bernoulli_distribution coin(0.4);
    for (int t = 0; t < 40; ++t) {
      const std::size_t n = 5 + static_cast<std::size_t>(t) * 12;
      std::vector<double> s(n);
      std::vector<int> y(n);
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = coarse(rng) / 20.0;  // coarse grid forces ties
        y[i] = coin(rng);
      }
      y[0] = 0;
      y[1] = 1;
      const double a = auc(s, y);
      CHECK(a == doctest::Approx(pairwise_auc(s, y)).epsilon(1e-12));
      CHECK(a == doctest::Approx(trapezoid_auc(s, y)).epsilon(1e-12));
      // strictly increasing transform
      std::vector<double> e(n);
      std::transform(s.begin(), s.end(), e.begin(), [](double v) { return std::exp(3 * v) - 7; });
      CHECK(auc(e, y) == doctest::Approx(a).epsilon(1e-12));
    }
  }
}

TEST_SUITE("rank_recovery") {
  TEST_CASE("signed differences") {
    const RankErrors exact = rank_recovery(2, {18, 10, 10}, 2, {18, 10, 10});
    CHECK(exact.joint == 0);
    CHECK(exact.individual == std::vector<int>{0, 0, 0});
    CHECK(rank_recovery(3, {17, 9, 9}, 2, {20, 12, 12}).joint == 1);
    CHECK(rank_recovery(4, {17, 9, 4}, 3, {20, 12, 7}).joint == 1);
    CHECK(rank_recovery(4, {17, 9, 4}, 3, {20, 12, 7}).individual == std::vector<int>{-3, -3, -3});
  }
}

TEST_SUITE("variance_explained") {
  TEST_CASE("all joint") {
    std::mt19937_64 rng(7);
    MultiBlockDataset data;
    data.blocks = {random_orthonormal(10, 4, rng).transpose(), random_orthonormal(10, 3, rng).transpose()};
    AjiveResult res;
    for (const auto& x : data.blocks) {
      BlockDecomposition d;
      d.joint = x;
      d.individual = Matrix::Zero(x.rows(), x.cols());
      d.noise = Matrix::Zero(x.rows(), x.cols());
      res.per_block.push_back(d);
    }
    const auto vp = variance_explained(res, data);
    CHECK(vp[0].joint == doctest::Approx(1.0));
    CHECK(vp[0].individual == 0.0);
    CHECK(vp[1].residual == 0.0);
  }

  TEST_CASE("orthogonal row spaces sum to one") {
    std::mt19937_64 rng(8);
    const Matrix v = random_orthonormal(30, 5, rng);
    std::normal_distribution<double> z(0.0, 1.0);
    Matrix a(12, 2), b(12, 3);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = z(rng);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = z(rng);
    BlockDecomposition d;
    d.joint = a * v.leftCols(2).transpose();
    d.individual = b * v.rightCols(3).transpose();
    d.noise = Matrix::Zero(12, 30);
    MultiBlockDataset data;
    data.blocks = {d.joint + d.individual, d.joint + d.individual};
    AjiveResult res;
    res.per_block = {d, d};
    const auto vp = variance_explained(res, data);
    CHECK(std::abs(vp[0].joint + vp[0].individual + vp[0].residual - 1.0) < 1e-10);
  }

  TEST_CASE("zero block is rejected") {
    MultiBlockDataset data;
    data.blocks = {Matrix::Zero(3, 4), Matrix::Ones(3, 4)};
    AjiveResult res;
    BlockDecomposition z;
    z.joint = z.individual = z.noise = Matrix::Zero(3, 4);
    res.per_block = {z, z};
    CHECK_THROWS_AS(variance_explained(res, data), InvalidArgument);
  }
}
