#include "jivekit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace jivekit {

VarianceProportions variance_explained(const AjiveResult& result, const MultiBlockDataset& data) {
  if (result.per_block.size() != data.num_blocks()) {
    throw InvalidArgument("variance_explained: result and dataset block counts differ");
  }
  VarianceProportions out;
  out.reserve(data.num_blocks());
  for (std::size_t k = 0; k < data.num_blocks(); ++k) {
    const auto& d = result.per_block[k];
    // The decomposition is additive on the completed block.
    const double total = (d.joint + d.individual + d.noise).squaredNorm();
    if (!(total > 0.0)) throw InvalidArgument("variance_explained: " + data.name(k) + " has zero norm");
    out.push_back({d.joint.squaredNorm() / total, d.individual.squaredNorm() / total,
                   d.noise.squaredNorm() / total});
  }
  return out;
}

double subspace_recovery_error(const Matrix& estimated_basis, const Matrix& true_basis) {
  const Eigen::Index r = true_basis.cols();
  if (r == 0) throw InvalidArgument("subspace_recovery_error: true basis has rank 0");
  if (estimated_basis.cols() > 0 && estimated_basis.rows() != true_basis.rows()) {
    throw InvalidArgument("subspace_recovery_error: bases live in different dimensions");
  }
  // ||P - Q||_F^2 = rank(P) + rank(Q) - 2 ||Uhat^T U||_F^2 for orthonormal bases.
  const double cross =
      estimated_basis.cols() > 0 ? (estimated_basis.transpose() * true_basis).squaredNorm() : 0.0;
  const double sq = static_cast<double>(estimated_basis.cols() + r) - 2.0 * cross;
  return std::sqrt(std::max(sq, 0.0)) / static_cast<double>(r);
}

// ---------------------------------------------------------------------------
// Logistic regression
// ---------------------------------------------------------------------------

namespace {

double log1pexp(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

Matrix with_intercept(const Matrix& scores) {
  Matrix design(scores.rows(), scores.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(scores.cols()) = scores;
  return design;
}

double log_likelihood(const Matrix& design, const Vector& beta, std::span<const int> y) {
  const Vector eta = design * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    ll += y[static_cast<std::size_t>(i)] * eta(i) - log1pexp(eta(i));
  }
  return ll;
}

void check_labels(std::span<const int> labels, Eigen::Index n, const char* who) {
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw InvalidArgument(std::string(who) + ": label count does not match");
  }
  bool pos = false, neg = false;
  for (int y : labels) {
    if (y != 0 && y != 1) throw InvalidArgument(std::string(who) + ": labels must be 0 or 1");
    pos = pos || y == 1;
    neg = neg || y == 0;
  }
  if (!pos || !neg) throw InvalidArgument(std::string(who) + ": both classes must be present");
}

}  // namespace

Vector LogisticFit::predict(const Matrix& scores) const {
  const Vector eta = with_intercept(scores) * coefficients;
  return eta.unaryExpr([](double t) { return sigmoid(t); });
}

LogisticFit fit_logistic(const Matrix& scores, std::span<const int> labels) {
  const Eigen::Index n = scores.rows(), q = scores.cols() + 1;
  check_labels(labels, n, "fit_logistic");
  if (n <= q) throw InvalidArgument("fit_logistic: need more subjects than coefficients");

  const Matrix design = with_intercept(scores);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = labels[static_cast<std::size_t>(i)];

  LogisticFit fit;
  fit.coefficients = Vector::Zero(q);
  double ll = log_likelihood(design, fit.coefficients, labels);
  constexpr int kMaxIter = 50;
  constexpr double kSeparationNorm = 1e3;
  for (int it = 1; it <= kMaxIter; ++it) {
    const Vector eta = design * fit.coefficients;
    Vector p(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p(i) = sigmoid(eta(i));
      w(i) = std::max(p(i) * (1.0 - p(i)), 1e-12);
    }
    Matrix h = design.transpose() * w.asDiagonal() * design;
    h.diagonal().array() += 1e-8;
    const Vector g = design.transpose() * (y - p);
    Vector next = fit.coefficients + h.ldlt().solve(g);

    // Step halving keeps the likelihood monotone on near-separable data.
    double next_ll = log_likelihood(design, next, labels);
    for (int half = 0; half < 30 && next_ll < ll; ++half) {
      next = 0.5 * (next + fit.coefficients);
      next_ll = log_likelihood(design, next, labels);
    }
    fit.coefficients = next;
    fit.iterations = it;
    const double rel = std::abs(next_ll - ll) / std::max(std::abs(ll), 1e-300);
    ll = next_ll;
    if (fit.coefficients.norm() > kSeparationNorm) {
      fit.separated = true;
      break;
    }
    if (rel < 1e-8) {
      fit.converged = true;
      break;
    }
  }
  fit.log_likelihood = ll;
  if (!fit.separated) {
    // Complete separation also shows up as a vanishing deviance.
    fit.separated = -ll < 1e-6 * static_cast<double>(n);
  }
  return fit;
}

// ---------------------------------------------------------------------------
// AUC
// ---------------------------------------------------------------------------

double auc(std::span<const double> predictions, std::span<const int> labels) {
  check_labels(labels, static_cast<Eigen::Index>(predictions.size()), "auc");
  // Rank-sum form of the pairwise count; ties share midranks.
  const std::size_t n = predictions.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return predictions[a] < predictions[b]; });
  double rank_sum = 0.0;
  std::size_t npos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && predictions[order[j + 1]] == predictions[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) {
        rank_sum += mid;
        ++npos;
      }
    }
    i = j + 1;
  }
  const auto np = static_cast<double>(npos);
  const auto nn = static_cast<double>(n - npos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

RankErrors rank_recovery(int estimated_joint, const std::vector<int>& estimated_individual,
                         int true_joint, const std::vector<int>& true_individual) {
  RankErrors e;
  e.joint = estimated_joint - true_joint;
  const std::size_t k = std::min(estimated_individual.size(), true_individual.size());
  for (std::size_t i = 0; i < k; ++i) e.individual.push_back(estimated_individual[i] - true_individual[i]);
  return e;
}

}  // namespace jivekit
