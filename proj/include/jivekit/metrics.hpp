#pragma once

#include "jivekit/ajive.hpp"
#include "jivekit/types.hpp"

#include <span>
#include <string>
#include <vector>

namespace jivekit {

struct BlockVariance {
  double joint = 0.0;
  double individual = 0.0;
  double residual = 0.0;
};

// One entry per block: squared Frobenius norm of each component over ||X_k||_F^2.
using VarianceProportions = std::vector<BlockVariance>;

VarianceProportions variance_explained(const AjiveResult& result, const MultiBlockDataset& data);

// (1/r) ||Uhat Uhat^T - U U^T||_F, normalized by the true rank r.
double subspace_recovery_error(const Matrix& estimated_basis, const Matrix& true_basis);

struct LogisticFit {
  Vector coefficients;  // intercept first
  int iterations = 0;
  bool converged = false;
  bool separated = false;
  double log_likelihood = 0.0;

  Vector predict(const Matrix& scores) const;
};

// Maximum-likelihood logistic regression by IRLS with a 1e-8 ridge jitter.
LogisticFit fit_logistic(const Matrix& scores, std::span<const int> labels);

// Mann-Whitney estimate of P(score+ > score-) + P(tie)/2 over all pairs.
double auc(std::span<const double> predictions, std::span<const int> labels);

struct RankErrors {
  int joint = 0;
  std::vector<int> individual;
};

RankErrors rank_recovery(int estimated_joint, const std::vector<int>& estimated_individual,
                         int true_joint, const std::vector<int>& true_individual);

}  // namespace jivekit
