#pragma once

// Classical and Huber-robust truncated singular value decompositions.
//
// The robust variant fits one rank-one term at a time by alternating
// per-coordinate weighted regressions (x_ij ~ a_i b_j) and deflates the
// residual before extracting the next term. Missing cells get zero weight.

#include "jivekit/types.hpp"

#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace jivekit {

struct HuberConfig {
  double c = 1.345;
  int max_iter = 100;
  double tol = 1e-6;
  // Relative floor: the absolute MAD floor is scale_floor * ||X||_F / sqrt(m n).
  double scale_floor = 1e-8;
  // Passes that refit each component against the data minus all other
  // components, after the initial deflation.
  int backfit_sweeps = 1;

  void validate() const;
};

struct RankOneFit {
  double delta = 0.0;
  Vector u;
  Vector v;
  int iterations = 0;
  bool converged = false;
};

struct SvdResult {
  // Sorted by descending delta. For the robust backend these are the singular
  // triples of the fitted low-rank matrix; iterations and converged report the
  // k-th deflation fit.
  std::vector<RankOneFit> components;
  // Input minus the fitted terms. Masked-out cells hold zero.
  Matrix residual;

  Eigen::Index rank() const { return static_cast<Eigen::Index>(components.size()); }
  Vector singular_values() const;
  Matrix left_vectors() const;   // m x rank
  Matrix right_vectors() const;  // n x rank
  // Sum of the first `terms` components (all when terms < 0).
  Matrix reconstruct(Eigen::Index terms = -1) const;
};

// Huber loss: x^2 inside [-c, c], 2c|x| - c^2 outside.
double huber_rho(double x, double c);

// IRLS weight psi(x)/x for x = residual / scale.
double huber_weight(double residual, double scale, double c);

// 1.4826 * MAD of the values, clamped below by scale_floor.
double mad_scale(std::span<const double> residuals, double scale_floor);
double mad_scale(const Matrix& residuals, const MissingMask* mask, double scale_floor);

using VectorPair = std::pair<Vector, Vector>;

RankOneFit robust_rank_one(const Matrix& x, const MissingMask* mask, const HuberConfig& cfg,
                           const std::optional<VectorPair>& init = std::nullopt);

SvdResult robust_svd(const Matrix& x, Eigen::Index rank, const MissingMask* mask,
                     const HuberConfig& cfg);

SvdResult classical_svd(const Matrix& x, Eigen::Index rank);

// Flips (u, v) so the largest-magnitude entry of u is nonnegative.
void canonicalize_sign(Vector& u, Vector& v);

}  // namespace jivekit
