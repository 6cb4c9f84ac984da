#pragma once

// Angle-based joint and individual variation decomposition.
//
//   Phase 1  per-block rank-r_k SVD through the configured backend
//   Phase 2  SVD of the stacked row bases; directions shared by every
//            block have squared singular value near K
//   Phase 3  projection onto the joint basis, then a truncated SVD of the
//            joint-free remainder gives the individual part
//
// backend = classical reproduces standard aJIVE; backend = robust swaps in
// the Huber SVD at every step.

#include "jivekit/robust_svd.hpp"
#include "jivekit/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace jivekit {

struct MultiBlockDataset {
  std::vector<Matrix> blocks;                      // p_k x n
  std::vector<std::optional<MissingMask>> masks;   // empty or one per block
  std::vector<std::string> block_names;            // empty or one per block

  std::size_t num_blocks() const { return blocks.size(); }
  Eigen::Index num_subjects() const { return blocks.empty() ? 0 : blocks.front().cols(); }
  const MissingMask* mask(std::size_t k) const;
  std::string name(std::size_t k) const;

  void validate() const;
};

enum class Backend { classical, robust };

std::string to_string(Backend b);
Backend backend_from_string(const std::string& s);

struct SegmentationConfig {
  int n_resamples = 100;
  double quantile = 0.95;
  std::uint64_t seed = 20211;

  void validate() const;
};

struct AjiveConfig {
  std::vector<int> initial_ranks;
  Backend backend = Backend::classical;
  HuberConfig huber;
  std::optional<int> joint_rank_override;
  SegmentationConfig segmentation;

  void validate(const MultiBlockDataset& data) const;
};

struct BlockDecomposition {
  Matrix joint;
  Matrix individual;
  Matrix noise;
  int individual_rank = 0;
  // Singular values of the joint-free remainder (up to the cap) and the
  // noise threshold they were compared against.
  std::vector<double> remainder_singular_values;
  double individual_threshold = 0.0;
  double noise_scale = 0.0;
};

struct SegmentationDiagnostics {
  // Alignment statistic per candidate direction, descending. Equals the
  // squared singular value of M for the classical backend.
  std::vector<double> squared_singular_values;
  double threshold = 0.0;
  double null_quantile = 0.0;
  double floor = 0.0;
  std::vector<std::string> warnings;
};

struct AjiveResult {
  int joint_rank = 0;
  Matrix joint_basis;   // n x r, orthonormal columns
  Matrix joint_scores;  // n x r, sqrt(n) * joint_basis
  std::vector<BlockDecomposition> per_block;
  SegmentationDiagnostics segmentation;
};

// Phase 1 output for one block.
struct SignalSpace {
  Matrix u;        // p_k x r_k
  Vector sigma;    // r_k
  Matrix v;        // n x r_k, orthonormal columns
  Matrix completed;  // block with masked cells filled from the rank-r_k fit
  double noise_scale = 0.0;  // MAD of the observed rank-r_k residual
};

std::vector<SignalSpace> initial_extraction(const MultiBlockDataset& data, const AjiveConfig& cfg);

// (sum r_k) x n matrix of the stacked transposed row bases.
Matrix stack_scores(const std::vector<SignalSpace>& spaces);
Matrix stack_scores(const std::vector<Matrix>& row_bases);

struct Segmentation {
  int joint_rank = 0;
  Matrix joint_basis;
  SegmentationDiagnostics diagnostics;
};

Segmentation segment_score_space(const Matrix& m, const AjiveConfig& cfg,
                                 const std::vector<int>& block_dims);

std::vector<BlockDecomposition> final_decomposition(const MultiBlockDataset& data,
                                                    const std::vector<SignalSpace>& spaces,
                                                    const Matrix& joint_basis,
                                                    const AjiveConfig& cfg);

AjiveResult decompose(const MultiBlockDataset& data, const AjiveConfig& cfg);

// Resampling nulls, memoized per shape. Pure functions of their arguments.

// Quantile of the largest squared singular value of K stacked independent
// uniformly random orthonormal row bases of the given dimensions in R^n.
double random_direction_quantile(Eigen::Index n, const std::vector<int>& dims,
                                 const SegmentationConfig& cfg);

// Quantile of the largest singular value of a p x n matrix of iid N(0, 1).
double noise_singular_value_quantile(Eigen::Index p, Eigen::Index n,
                                     const SegmentationConfig& cfg);

// Orthonormalizes columns in order, keeping each column's orientation.
Matrix orthonormalize_columns(const Matrix& x);

}  // namespace jivekit
