#include "jivekit/ajive.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <tuple>

namespace jivekit {

// ---------------------------------------------------------------------------
// Dataset and config validation
// ---------------------------------------------------------------------------

const MissingMask* MultiBlockDataset::mask(std::size_t k) const {
  if (k >= masks.size() || !masks[k]) return nullptr;
  return &*masks[k];
}

std::string MultiBlockDataset::name(std::size_t k) const {
  if (k < block_names.size() && !block_names[k].empty()) return block_names[k];
  return "block" + std::to_string(k + 1);
}

void MultiBlockDataset::validate() const {
  if (blocks.size() < 2) throw InvalidArgument("dataset needs at least 2 blocks");
  if (!masks.empty() && masks.size() != blocks.size()) {
    throw InvalidArgument("dataset has " + std::to_string(masks.size()) + " masks for " +
                          std::to_string(blocks.size()) + " blocks");
  }
  if (!block_names.empty() && block_names.size() != blocks.size()) {
    throw InvalidArgument("dataset block_names length does not match block count");
  }
  const Eigen::Index n = blocks.front().cols();
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const Matrix& x = blocks[k];
    if (x.rows() < 1 || x.cols() < 1) throw InvalidArgument(name(k) + " is empty");
    if (x.cols() != n) {
      throw InvalidArgument(name(k) + " has " + std::to_string(x.cols()) +
                            " subjects, expected " + std::to_string(n));
    }
    const MissingMask* m = mask(k);
    if (m != nullptr) validate_mask(*m, x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        if ((m == nullptr || (*m)(i, j)) && !std::isfinite(x(i, j))) {
          throw InvalidArgument(name(k) + " has a non-finite observed value at (" +
                                std::to_string(i) + ", " + std::to_string(j) + ")");
        }
      }
    }
  }
}

std::string to_string(Backend b) { return b == Backend::classical ? "classical" : "robust"; }

Backend backend_from_string(const std::string& s) {
  if (s == "classical") return Backend::classical;
  if (s == "robust") return Backend::robust;
  throw InvalidArgument("unknown backend '" + s + "' (expected classical or robust)");
}

void SegmentationConfig::validate() const {
  if (n_resamples < 10) throw InvalidArgument("segmentation n_resamples must be at least 10");
  if (!(quantile > 0.0 && quantile < 1.0)) {
    throw InvalidArgument("segmentation quantile must lie in (0, 1)");
  }
}

void AjiveConfig::validate(const MultiBlockDataset& data) const {
  data.validate();
  huber.validate();
  segmentation.validate();
  if (initial_ranks.size() != data.num_blocks()) {
    throw InvalidArgument("initial_ranks has " + std::to_string(initial_ranks.size()) +
                          " entries for " + std::to_string(data.num_blocks()) + " blocks");
  }
  const Eigen::Index n = data.num_subjects();
  for (std::size_t k = 0; k < initial_ranks.size(); ++k) {
    const int r = initial_ranks[k];
    const Eigen::Index lim = std::min(data.blocks[k].rows(), n);
    if (r < 1 || r > lim) {
      throw InvalidArgument("initial rank " + std::to_string(r) + " for " + data.name(k) +
                            " must lie in [1, " + std::to_string(lim) + "]");
    }
  }
  const int total = std::accumulate(initial_ranks.begin(), initial_ranks.end(), 0);
  const int largest = *std::max_element(initial_ranks.begin(), initial_ranks.end());
  if (total <= largest) throw InvalidArgument("initial ranks leave no identifiable joint space");
  if (joint_rank_override && *joint_rank_override < 0) {
    throw InvalidArgument("joint_rank_override must be nonnegative");
  }
}

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

Matrix orthonormalize_columns(const Matrix& x) {
  if (x.cols() == 0) return Matrix(x.rows(), 0);
  Eigen::HouseholderQR<Matrix> qr(x);
  Matrix q = qr.householderQ() * Matrix::Identity(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (q.col(j).dot(x.col(j)) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

namespace {

SvdResult backend_svd(const Matrix& x, Eigen::Index rank, const MissingMask* mask,
                      const AjiveConfig& cfg) {
  if (cfg.backend == Backend::robust) return robust_svd(x, rank, mask, cfg.huber);
  return classical_svd(zero_fill(x, mask), rank);
}

// R's default (type 7) sample quantile.
double sample_quantile(std::vector<double> xs, double q) {
  std::sort(xs.begin(), xs.end());
  const double h = (static_cast<double>(xs.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix g(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) g(i, j) = z(rng);
  return g;
}

double largest_eigenvalue(const Matrix& gram) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  return std::max(es.eigenvalues().maxCoeff(), 0.0);
}

template <class Key>
class NullCache {
 public:
  template <class F>
  double get(const Key& key, F&& compute) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = values_.find(key);
      if (it != values_.end()) return it->second;
    }
    const double v = compute();
    std::lock_guard<std::mutex> lock(mu_);
    return values_.emplace(key, v).first->second;
  }

 private:
  std::mutex mu_;
  std::map<Key, double> values_;
};

using SegKey = std::tuple<Eigen::Index, std::vector<int>, int, double, std::uint64_t>;
using NoiseKey = std::tuple<Eigen::Index, Eigen::Index, int, double, std::uint64_t>;

NullCache<SegKey>& segmentation_cache() {
  static NullCache<SegKey> cache;
  return cache;
}

NullCache<NoiseKey>& noise_cache() {
  static NullCache<NoiseKey> cache;
  return cache;
}

}  // namespace

double random_direction_quantile(Eigen::Index n, const std::vector<int>& dims,
                                 const SegmentationConfig& cfg) {
  const SegKey key{n, dims, cfg.n_resamples, cfg.quantile, cfg.seed};
  return segmentation_cache().get(key, [&] {
    std::mt19937_64 rng(cfg.seed);
    const int total = std::accumulate(dims.begin(), dims.end(), 0);
    std::vector<double> samples;
    samples.reserve(static_cast<std::size_t>(cfg.n_resamples));
    for (int s = 0; s < cfg.n_resamples; ++s) {
      Matrix m(total, n);
      Eigen::Index row = 0;
      for (int d : dims) {
        if (d == 0) continue;
        m.middleRows(row, d) = orthonormalize_columns(gaussian_matrix(n, d, rng)).transpose();
        row += d;
      }
      samples.push_back(largest_eigenvalue(m * m.transpose()));
    }
    return sample_quantile(std::move(samples), cfg.quantile);
  });
}

double noise_singular_value_quantile(Eigen::Index p, Eigen::Index n,
                                     const SegmentationConfig& cfg) {
  const NoiseKey key{p, n, cfg.n_resamples, cfg.quantile, cfg.seed};
  return noise_cache().get(key, [&] {
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<double> samples;
    samples.reserve(static_cast<std::size_t>(cfg.n_resamples));
    for (int s = 0; s < cfg.n_resamples; ++s) {
      const Matrix g = gaussian_matrix(p, n, rng);
      const Matrix gram = p >= n ? Matrix(g.transpose() * g) : Matrix(g * g.transpose());
      samples.push_back(std::sqrt(largest_eigenvalue(gram)));
    }
    return sample_quantile(std::move(samples), cfg.quantile);
  });
}

// ---------------------------------------------------------------------------
// Phase 1: initial signal space extraction
// ---------------------------------------------------------------------------

std::vector<SignalSpace> initial_extraction(const MultiBlockDataset& data, const AjiveConfig& cfg) {
  std::vector<SignalSpace> spaces;
  spaces.reserve(data.num_blocks());
  for (std::size_t k = 0; k < data.num_blocks(); ++k) {
    const Matrix& x = data.blocks[k];
    const MissingMask* mask = data.mask(k);
    try {
      const SvdResult svd = backend_svd(x, cfg.initial_ranks[k], mask, cfg);
      SignalSpace s;
      s.u = svd.left_vectors();
      s.sigma = svd.singular_values();
      s.v = orthonormalize_columns(svd.right_vectors());
      const Matrix fit = svd.reconstruct();
      s.completed = mask ? Matrix(mask->select(x, fit)) : x;
      const double rms = x.size() > 0 ? zero_fill(x, mask).norm() / std::sqrt(double(x.size())) : 0.0;
      s.noise_scale = mad_scale(svd.residual, mask, std::max(cfg.huber.scale_floor * rms, 1e-300));
      spaces.push_back(std::move(s));
    } catch (const InvalidArgument&) {
      throw;
    } catch (const std::exception& e) {
      throw PhaseError("phase 1", static_cast<int>(k), e.what());
    }
  }
  return spaces;
}

// ---------------------------------------------------------------------------
// Phase 2: score space segmentation
// ---------------------------------------------------------------------------

Matrix stack_scores(const std::vector<Matrix>& row_bases) {
  if (row_bases.empty()) throw InvalidArgument("stack_scores: no row bases");
  const Eigen::Index n = row_bases.front().rows();
  Eigen::Index total = 0;
  for (std::size_t k = 0; k < row_bases.size(); ++k) {
    if (row_bases[k].rows() != n) {
      throw InvalidArgument("stack_scores: row basis " + std::to_string(k) + " has " +
                            std::to_string(row_bases[k].rows()) + " rows, expected " +
                            std::to_string(n));
    }
    total += row_bases[k].cols();
  }
  Matrix m(total, n);
  Eigen::Index row = 0;
  for (const Matrix& v : row_bases) {
    m.middleRows(row, v.cols()) = v.transpose();
    row += v.cols();
  }
  return m;
}

Matrix stack_scores(const std::vector<SignalSpace>& spaces) {
  std::vector<Matrix> bases;
  bases.reserve(spaces.size());
  for (const auto& s : spaces) bases.push_back(s.v);
  return stack_scores(bases);
}

Segmentation segment_score_space(const Matrix& m, const AjiveConfig& cfg,
                                 const std::vector<int>& block_dims) {
  if (m.rows() == 0 || m.cols() == 0) throw InvalidArgument("segment_score_space: empty M");
  if (block_dims.empty()) throw InvalidArgument("segment_score_space: no block dimensions");
  const Eigen::Index n = m.cols();
  const auto num_blocks = static_cast<double>(block_dims.size());
  const int max_joint = *std::min_element(block_dims.begin(), block_dims.end());

  const SvdResult svd = backend_svd(m, max_joint, nullptr, cfg);
  const Matrix dirs = orthonormalize_columns(svd.right_vectors());

  // ||M v||^2 sums the squared cosines between v and each block's row
  // basis, so it lies in [0, K].
  std::vector<std::pair<double, Eigen::Index>> stat;
  stat.reserve(static_cast<std::size_t>(dirs.cols()));
  for (Eigen::Index j = 0; j < dirs.cols(); ++j) {
    stat.emplace_back((m * dirs.col(j)).squaredNorm(), j);
  }
  std::stable_sort(stat.begin(), stat.end(),
                   [](const auto& l, const auto& r) { return l.first > r.first; });

  Segmentation seg;
  auto& diag = seg.diagnostics;
  diag.null_quantile = random_direction_quantile(n, block_dims, cfg.segmentation);
  diag.floor = 1.0 + (num_blocks - 1.0) / 2.0;
  diag.threshold = std::max(diag.null_quantile, diag.floor);
  for (const auto& s : stat) diag.squared_singular_values.push_back(s.first);

  int rank = 0;
  if (cfg.joint_rank_override) {
    rank = *cfg.joint_rank_override;
  } else {
    while (rank < static_cast<int>(stat.size()) &&
           stat[static_cast<std::size_t>(rank)].first > diag.threshold) {
      ++rank;
    }
  }
  if (rank > max_joint) {
    diag.warnings.push_back("joint rank " + std::to_string(rank) + " clamped to " +
                            std::to_string(max_joint));
    rank = max_joint;
  }

  seg.joint_rank = rank;
  seg.joint_basis.resize(n, rank);
  for (int j = 0; j < rank; ++j) {
    seg.joint_basis.col(j) = dirs.col(stat[static_cast<std::size_t>(j)].second);
  }
  // Sign: largest-magnitude entry of each joint direction nonnegative.
  for (int j = 0; j < rank; ++j) {
    Vector v = seg.joint_basis.col(j), dummy(0);
    canonicalize_sign(v, dummy);
    seg.joint_basis.col(j) = v;
  }
  return seg;
}

// ---------------------------------------------------------------------------
// Phase 3: final decomposition
// ---------------------------------------------------------------------------

std::vector<BlockDecomposition> final_decomposition(const MultiBlockDataset& data,
                                                    const std::vector<SignalSpace>& spaces,
                                                    const Matrix& joint_basis,
                                                    const AjiveConfig& cfg) {
  const Eigen::Index n = data.num_subjects();
  if (joint_basis.rows() != n) {
    throw InvalidArgument("final_decomposition: joint basis has wrong row count");
  }
  const auto joint_rank = static_cast<int>(joint_basis.cols());
  std::vector<BlockDecomposition> out;
  out.reserve(data.num_blocks());
  for (std::size_t k = 0; k < data.num_blocks(); ++k) {
    const Matrix& x = spaces[k].completed;
    const MissingMask* mask = data.mask(k);
    try {
      BlockDecomposition d;
      d.joint = (x * joint_basis) * joint_basis.transpose();
      const Matrix remainder = x - d.joint;

      const Eigen::Index room = std::min<Eigen::Index>(x.rows(), n - joint_rank);
      const Eigen::Index cap =
          std::clamp<Eigen::Index>(cfg.initial_ranks[k] - joint_rank, 0, std::max<Eigen::Index>(room, 0));
      d.noise_scale = spaces[k].noise_scale;
      d.individual_threshold =
          noise_singular_value_quantile(x.rows(), n, cfg.segmentation) * d.noise_scale;
      if (cap > 0) {
        const SvdResult svd = backend_svd(remainder, cap, mask, cfg);
        for (const auto& c : svd.components) d.remainder_singular_values.push_back(c.delta);
        int rank = 0;
        while (rank < cap && svd.components[static_cast<std::size_t>(rank)].delta >
                                 d.individual_threshold) {
          ++rank;
        }
        d.individual_rank = rank;
        // The robust fit of the remainder can drift back into the joint row
        // space; keep the individual part orthogonal to it.
        d.individual = svd.reconstruct(rank);
        d.individual -= (d.individual * joint_basis) * joint_basis.transpose();
      } else {
        d.individual = Matrix::Zero(x.rows(), n);
      }
      d.noise = x - d.joint - d.individual;
      out.push_back(std::move(d));
    } catch (const InvalidArgument&) {
      throw;
    } catch (const std::exception& e) {
      throw PhaseError("phase 3", static_cast<int>(k), e.what());
    }
  }
  return out;
}

AjiveResult decompose(const MultiBlockDataset& data, const AjiveConfig& cfg) {
  cfg.validate(data);

  const std::vector<SignalSpace> spaces = initial_extraction(data, cfg);

  Segmentation seg;
  try {
    seg = segment_score_space(stack_scores(spaces), cfg, cfg.initial_ranks);
  } catch (const InvalidArgument&) {
    throw;
  } catch (const std::exception& e) {
    throw PhaseError("phase 2", -1, e.what());
  }

  AjiveResult res;
  res.joint_rank = seg.joint_rank;
  res.joint_basis = std::move(seg.joint_basis);
  res.joint_scores = std::sqrt(static_cast<double>(data.num_subjects())) * res.joint_basis;
  res.segmentation = std::move(seg.diagnostics);
  res.per_block = final_decomposition(data, spaces, res.joint_basis, cfg);
  return res;
}

}  // namespace jivekit
