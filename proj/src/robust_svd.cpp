#include "jivekit/robust_svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace jivekit {

void validate_mask(const MissingMask& mask, Eigen::Index rows, Eigen::Index cols) {
  if (mask.rows() != rows || mask.cols() != cols) {
    throw InvalidArgument("missing mask is " + std::to_string(mask.rows()) + "x" +
                          std::to_string(mask.cols()) + " but matrix is " +
                          std::to_string(rows) + "x" + std::to_string(cols));
  }
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (mask.row(i).count() < 2) {
      throw InvalidArgument("row " + std::to_string(i) + " has fewer than 2 observed cells");
    }
  }
  for (Eigen::Index j = 0; j < cols; ++j) {
    if (mask.col(j).count() < 2) {
      throw InvalidArgument("column " + std::to_string(j) + " has fewer than 2 observed cells");
    }
  }
}

Matrix zero_fill(const Matrix& x, const MissingMask* mask) {
  if (mask == nullptr) return x;
  return mask->select(x, Matrix::Zero(x.rows(), x.cols()));
}

void HuberConfig::validate() const {
  if (!(c > 0.0) || !std::isfinite(c)) throw InvalidArgument("huber c must be positive");
  if (max_iter < 1) throw InvalidArgument("huber max_iter must be positive");
  if (!(tol > 0.0)) throw InvalidArgument("huber tol must be positive");
  if (!(scale_floor > 0.0)) throw InvalidArgument("huber scale_floor must be positive");
  if (backfit_sweeps < 0) throw InvalidArgument("huber backfit_sweeps must be nonnegative");
}

double huber_rho(double x, double c) {
  if (!std::isfinite(x)) throw InvalidArgument("huber_rho: non-finite argument");
  if (!(c > 0.0)) throw InvalidArgument("huber_rho: c must be positive");
  const double ax = std::abs(x);
  return ax <= c ? x * x : 2.0 * c * ax - c * c;
}

namespace {

inline double weight_unchecked(double residual, double scale, double c) {
  const double ax = std::abs(residual) / scale;
  return ax <= c ? 1.0 : c / ax;
}

// Median of a scratch buffer (reordered in place).
double median_inplace(std::vector<double>& buf) {
  const auto n = buf.size();
  const auto mid = buf.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(buf.begin(), mid, buf.end());
  double hi = *mid;
  if (n % 2 == 1) return hi;
  double lo = *std::max_element(buf.begin(), mid);
  return 0.5 * (lo + hi);
}

double mad_of_buffer(std::vector<double>& buf, double scale_floor) {
  const double med = median_inplace(buf);
  for (double& r : buf) r = std::abs(r - med);
  const double mad = 1.4826 * median_inplace(buf);
  return std::max(mad, scale_floor);
}

Vector normalized(const Vector& x) {
  const double n = x.norm();
  return n > 0.0 ? Vector(x / n) : x;
}

}  // namespace

double huber_weight(double residual, double scale, double c) {
  if (!(scale > 0.0)) throw InvalidArgument("huber_weight: scale must be positive");
  if (!(c > 0.0)) throw InvalidArgument("huber_weight: c must be positive");
  if (residual == 0.0) return 1.0;
  return weight_unchecked(residual, scale, c);
}

double mad_scale(std::span<const double> residuals, double scale_floor) {
  if (residuals.empty()) throw InvalidArgument("mad_scale: no observed residuals");
  if (!(scale_floor > 0.0)) throw InvalidArgument("mad_scale: scale_floor must be positive");
  std::vector<double> buf(residuals.begin(), residuals.end());
  return mad_of_buffer(buf, scale_floor);
}

double mad_scale(const Matrix& residuals, const MissingMask* mask, double scale_floor) {
  std::vector<double> buf;
  buf.reserve(static_cast<std::size_t>(residuals.size()));
  for (Eigen::Index j = 0; j < residuals.cols(); ++j) {
    for (Eigen::Index i = 0; i < residuals.rows(); ++i) {
      if (mask == nullptr || (*mask)(i, j)) buf.push_back(residuals(i, j));
    }
  }
  return mad_scale(buf, scale_floor);
}

void canonicalize_sign(Vector& u, Vector& v) {
  if (u.size() == 0) return;
  Eigen::Index imax = 0;
  u.cwiseAbs().maxCoeff(&imax);
  if (u(imax) < 0.0) {
    u = -u;
    v = -v;
  }
}

// ---------------------------------------------------------------------------
// Rank-one Huber fit by alternating weighted regressions
// ---------------------------------------------------------------------------

namespace {

enum class SweepStatus { ok, degenerate };

struct RankOneState {
  Vector a;
  Vector b;
};

class RankOneSolver {
 public:
  RankOneSolver(const Matrix& x, const MissingMask* mask, const HuberConfig& cfg)
      : x_(zero_fill(x, mask)), cfg_(cfg) {
    const Eigen::Index m = x.rows(), n = x.cols();
    if (mask != nullptr) {
      observed_ = mask->cast<double>();
      count_ = static_cast<std::size_t>(mask->count());
    } else {
      count_ = static_cast<std::size_t>(m * n);
    }
    observed_norm_ = x_.norm();
    floor_ = cfg.scale_floor * observed_norm_ / std::sqrt(static_cast<double>(m * n));
    if (!(floor_ > 0.0)) floor_ = cfg.scale_floor;
    buf_.reserve(count_);
  }

  double observed_norm() const { return observed_norm_; }

  // One alternating sweep: b given a, then a given the new b. The scale is
  // the MAD of the residuals at the start of the sweep.
  SweepStatus sweep(const RankOneState& cur, RankOneState& next) {
    resid_.noalias() = x_ - cur.a * cur.b.transpose();
    const double scale = residual_scale();

    weights(scale);
    const Vector a2 = cur.a.cwiseProduct(cur.a);
    const Vector den_b = w_.transpose() * a2;
    const Vector num_b = (w_.array() * x_.array()).matrix().transpose() * cur.a;
    if (!(den_b.array() > 0.0).all()) return SweepStatus::degenerate;
    next.b = num_b.cwiseQuotient(den_b);

    resid_.noalias() = x_ - cur.a * next.b.transpose();
    weights(scale);
    const Vector b2 = next.b.cwiseProduct(next.b);
    const Vector den_a = w_ * b2;
    const Vector num_a = (w_.array() * x_.array()).matrix() * next.b;
    if (!(den_a.array() > 0.0).all()) return SweepStatus::degenerate;
    next.a = num_a.cwiseQuotient(den_a);
    return SweepStatus::ok;
  }

  double floor() const { return floor_; }

 private:
  double residual_scale() {
    if (observed_.size() == 0) {
      buf_.assign(resid_.data(), resid_.data() + resid_.size());
    } else {
      buf_.clear();
      const double* r = resid_.data();
      const double* o = observed_.data();
      for (Eigen::Index k = 0; k < resid_.size(); ++k) {
        if (o[k] != 0.0) buf_.push_back(r[k]);
      }
    }
    return mad_of_buffer(buf_, floor_);
  }

  // Huber weights psi(r)/r of the current residuals; zero on masked cells.
  void weights(double scale) {
    const double cs = cfg_.c * scale;
    w_ = (cs / resid_.array().abs()).min(1.0).matrix();
    if (observed_.size() != 0) w_.array() *= observed_.array();
  }

  Matrix x_;  // masked cells zeroed
  Matrix observed_;  // 1 observed, 0 masked; empty when fully observed
  const HuberConfig& cfg_;
  std::size_t count_ = 0;
  double observed_norm_ = 0.0;
  double floor_ = 0.0;
  std::vector<double> buf_;
  Matrix resid_;
  Matrix w_;
};

// ||a b^T - a' b'^T||_F without forming either outer product.
double outer_distance(const RankOneState& p, const RankOneState& q) {
  const double np2 = p.a.squaredNorm() * p.b.squaredNorm();
  const double nq2 = q.a.squaredNorm() * q.b.squaredNorm();
  const double cross = p.a.dot(q.a) * p.b.dot(q.b);
  return std::sqrt(std::max(np2 + nq2 - 2.0 * cross, 0.0));
}

// Classical leading pair of the residual after winsorizing observed cells at
// median +/- kWinsorize robust SDs, so that a single extreme cell cannot
// capture the starting direction. Falls back to the raw residual when the
// MAD is degenerate (e.g. exactly sparse input).
constexpr double kWinsorize = 3.0;

RankOneState classical_start(const Matrix& x, const MissingMask* mask, double scale_floor) {
  Matrix filled = zero_fill(x, mask);
  std::vector<double> vals;
  vals.reserve(static_cast<std::size_t>(filled.size()));
  for (Eigen::Index j = 0; j < filled.cols(); ++j) {
    for (Eigen::Index i = 0; i < filled.rows(); ++i) {
      if (mask == nullptr || (*mask)(i, j)) vals.push_back(filled(i, j));
    }
  }
  const double med = median_inplace(vals);
  for (double& v : vals) v = std::abs(v - med);
  const double sd = 1.4826 * median_inplace(vals);
  if (sd > scale_floor) {
    const double lo = med - kWinsorize * sd, hi = med + kWinsorize * sd;
    for (Eigen::Index j = 0; j < filled.cols(); ++j) {
      for (Eigen::Index i = 0; i < filled.rows(); ++i) {
        if (mask == nullptr || (*mask)(i, j)) filled(i, j) = std::clamp(filled(i, j), lo, hi);
      }
    }
  }
  Eigen::BDCSVD<Matrix> svd(filled, Eigen::ComputeThinU | Eigen::ComputeThinV);
  RankOneState s;
  s.a = svd.matrixU().col(0) * svd.singularValues()(0);
  s.b = svd.matrixV().col(0);
  return s;
}

RankOneState random_start(Eigen::Index m, Eigen::Index n) {
  std::mt19937_64 rng(0x5eedULL);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  RankOneState s;
  s.a = Vector::NullaryExpr(m, [&] { return unif(rng); });
  s.b = Vector::NullaryExpr(n, [&] { return unif(rng); });
  return s;
}

RankOneFit finish(const RankOneState& s, int iterations, bool converged) {
  RankOneFit fit;
  const double na = s.a.norm(), nb = s.b.norm();
  fit.delta = na * nb;
  fit.u = normalized(s.a);
  fit.v = normalized(s.b);
  canonicalize_sign(fit.u, fit.v);
  fit.iterations = iterations;
  fit.converged = converged;
  return fit;
}

}  // namespace

RankOneFit robust_rank_one(const Matrix& x, const MissingMask* mask, const HuberConfig& cfg,
                           const std::optional<VectorPair>& init) {
  cfg.validate();
  const Eigen::Index m = x.rows(), n = x.cols();
  if (m < 2 || n < 2) throw InvalidArgument("robust_rank_one: matrix must be at least 2x2");
  if (mask != nullptr) validate_mask(*mask, m, n);
  if (init && (init->first.size() != m || init->second.size() != n)) {
    throw InvalidArgument("robust_rank_one: initial vectors do not match matrix shape");
  }

  RankOneSolver solver(x, mask, cfg);
  if (solver.observed_norm() == 0.0) {
    // Nothing left to fit; the term is zero.
    RankOneFit fit;
    fit.u = init ? normalized(init->first) : Vector::Unit(m, 0);
    fit.v = init ? normalized(init->second) : Vector::Unit(n, 0);
    if (fit.u.norm() == 0.0) fit.u = Vector::Unit(m, 0);
    if (fit.v.norm() == 0.0) fit.v = Vector::Unit(n, 0);
    canonicalize_sign(fit.u, fit.v);
    fit.converged = true;
    return fit;
  }

  RankOneState cur;
  if (init) {
    cur.a = init->first;
    cur.b = init->second;
  } else {
    cur = classical_start(x, mask, solver.floor());
  }

  RankOneState next;
  if (solver.sweep(cur, next) == SweepStatus::degenerate) {
    cur = random_start(m, n);
    if (solver.sweep(cur, next) == SweepStatus::degenerate) {
      throw DegenerateFit("robust_rank_one: zero weighted denominator in first sweep");
    }
  }

  int iter = 1;
  for (;;) {
    const double change =
        outer_distance(cur, next) / std::max(cur.a.norm() * cur.b.norm(), solver.floor());
    std::swap(cur, next);
    if (change < cfg.tol) return finish(cur, iter, true);
    if (iter >= cfg.max_iter) return finish(cur, iter, false);
    if (solver.sweep(cur, next) == SweepStatus::degenerate) {
      throw DegenerateFit("robust_rank_one: zero weighted denominator at sweep " +
                          std::to_string(iter + 1));
    }
    ++iter;
  }
}

// ---------------------------------------------------------------------------
// Deflation and the classical backend
// ---------------------------------------------------------------------------

namespace {

void sort_descending(std::vector<RankOneFit>& comps) {
  std::stable_sort(comps.begin(), comps.end(),
                   [](const RankOneFit& l, const RankOneFit& r) { return l.delta > r.delta; });
}

// Replaces the deflation terms by the singular triples of their sum. The
// deflation terms are not mutually orthogonal, so their own deltas are not
// singular values of the fit.
void rediagonalize(std::vector<RankOneFit>& comps) {
  const auto r = static_cast<Eigen::Index>(comps.size());
  if (r == 0) return;
  sort_descending(comps);
  const Eigen::Index m = comps.front().u.size(), n = comps.front().v.size();
  Matrix a(m, r), b(n, r);
  for (Eigen::Index k = 0; k < r; ++k) {
    const auto& c = comps[static_cast<std::size_t>(k)];
    a.col(k) = c.delta * c.u;
    b.col(k) = c.v;
  }
  const Eigen::HouseholderQR<Matrix> qa(a), qb(b);
  const Matrix ra = qa.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  const Matrix rb = qb.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<Matrix> core(ra * rb.transpose(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix u = qa.householderQ() * (Matrix::Identity(m, r) * core.matrixU());
  const Matrix v = qb.householderQ() * (Matrix::Identity(n, r) * core.matrixV());
  for (Eigen::Index k = 0; k < r; ++k) {
    auto& c = comps[static_cast<std::size_t>(k)];
    c.delta = core.singularValues()(k);
    c.u = u.col(k);
    c.v = v.col(k);
    canonicalize_sign(c.u, c.v);
  }
}

void check_rank(Eigen::Index rank, const Matrix& x, const char* who) {
  if (rank < 0 || rank > std::min(x.rows(), x.cols())) {
    throw InvalidArgument(std::string(who) + ": rank " + std::to_string(rank) +
                          " exceeds min(rows, cols) = " +
                          std::to_string(std::min(x.rows(), x.cols())));
  }
}

}  // namespace

SvdResult robust_svd(const Matrix& x, Eigen::Index rank, const MissingMask* mask,
                     const HuberConfig& cfg) {
  check_rank(rank, x, "robust_svd");
  if (mask != nullptr) validate_mask(*mask, x.rows(), x.cols());

  SvdResult out;
  out.residual = zero_fill(x, mask);
  out.components.reserve(static_cast<std::size_t>(rank));
  for (Eigen::Index k = 0; k < rank; ++k) {
    RankOneFit fit = robust_rank_one(out.residual, mask, cfg);
    out.residual.noalias() -= fit.delta * fit.u * fit.v.transpose();
    if (mask != nullptr) out.residual = zero_fill(out.residual, mask);
    out.components.push_back(std::move(fit));
  }
  for (int s = 0; s < cfg.backfit_sweeps; ++s) {
    for (auto& c : out.components) {
      out.residual.noalias() += c.delta * c.u * c.v.transpose();
      const double root = std::sqrt(c.delta);
      RankOneFit fit = robust_rank_one(out.residual, mask, cfg, VectorPair{root * c.u, root * c.v});
      fit.iterations += c.iterations;
      out.residual.noalias() -= fit.delta * fit.u * fit.v.transpose();
      if (mask != nullptr) out.residual = zero_fill(out.residual, mask);
      c = std::move(fit);
    }
  }
  rediagonalize(out.components);
  return out;
}

SvdResult classical_svd(const Matrix& x, Eigen::Index rank) {
  check_rank(rank, x, "classical_svd");
  Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdResult out;
  out.components.reserve(static_cast<std::size_t>(rank));
  for (Eigen::Index k = 0; k < rank; ++k) {
    RankOneFit fit;
    fit.delta = svd.singularValues()(k);
    fit.u = svd.matrixU().col(k);
    fit.v = svd.matrixV().col(k);
    canonicalize_sign(fit.u, fit.v);
    fit.iterations = 0;
    fit.converged = true;
    out.components.push_back(std::move(fit));
  }
  out.residual = x;
  out.residual -= out.reconstruct();
  return out;
}

Vector SvdResult::singular_values() const {
  Vector d(rank());
  for (Eigen::Index k = 0; k < rank(); ++k) d(k) = components[static_cast<std::size_t>(k)].delta;
  return d;
}

Matrix SvdResult::left_vectors() const {
  const Eigen::Index m = components.empty() ? residual.rows() : components.front().u.size();
  Matrix u(m, rank());
  for (Eigen::Index k = 0; k < rank(); ++k) u.col(k) = components[static_cast<std::size_t>(k)].u;
  return u;
}

Matrix SvdResult::right_vectors() const {
  const Eigen::Index n = components.empty() ? residual.cols() : components.front().v.size();
  Matrix v(n, rank());
  for (Eigen::Index k = 0; k < rank(); ++k) v.col(k) = components[static_cast<std::size_t>(k)].v;
  return v;
}

Matrix SvdResult::reconstruct(Eigen::Index terms) const {
  if (terms < 0 || terms > rank()) terms = rank();
  Matrix out = Matrix::Zero(residual.rows(), residual.cols());
  for (Eigen::Index k = 0; k < terms; ++k) {
    const auto& c = components[static_cast<std::size_t>(k)];
    out.noalias() += c.delta * c.u * c.v.transpose();
  }
  return out;
}

}  // namespace jivekit
