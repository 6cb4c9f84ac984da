#include "jivekit/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

namespace jivekit {

namespace {

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix g(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) g(i, j) = z(rng);
  return g;
}

// First k entries of a uniformly random permutation of [0, n).
std::vector<Eigen::Index> choose(Eigen::Index n, Eigen::Index k, std::mt19937_64& rng) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  for (Eigen::Index i = 0; i < k; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  idx.resize(static_cast<std::size_t>(k));
  std::sort(idx.begin(), idx.end());
  return idx;
}

Eigen::Index floor_count(double fraction, Eigen::Index total) {
  return static_cast<Eigen::Index>(std::floor(fraction * static_cast<double>(total) + 1e-9));
}

constexpr std::uint64_t kLabelStream = 0xa0761d6478bd642fULL;

}  // namespace

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

void GeneratorConfig::validate() const {
  if (n < 2) throw InvalidArgument("generator n must be at least 2");
  if (p.size() < 2) throw InvalidArgument("generator needs at least 2 blocks");
  if (individual_ranks.size() != p.size()) {
    throw InvalidArgument("generator individual_ranks must have one entry per block");
  }
  if (joint_rank < 0) throw InvalidArgument("generator joint_rank must be nonnegative");
  if (!(signal_scale > 0.0) || !(joint_scale > 0.0)) {
    throw InvalidArgument("generator signal scales must be positive");
  }
  if (!(noise_sd >= 0.0)) throw InvalidArgument("generator noise_sd must be nonnegative");
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (individual_ranks[k] < 0) throw InvalidArgument("generator individual ranks must be nonnegative");
    if (joint_rank + individual_ranks[k] > std::min(p[k], n)) {
      throw InvalidArgument("generator block " + std::to_string(k + 1) + ": joint rank " +
                            std::to_string(joint_rank) + " + individual rank " +
                            std::to_string(individual_ranks[k]) + " exceeds min(p_k, n)");
    }
  }
}

GeneratedData generate_multiblock(const GeneratorConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const Eigen::Index n = cfg.n;
  const int r = cfg.joint_rank;

  GeneratedData out;
  auto& truth = out.truth;
  truth.joint_rank = r;
  truth.individual_ranks = cfg.individual_ranks;
  truth.joint_basis = orthonormalize_columns(gaussian(n, r, rng));
  const Matrix& u = truth.joint_basis;

  for (std::size_t k = 0; k < cfg.p.size(); ++k) {
    const Eigen::Index pk = cfg.p[k];
    const int rk = cfg.individual_ranks[k];
    Matrix w = gaussian(n, rk, rng);
    // Project out the joint scores twice so U^T W stays at rounding level.
    for (int pass = 0; pass < 2; ++pass) {
      if (r > 0) w -= u * (u.transpose() * w);
      w = orthonormalize_columns(w);
    }
    const Matrix a = gaussian(pk, r, rng) * (cfg.signal_scale * cfg.joint_scale);
    const Matrix b = gaussian(pk, rk, rng) * cfg.signal_scale;
    Matrix joint = a * u.transpose();
    Matrix indiv = b * w.transpose();
    Matrix x = joint + indiv;
    if (cfg.noise_sd > 0.0) x += cfg.noise_sd * gaussian(pk, n, rng);
    truth.joint.push_back(std::move(joint));
    truth.individual.push_back(std::move(indiv));
    out.data.blocks.push_back(std::move(x));
    out.data.block_names.push_back("block" + std::to_string(k + 1));
  }

  std::mt19937_64 label_rng(cfg.seed ^ kLabelStream);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double root_n = std::sqrt(static_cast<double>(n));
  truth.labels.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double score = r > 0 ? root_n * u(i, 0) : 0.0;
    const double prob = 1.0 / (1.0 + std::exp(-2.0 * score));
    truth.labels[static_cast<std::size_t>(i)] = unif(label_rng) < prob ? 1 : 0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Outliers
// ---------------------------------------------------------------------------

std::string to_string(OutlierPattern p) {
  switch (p) {
    case OutlierPattern::none: return "NONE";
    case OutlierPattern::O1: return "O1";
    case OutlierPattern::O2: return "O2";
    case OutlierPattern::O3: return "O3";
    case OutlierPattern::O4: return "O4";
    case OutlierPattern::O5: return "O5";
    case OutlierPattern::O6: return "O6";
  }
  return "NONE";
}

OutlierPattern outlier_pattern_from_string(const std::string& s) {
  for (auto p : {OutlierPattern::none, OutlierPattern::O1, OutlierPattern::O2, OutlierPattern::O3,
                 OutlierPattern::O4, OutlierPattern::O5, OutlierPattern::O6}) {
    if (to_string(p) == s) return p;
  }
  throw InvalidArgument("unknown outlier configuration '" + s + "'");
}

void OutlierConfig::validate() const {
  auto in_unit = [](double f) { return f >= 0.0 && f <= 1.0; };
  if (variable_fraction && !in_unit(*variable_fraction)) {
    throw InvalidArgument("variable_fraction must lie in [0, 1]");
  }
  if (!in_unit(observation_fraction)) throw InvalidArgument("observation_fraction must lie in [0, 1]");
  if (!adaptive && !(fixed.sd >= 0.0)) throw InvalidArgument("contamination sd must be nonnegative");
  if (adaptive && !(adaptive_params.s_mult >= 0.0)) {
    throw InvalidArgument("adaptive s_mult must be nonnegative");
  }
}

std::string OutlierConfig::display_label() const { return label.empty() ? to_string(pattern) : label; }

double OutlierConfig::effective_variable_fraction() const {
  if (pattern == OutlierPattern::none) return 0.0;
  if (variable_fraction) return *variable_fraction;
  switch (pattern) {
    case OutlierPattern::O1:
    case OutlierPattern::O2:
    case OutlierPattern::O3: return 0.2;
    default: return 1.0;
  }
}

Contamination inject_outliers(const MultiBlockDataset& data, const OutlierConfig& cfg,
                              const std::vector<int>& initial_ranks) {
  cfg.validate();
  Contamination out{data, {}};
  if (cfg.pattern == OutlierPattern::none) return out;
  if (initial_ranks.size() != data.num_blocks()) {
    throw InvalidArgument("inject_outliers: initial_ranks must have one entry per block");
  }

  std::vector<std::size_t> targets;
  switch (cfg.pattern) {
    case OutlierPattern::O1:
    case OutlierPattern::O4:
      for (std::size_t k = 0; k < data.num_blocks(); ++k) targets.push_back(k);
      break;
    case OutlierPattern::O2:
    case OutlierPattern::O5:
      targets.push_back(static_cast<std::size_t>(
          std::max_element(initial_ranks.begin(), initial_ranks.end()) - initial_ranks.begin()));
      break;
    default:
      targets.push_back(static_cast<std::size_t>(
          std::min_element(initial_ranks.begin(), initial_ranks.end()) - initial_ranks.begin()));
      break;
  }

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> z(0.0, 1.0);
  const Eigen::Index n = data.num_subjects();
  const Eigen::Index n_obs = floor_count(cfg.observation_fraction, n);
  const double vf = cfg.effective_variable_fraction();

  std::vector<Eigen::Index> shared_cols;
  if (cfg.selection == ObservationSelection::shared) shared_cols = choose(n, n_obs, rng);

  for (std::size_t k : targets) {
    const Matrix& orig = data.blocks[k];
    Matrix& x = out.data.blocks[k];
    const MissingMask* mask = data.mask(k);
    const Eigen::Index n_var = floor_count(vf, orig.rows());
    for (Eigen::Index i : choose(orig.rows(), n_var, rng)) {
      double mean = cfg.fixed.mean, sd = cfg.fixed.sd;
      if (cfg.adaptive) {
        double sum = 0.0, sumsq = 0.0;
        Eigen::Index cnt = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
          if (mask != nullptr && !(*mask)(i, j)) continue;
          sum += orig(i, j);
          ++cnt;
        }
        const double m = sum / static_cast<double>(cnt);
        for (Eigen::Index j = 0; j < n; ++j) {
          if (mask != nullptr && !(*mask)(i, j)) continue;
          sumsq += (orig(i, j) - m) * (orig(i, j) - m);
        }
        const double s = cnt > 1 ? std::sqrt(sumsq / static_cast<double>(cnt - 1)) : 0.0;
        mean = cfg.adaptive_params.a * m + cfg.adaptive_params.b * s;
        sd = cfg.adaptive_params.s_mult * s;
      }
      const auto cols = cfg.selection == ObservationSelection::shared ? shared_cols : choose(n, n_obs, rng);
      for (Eigen::Index j : cols) {
        x(i, j) += mean + sd * z(rng);
        out.cells.push_back({static_cast<Eigen::Index>(k), i, j});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Studies
// ---------------------------------------------------------------------------

void StudyConfig::validate() const {
  generator.validate();
  if (replications < 1) throw InvalidArgument("replications must be at least 1");
  if (parallel_workers < 1) throw InvalidArgument("parallel_workers must be at least 1");
  if (scenarios.empty()) throw InvalidArgument("study needs at least one scenario");
  if (methods.empty()) throw InvalidArgument("study needs at least one method");
  for (const auto& s : scenarios) s.validate();
  if (!ajive.initial_ranks.empty() && ajive.initial_ranks.size() != generator.p.size()) {
    throw InvalidArgument("initial_ranks must have one entry per block");
  }
  ajive.huber.validate();
  ajive.segmentation.validate();
}

std::string method_label(Backend b) { return b == Backend::classical ? "aJIVE" : "RaJIVE"; }

MetricRecord evaluate(const MultiBlockDataset& data, const GroundTruth& truth, const AjiveConfig& cfg) {
  MetricRecord rec;
  rec.method = method_label(cfg.backend);
  const AjiveResult res = decompose(data, cfg);
  rec.joint_rank = res.joint_rank;
  for (const auto& b : res.per_block) rec.individual_ranks.push_back(b.individual_rank);
  rec.variance = variance_explained(res, data);
  if (truth.joint_rank > 0) {
    rec.sre = subspace_recovery_error(res.joint_basis, truth.joint_basis);
  } else {
    rec.sre = std::sqrt(static_cast<double>(res.joint_rank));
  }
  const LogisticFit fit = fit_logistic(res.joint_scores, truth.labels);
  const Vector pred = fit.predict(res.joint_scores);
  rec.auc = auc(std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())), truth.labels);
  rec.rank_errors = rank_recovery(rec.joint_rank, rec.individual_ranks, truth.joint_rank,
                                  truth.individual_ranks);
  return rec;
}

double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const double h = (static_cast<double>(xs.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

namespace {

Summary summarize(const std::vector<double>& xs) {
  return {quantile(xs, 0.5), quantile(xs, 0.25), quantile(xs, 0.75)};
}

}  // namespace

std::vector<GroupAggregate> aggregate(const StudyConfig& cfg, const std::vector<MetricRecord>& records) {
  std::vector<GroupAggregate> out;
  const std::size_t nblocks = cfg.generator.p.size();
  for (const auto& sc : cfg.scenarios) {
    for (Backend b : cfg.methods) {
      GroupAggregate g;
      g.scenario = sc.display_label();
      g.method = method_label(b);
      std::vector<double> joint, sre, aucs;
      std::vector<std::vector<double>> ind(nblocks), vj(nblocks), vi(nblocks), ve(nblocks);
      for (const auto& r : records) {
        if (r.scenario != g.scenario || r.method != g.method) continue;
        if (!r.ok) {
          ++g.n_failed;
          continue;
        }
        ++g.n_ok;
        joint.push_back(r.joint_rank);
        sre.push_back(r.sre);
        aucs.push_back(r.auc);
        for (std::size_t k = 0; k < nblocks; ++k) {
          ind[k].push_back(r.individual_ranks.at(k));
          vj[k].push_back(r.variance.at(k).joint);
          vi[k].push_back(r.variance.at(k).individual);
          ve[k].push_back(r.variance.at(k).residual);
        }
      }
      g.joint_rank = summarize(joint);
      g.sre = summarize(sre);
      g.auc = summarize(aucs);
      for (std::size_t k = 0; k < nblocks; ++k) {
        g.individual_ranks.push_back(summarize(ind[k]));
        g.variance_median.push_back({quantile(vj[k], 0.5), quantile(vi[k], 0.5), quantile(ve[k], 0.5)});
      }
      out.push_back(std::move(g));
    }
  }
  return out;
}

const GroupAggregate* StudyReport::find(const std::string& scenario, const std::string& method) const {
  for (const auto& g : aggregates) {
    if (g.scenario == scenario && g.method == method) return &g;
  }
  return nullptr;
}

namespace {

std::vector<MetricRecord> run_replication(const StudyConfig& cfg, int rep) {
  std::vector<MetricRecord> recs;
  GeneratorConfig gen = cfg.generator;
  gen.seed = cfg.generator.seed + static_cast<std::uint64_t>(rep);
  AjiveConfig base = cfg.ajive;
  if (base.initial_ranks.empty()) base.initial_ranks = cfg.generator.individual_ranks;

  auto fail_all = [&](const std::string& why) {
    recs.clear();
    for (const auto& sc : cfg.scenarios) {
      for (Backend b : cfg.methods) {
        MetricRecord r;
        r.replication = rep;
        r.scenario = sc.display_label();
        r.method = method_label(b);
        r.ok = false;
        r.error = why;
        recs.push_back(std::move(r));
      }
    }
  };

  GeneratedData g;
  try {
    g = generate_multiblock(gen);
  } catch (const std::exception& e) {
    fail_all(e.what());
    return recs;
  }

  for (const auto& sc : cfg.scenarios) {
    OutlierConfig oc = sc;
    oc.seed = sc.seed + static_cast<std::uint64_t>(rep);
    Contamination cont;
    std::string cont_error;
    try {
      cont = inject_outliers(g.data, oc, base.initial_ranks);
    } catch (const std::exception& e) {
      cont_error = e.what();
    }
    for (Backend b : cfg.methods) {
      MetricRecord r;
      if (cont_error.empty()) {
        AjiveConfig ac = base;
        ac.backend = b;
        try {
          r = evaluate(cont.data, g.truth, ac);
        } catch (const std::exception& e) {
          r = MetricRecord{};
          r.ok = false;
          r.error = e.what();
        }
      } else {
        r.ok = false;
        r.error = cont_error;
      }
      r.replication = rep;
      r.scenario = sc.display_label();
      r.method = method_label(b);
      recs.push_back(std::move(r));
    }
  }
  return recs;
}

}  // namespace

StudyReport run_study(const StudyConfig& cfg) {
  cfg.validate();
  std::vector<std::vector<MetricRecord>> per_rep(static_cast<std::size_t>(cfg.replications));

  std::atomic<int> next{0};
  auto worker = [&] {
    for (int rep = next++; rep < cfg.replications; rep = next++) {
      per_rep[static_cast<std::size_t>(rep)] = run_replication(cfg, rep);
    }
  };
  const int workers = std::min(cfg.parallel_workers, cfg.replications);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  StudyReport report;
  report.config = cfg;
  for (auto& recs : per_rep) {
    const bool failed = std::any_of(recs.begin(), recs.end(), [](const auto& r) { return !r.ok; });
    if (failed) ++report.failed_replications;
    for (auto& r : recs) report.records.push_back(std::move(r));
  }
  if (report.failed_replications * 5 > cfg.replications) {
    std::string first;
    for (const auto& r : report.records) {
      if (!r.ok) {
        first = r.error;
        break;
      }
    }
    throw std::runtime_error("study failed: " + std::to_string(report.failed_replications) + " of " +
                             std::to_string(cfg.replications) + " replications errored (first: " +
                             first + ")");
  }
  report.aggregates = aggregate(cfg, report.records);
  return report;
}

}  // namespace jivekit
