#pragma once

// Synthetic multi-block data with known joint/individual structure,
// cell-wise outlier injection, and replicated Monte-Carlo studies.

#include "jivekit/ajive.hpp"
#include "jivekit/metrics.hpp"
#include "jivekit/types.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace jivekit {

struct GeneratorConfig {
  Eigen::Index n = 100;
  std::vector<Eigen::Index> p;
  int joint_rank = 0;
  std::vector<int> individual_ranks;
  double signal_scale = 1.0;
  // Extra multiplier on the joint loadings only.
  double joint_scale = 1.0;
  double noise_sd = 0.1;
  std::uint64_t seed = 1;

  void validate() const;
};

enum class OutlierPattern { none, O1, O2, O3, O4, O5, O6 };

std::string to_string(OutlierPattern p);
OutlierPattern outlier_pattern_from_string(const std::string& s);

struct FixedContamination {
  double mean = 10.0;
  double sd = 2.0;
};

// mean = a * m + b * s, sd = s_mult * s for the affected variable's m, s.
struct AdaptiveContamination {
  double a = 3.0;
  double b = 5.0;
  double s_mult = 3.0;
};

enum class ObservationSelection {
  // Each contaminated variable draws its own subject set.
  per_variable,
  // One subject set drawn per replication and reused for every variable.
  shared,
};

struct OutlierConfig {
  std::string label;  // scenario label in reports; defaults to the pattern name
  OutlierPattern pattern = OutlierPattern::none;
  std::optional<double> variable_fraction;  // default 1/5 for O1-O3, 1 for O4-O6
  double observation_fraction = 0.1;
  bool adaptive = false;
  FixedContamination fixed;
  AdaptiveContamination adaptive_params;
  ObservationSelection selection = ObservationSelection::per_variable;
  std::uint64_t seed = 7;

  void validate() const;
  std::string display_label() const;
  double effective_variable_fraction() const;
};

struct GroundTruth {
  Matrix joint_basis;  // n x r
  std::vector<Matrix> joint;
  std::vector<Matrix> individual;
  int joint_rank = 0;
  std::vector<int> individual_ranks;
  std::vector<int> labels;
};

struct GeneratedData {
  MultiBlockDataset data;
  GroundTruth truth;
};

GeneratedData generate_multiblock(const GeneratorConfig& cfg);

struct Contamination {
  MultiBlockDataset data;
  // (block, variable, subject) of every modified cell
  std::vector<std::array<Eigen::Index, 3>> cells;
};

Contamination inject_outliers(const MultiBlockDataset& data, const OutlierConfig& cfg,
                              const std::vector<int>& initial_ranks);

// ---------------------------------------------------------------------------
// Studies
// ---------------------------------------------------------------------------

struct StudyConfig {
  std::string name;
  GeneratorConfig generator;
  // Each replication runs every scenario on the same generated data.
  std::vector<OutlierConfig> scenarios;
  int replications = 1;
  AjiveConfig ajive;  // initial_ranks default to the generator's individual ranks
  std::vector<Backend> methods{Backend::classical, Backend::robust};
  int parallel_workers = 1;

  void validate() const;
};

struct MetricRecord {
  int replication = 0;
  std::string scenario;
  std::string method;  // "aJIVE" or "RaJIVE"
  bool ok = true;
  std::string error;
  int joint_rank = 0;
  std::vector<int> individual_ranks;
  VarianceProportions variance;
  double sre = 0.0;
  double auc = 0.5;
  RankErrors rank_errors;
};

struct Summary {
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

struct GroupAggregate {
  std::string scenario;
  std::string method;
  int n_ok = 0;
  int n_failed = 0;
  Summary joint_rank;
  std::vector<Summary> individual_ranks;
  Summary sre;
  Summary auc;
  std::vector<BlockVariance> variance_median;
};

struct StudyReport {
  StudyConfig config;
  std::vector<MetricRecord> records;  // replication-major, then scenario, then method
  std::vector<GroupAggregate> aggregates;
  int failed_replications = 0;

  const GroupAggregate* find(const std::string& scenario, const std::string& method) const;
};

std::string method_label(Backend b);

MetricRecord evaluate(const MultiBlockDataset& data, const GroundTruth& truth,
                      const AjiveConfig& cfg);

// Medians and quartiles per scenario x method over the successful records.
std::vector<GroupAggregate> aggregate(const StudyConfig& cfg, const std::vector<MetricRecord>& records);

StudyReport run_study(const StudyConfig& cfg);

// R type-7 sample quantile.
double quantile(std::vector<double> xs, double q);

}  // namespace jivekit
