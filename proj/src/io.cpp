#include "jivekit/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace jivekit {

using nlohmann::json;
namespace fs = std::filesystem;

// ===========================================================================
// CSV
// ===========================================================================

namespace {

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char ch : text) {
    if (ch == '\n') {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      lines.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty() && cur.back() == '\r') cur.pop_back();
  if (!cur.empty()) lines.push_back(std::move(cur));
  // Trailing blank lines are tolerated.
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\"");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\"");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

LabeledMatrix parse_csv(const std::string& text, const std::string& missing_token,
                        Orientation orientation, const std::string& source) {
  const auto lines = split_lines(text);
  if (lines.size() < 2) throw ParseError(source + ": need a header row and at least one data row");

  const auto header = split_fields(lines[0]);
  if (header.size() < 2) throw ParseError(source + ": header row has no column IDs");
  std::vector<std::string> col_ids;
  std::set<std::string> seen;
  for (std::size_t c = 1; c < header.size(); ++c) {
    std::string id = trim(header[c]);
    if (!seen.insert(id).second) {
      throw ParseError(source + ": line 1: duplicate column header '" + id + "'");
    }
    col_ids.push_back(std::move(id));
  }

  const auto rows = static_cast<Eigen::Index>(lines.size() - 1);
  const auto cols = static_cast<Eigen::Index>(col_ids.size());
  Matrix values(rows, cols);
  MissingMask observed = MissingMask::Constant(rows, cols, true);
  std::vector<std::string> row_ids;
  bool has_missing = false;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const std::size_t lineno = static_cast<std::size_t>(i) + 2;
    const auto fields = split_fields(lines[static_cast<std::size_t>(i) + 1]);
    if (static_cast<Eigen::Index>(fields.size()) != cols + 1) {
      throw ParseError(source + ": line " + std::to_string(lineno) + ": expected " +
                       std::to_string(cols + 1) + " fields, found " + std::to_string(fields.size()));
    }
    row_ids.push_back(trim(fields[0]));
    for (Eigen::Index j = 0; j < cols; ++j) {
      const std::string cell = trim(fields[static_cast<std::size_t>(j) + 1]);
      if (cell == missing_token) {
        values(i, j) = std::numeric_limits<double>::quiet_NaN();
        observed(i, j) = false;
        has_missing = true;
        continue;
      }
      double v = 0.0;
      if (!parse_double(cell, v)) {
        throw ParseError(source + ": line " + std::to_string(lineno) + ", column " +
                         std::to_string(j + 2) + ": '" + cell + "' is not a finite number");
      }
      values(i, j) = v;
    }
  }

  LabeledMatrix out;
  out.has_missing = has_missing;
  if (orientation == Orientation::variables_in_rows) {
    out.values = std::move(values);
    out.observed = std::move(observed);
    out.variable_ids = std::move(row_ids);
    out.subject_ids = std::move(col_ids);
  } else {
    std::set<std::string> subj;
    for (const auto& id : row_ids) {
      if (!subj.insert(id).second) throw ParseError(source + ": duplicate subject ID '" + id + "'");
    }
    out.values = values.transpose();
    out.observed = observed.transpose();
    out.variable_ids = std::move(col_ids);
    out.subject_ids = std::move(row_ids);
  }
  return out;
}

LabeledMatrix read_csv(const fs::path& path, const std::string& missing_token, Orientation orientation) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), missing_token, orientation, path.string());
}

std::string format_csv(const Matrix& m, const std::vector<std::string>& row_ids,
                       const std::vector<std::string>& col_ids) {
  std::string out = "id";
  for (const auto& c : col_ids) out += "," + c;
  out += "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out += row_ids[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m.cols(); ++j) out += "," + format_double(m(i, j));
    out += "\n";
  }
  return out;
}

// ===========================================================================
// Manifests
// ===========================================================================

namespace {

template <class T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(where + ": field '" + key + "' has the wrong type");
  }
}

template <class T>
T field_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  return field<T>(j, key, where);
}

}  // namespace

void check_schema_version(const json& j, const std::string& what) {
  const std::string v = field<std::string>(j, "schema_version", what);
  if (v != kSchemaVersion) {
    throw ParseError(what + ": schema_version " + v + " is not supported (expected " +
                     kSchemaVersion + ")");
  }
}

DatasetManifest parse_manifest(const json& j, const fs::path& base_dir) {
  const std::string where = "manifest";
  check_schema_version(j, where);
  DatasetManifest m;
  m.missing_token = field_or<std::string>(j, "missing_token", "NA", where);
  m.center_rows = field_or<bool>(j, "center_rows", false, where);
  m.scale_rows = field_or<bool>(j, "scale_rows", false, where);
  const json blocks = field<json>(j, "blocks", where);
  if (!blocks.is_array() || blocks.size() < 2) throw ParseError(where + ": need at least 2 blocks");
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const std::string bw = where + ".blocks[" + std::to_string(k) + "]";
    ManifestBlock b;
    b.name = field<std::string>(blocks[k], "name", bw);
    fs::path p = field<std::string>(blocks[k], "csv_path", bw);
    b.csv_path = p.is_absolute() ? p : base_dir / p;
    const std::string o = field_or<std::string>(blocks[k], "orientation", "variables-in-rows", bw);
    if (o == "variables-in-rows") {
      b.orientation = Orientation::variables_in_rows;
    } else if (o == "variables-in-columns") {
      b.orientation = Orientation::variables_in_columns;
    } else {
      throw ParseError(bw + ": orientation '" + o + "' is not variables-in-rows or variables-in-columns");
    }
    m.blocks.push_back(std::move(b));
  }
  return m;
}

DatasetManifest read_manifest(const fs::path& path) {
  return parse_manifest(read_json(path), path.parent_path());
}

void preprocess_rows(LabeledMatrix& m, bool center, bool scale, const std::string& block_name) {
  if (!center && !scale) return;
  for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
    double sum = 0.0;
    Eigen::Index cnt = 0;
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
      if (m.observed(i, j)) {
        sum += m.values(i, j);
        ++cnt;
      }
    }
    const double mean = cnt > 0 ? sum / static_cast<double>(cnt) : 0.0;
    double ss = 0.0;
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
      if (m.observed(i, j)) ss += (m.values(i, j) - mean) * (m.values(i, j) - mean);
    }
    const double sd = cnt > 1 ? std::sqrt(ss / static_cast<double>(cnt - 1)) : 0.0;
    if (scale && !(sd > 0.0)) {
      throw ParseError(block_name + ": variable '" + m.variable_ids[static_cast<std::size_t>(i)] +
                       "' has zero variance and cannot be scaled");
    }
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
      if (!m.observed(i, j)) continue;
      double v = m.values(i, j);
      if (center) v -= mean;
      if (scale) v /= sd;
      m.values(i, j) = v;
    }
  }
}

LoadedDataset load_dataset(const DatasetManifest& manifest) {
  if (manifest.blocks.size() < 2) throw ParseError("manifest: need at least 2 blocks");
  LoadedDataset out;
  for (std::size_t k = 0; k < manifest.blocks.size(); ++k) {
    const auto& b = manifest.blocks[k];
    if (!fs::exists(b.csv_path)) {
      throw ParseError("block '" + b.name + "': file " + b.csv_path.string() + " does not exist");
    }
    LabeledMatrix lm = read_csv(b.csv_path, manifest.missing_token, b.orientation);
    if (k > 0 && static_cast<std::size_t>(lm.values.cols()) != out.subject_ids.size()) {
      throw ParseError("block '" + b.name + "' has " + std::to_string(lm.values.cols()) +
                       " subjects but block '" + manifest.blocks[0].name + "' has " +
                       std::to_string(out.subject_ids.size()));
    }
    preprocess_rows(lm, manifest.center_rows, manifest.scale_rows, b.name);
    if (k == 0) out.subject_ids = lm.subject_ids;
    out.data.blocks.push_back(std::move(lm.values));
    if (lm.has_missing) {
      out.data.masks.resize(manifest.blocks.size());
      out.data.masks[k] = std::move(lm.observed);
    }
    out.data.block_names.push_back(b.name);
    out.variable_ids.push_back(std::move(lm.variable_ids));
  }
  if (!out.data.masks.empty()) out.data.masks.resize(manifest.blocks.size());
  return out;
}

LoadedDataset load_manifest(const fs::path& path) { return load_dataset(read_manifest(path)); }

// ===========================================================================
// JSON conversions
// ===========================================================================

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string() + ": cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": invalid JSON (" + e.what() + ")");
  }
}

std::string config_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json to_json(const HuberConfig& c) {
  return {{"c", c.c}, {"max_iter", c.max_iter}, {"tol", c.tol}, {"scale_floor", c.scale_floor}, {"backfit_sweeps", c.backfit_sweeps}};
}

json to_json(const SegmentationConfig& c) {
  return {{"n_resamples", c.n_resamples}, {"quantile", c.quantile}, {"seed", c.seed}};
}

json to_json(const AjiveConfig& c) {
  json j = {{"schema_version", kSchemaVersion},
            {"initial_ranks", c.initial_ranks},
            {"backend", to_string(c.backend)},
            {"huber", to_json(c.huber)},
            {"segmentation", to_json(c.segmentation)}};
  j["joint_rank_override"] = c.joint_rank_override ? json(*c.joint_rank_override) : json(nullptr);
  return j;
}

json to_json(const GeneratorConfig& c) {
  return {{"n", c.n},
          {"p", c.p},
          {"joint_rank", c.joint_rank},
          {"individual_ranks", c.individual_ranks},
          {"signal_scale", c.signal_scale},
          {"joint_scale", c.joint_scale},
          {"noise_sd", c.noise_sd},
          {"seed", c.seed}};
}

json to_json(const OutlierConfig& c) {
  json j = {{"label", c.display_label()},
            {"configuration", to_string(c.pattern)},
            {"observation_fraction", c.observation_fraction},
            {"observation_selection",
             c.selection == ObservationSelection::shared ? "shared" : "per_variable"},
            {"seed", c.seed}};
  j["variable_fraction"] = c.variable_fraction ? json(*c.variable_fraction) : json(nullptr);
  if (c.adaptive) {
    j["distribution"] = {{"type", "adaptive"},
                         {"a", c.adaptive_params.a},
                         {"b", c.adaptive_params.b},
                         {"s_mult", c.adaptive_params.s_mult}};
  } else {
    j["distribution"] = {{"type", "fixed"}, {"mean", c.fixed.mean}, {"sd", c.fixed.sd}};
  }
  return j;
}

json to_json(const StudyConfig& c) {
  json scen = json::array();
  for (const auto& s : c.scenarios) scen.push_back(to_json(s));
  json methods = json::array();
  for (Backend b : c.methods) methods.push_back(to_string(b));
  json aj = to_json(c.ajive);
  aj.erase("schema_version");
  aj.erase("backend");
  return {{"schema_version", kSchemaVersion},
          {"name", c.name},
          {"generator", to_json(c.generator)},
          {"scenarios", scen},
          {"replications", c.replications},
          {"ajive", aj},
          {"methods", methods},
          {"parallel_workers", c.parallel_workers}};
}

HuberConfig huber_from_json(const json& j) {
  const std::string w = "huber";
  HuberConfig c;
  c.c = field_or<double>(j, "c", c.c, w);
  c.max_iter = field_or<int>(j, "max_iter", c.max_iter, w);
  c.tol = field_or<double>(j, "tol", c.tol, w);
  c.scale_floor = field_or<double>(j, "scale_floor", c.scale_floor, w);
  c.backfit_sweeps = field_or<int>(j, "backfit_sweeps", c.backfit_sweeps, w);
  return c;
}

SegmentationConfig segmentation_from_json(const json& j) {
  const std::string w = "segmentation";
  SegmentationConfig c;
  c.n_resamples = field_or<int>(j, "n_resamples", c.n_resamples, w);
  c.quantile = field_or<double>(j, "quantile", c.quantile, w);
  c.seed = field_or<std::uint64_t>(j, "seed", c.seed, w);
  return c;
}

namespace {

AjiveConfig ajive_fields(const json& j, const std::string& w, bool ranks_required) {
  AjiveConfig c;
  if (ranks_required) {
    c.initial_ranks = field<std::vector<int>>(j, "initial_ranks", w);
  } else {
    c.initial_ranks = field_or<std::vector<int>>(j, "initial_ranks", {}, w);
  }
  c.backend = backend_from_string(field_or<std::string>(j, "backend", "classical", w));
  if (j.contains("huber")) c.huber = huber_from_json(j.at("huber"));
  if (j.contains("segmentation")) c.segmentation = segmentation_from_json(j.at("segmentation"));
  if (j.contains("joint_rank_override") && !j.at("joint_rank_override").is_null()) {
    c.joint_rank_override = field<int>(j, "joint_rank_override", w);
  }
  return c;
}

}  // namespace

AjiveConfig ajive_config_from_json(const json& j) {
  check_schema_version(j, "config");
  AjiveConfig c = ajive_fields(j, "config", true);
  c.huber.validate();
  c.segmentation.validate();
  return c;
}

GeneratorConfig generator_from_json(const json& j) {
  const std::string w = "generator";
  GeneratorConfig c;
  c.n = field<Eigen::Index>(j, "n", w);
  c.p = field<std::vector<Eigen::Index>>(j, "p", w);
  c.joint_rank = field<int>(j, "joint_rank", w);
  c.individual_ranks = field<std::vector<int>>(j, "individual_ranks", w);
  c.signal_scale = field_or<double>(j, "signal_scale", c.signal_scale, w);
  c.joint_scale = field_or<double>(j, "joint_scale", c.joint_scale, w);
  c.noise_sd = field_or<double>(j, "noise_sd", c.noise_sd, w);
  c.seed = field_or<std::uint64_t>(j, "seed", c.seed, w);
  return c;
}

OutlierConfig outlier_from_json(const json& j) {
  const std::string w = "scenario";
  OutlierConfig c;
  c.pattern = outlier_pattern_from_string(field_or<std::string>(j, "configuration", "NONE", w));
  c.label = field_or<std::string>(j, "label", "", w);
  if (j.contains("variable_fraction") && !j.at("variable_fraction").is_null()) {
    c.variable_fraction = field<double>(j, "variable_fraction", w);
  }
  c.observation_fraction = field_or<double>(j, "observation_fraction", c.observation_fraction, w);
  const std::string sel = field_or<std::string>(j, "observation_selection", "per_variable", w);
  if (sel == "per_variable") {
    c.selection = ObservationSelection::per_variable;
  } else if (sel == "shared") {
    c.selection = ObservationSelection::shared;
  } else {
    throw ParseError(w + ": observation_selection '" + sel + "' is not per_variable or shared");
  }
  c.seed = field_or<std::uint64_t>(j, "seed", c.seed, w);
  if (j.contains("distribution")) {
    const json& d = j.at("distribution");
    const std::string type = field<std::string>(d, "type", w + ".distribution");
    if (type == "fixed") {
      c.fixed.mean = field<double>(d, "mean", w + ".distribution");
      c.fixed.sd = field<double>(d, "sd", w + ".distribution");
    } else if (type == "adaptive") {
      c.adaptive = true;
      c.adaptive_params.a = field_or<double>(d, "a", c.adaptive_params.a, w + ".distribution");
      c.adaptive_params.b = field_or<double>(d, "b", c.adaptive_params.b, w + ".distribution");
      c.adaptive_params.s_mult =
          field_or<double>(d, "s_mult", c.adaptive_params.s_mult, w + ".distribution");
    } else {
      throw ParseError(w + ".distribution: type '" + type + "' is not fixed or adaptive");
    }
  }
  c.validate();
  return c;
}

StudyConfig study_config_from_json(const json& j) {
  const std::string w = "study";
  check_schema_version(j, w);
  StudyConfig c;
  c.name = field_or<std::string>(j, "name", "", w);
  c.generator = generator_from_json(field<json>(j, "generator", w));
  const json scen = field<json>(j, "scenarios", w);
  if (!scen.is_array()) throw ParseError(w + ": scenarios must be an array");
  for (const auto& s : scen) c.scenarios.push_back(outlier_from_json(s));
  c.replications = field<int>(j, "replications", w);
  if (j.contains("ajive")) c.ajive = ajive_fields(j.at("ajive"), w + ".ajive", false);
  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& m : field<std::vector<std::string>>(j, "methods", w)) {
      c.methods.push_back(backend_from_string(m));
    }
  }
  c.parallel_workers = field_or<int>(j, "parallel_workers", 1, w);
  c.validate();
  return c;
}

json to_json(const MetricRecord& r) {
  json var = json::array();
  for (const auto& v : r.variance) {
    var.push_back({{"joint", v.joint}, {"individual", v.individual}, {"residual", v.residual}});
  }
  json j = {{"replication", r.replication}, {"scenario", r.scenario}, {"method", r.method},
            {"ok", r.ok}};
  if (!r.ok) {
    j["error"] = r.error;
    return j;
  }
  j["joint_rank"] = r.joint_rank;
  j["individual_ranks"] = r.individual_ranks;
  j["variance"] = var;
  j["sre"] = r.sre;
  j["auc"] = r.auc;
  j["joint_rank_error"] = r.rank_errors.joint;
  j["individual_rank_errors"] = r.rank_errors.individual;
  return j;
}

MetricRecord record_from_json(const json& j) {
  const std::string w = "record";
  MetricRecord r;
  r.replication = field<int>(j, "replication", w);
  r.scenario = field<std::string>(j, "scenario", w);
  r.method = field<std::string>(j, "method", w);
  r.ok = field<bool>(j, "ok", w);
  if (!r.ok) {
    r.error = field_or<std::string>(j, "error", "", w);
    return r;
  }
  r.joint_rank = field<int>(j, "joint_rank", w);
  r.individual_ranks = field<std::vector<int>>(j, "individual_ranks", w);
  for (const auto& v : field<json>(j, "variance", w)) {
    r.variance.push_back({field<double>(v, "joint", w), field<double>(v, "individual", w),
                          field<double>(v, "residual", w)});
  }
  r.sre = field<double>(j, "sre", w);
  r.auc = field<double>(j, "auc", w);
  r.rank_errors.joint = field<int>(j, "joint_rank_error", w);
  r.rank_errors.individual = field<std::vector<int>>(j, "individual_rank_errors", w);
  return r;
}

json to_json(const GroupAggregate& g) {
  auto summ = [](const Summary& s) { return json{{"median", s.median}, {"q25", s.q25}, {"q75", s.q75}}; };
  json ind = json::array();
  for (const auto& s : g.individual_ranks) ind.push_back(summ(s));
  json var = json::array();
  for (const auto& v : g.variance_median) {
    var.push_back({{"joint", v.joint}, {"individual", v.individual}, {"residual", v.residual}});
  }
  return {{"scenario", g.scenario}, {"method", g.method},       {"n_ok", g.n_ok},
          {"n_failed", g.n_failed}, {"joint_rank", summ(g.joint_rank)},
          {"individual_ranks", ind}, {"sre", summ(g.sre)},      {"auc", summ(g.auc)},
          {"variance_median", var}};
}

json to_json(const StudyReport& r) {
  // Worker count is an execution detail; reports must not depend on it.
  json cfg = to_json(r.config);
  cfg.erase("parallel_workers");
  json recs = json::array();
  for (const auto& rec : r.records) recs.push_back(to_json(rec));
  json aggs = json::array();
  for (const auto& g : r.aggregates) aggs.push_back(to_json(g));
  return {{"schema_version", kSchemaVersion},
          {"metadata",
           {{"config_hash", config_hash(cfg)},
            {"seed", r.config.generator.seed},
            {"version", kVersion},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                          "." + std::to_string(EIGEN_MINOR_VERSION)}}},
          {"config", cfg},
          {"failed_replications", r.failed_replications},
          {"records", recs},
          {"aggregates", aggs}};
}

StudyReport study_report_from_json(const json& j) {
  check_schema_version(j, "study report");
  StudyReport r;
  r.config = study_config_from_json(field<json>(j, "config", "study report"));
  for (const auto& rec : field<json>(j, "records", "study report")) r.records.push_back(record_from_json(rec));
  r.failed_replications = field<int>(j, "failed_replications", "study report");
  r.aggregates = aggregate(r.config, r.records);
  return r;
}

// ===========================================================================
// TSV summaries
// ===========================================================================

std::string format_tsv_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::string ranks_median_tsv(const StudyReport& r) {
  const std::size_t k = r.config.generator.p.size();
  std::string out = "scenario\tmethod\tjoint";
  for (std::size_t b = 0; b < k; ++b) out += "\tindividual_block" + std::to_string(b + 1);
  out += "\tn_ok\n";
  for (const auto& g : r.aggregates) {
    out += g.scenario + "\t" + g.method + "\t" + format_tsv_number(g.joint_rank.median);
    for (const auto& s : g.individual_ranks) out += "\t" + format_tsv_number(s.median);
    out += "\t" + std::to_string(g.n_ok) + "\n";
  }
  return out;
}

namespace {

template <class F>
std::string long_table(const StudyReport& r, const std::string& column, F value) {
  std::string out = "replication\tscenario\tmethod\t" + column + "\n";
  for (const auto& rec : r.records) {
    if (!rec.ok) continue;
    out += std::to_string(rec.replication) + "\t" + rec.scenario + "\t" + rec.method + "\t" +
           format_tsv_number(value(rec)) + "\n";
  }
  return out;
}

}  // namespace

std::string sre_tsv(const StudyReport& r) {
  return long_table(r, "sre", [](const MetricRecord& m) { return m.sre; });
}

std::string auc_tsv(const StudyReport& r) {
  return long_table(r, "auc", [](const MetricRecord& m) { return m.auc; });
}

std::string variance_tsv(const StudyReport& r) {
  std::string out = "replication\tscenario\tmethod\tblock\tjoint\tindividual\tresidual\n";
  for (const auto& rec : r.records) {
    if (!rec.ok) continue;
    for (std::size_t b = 0; b < rec.variance.size(); ++b) {
      const auto& v = rec.variance[b];
      out += std::to_string(rec.replication) + "\t" + rec.scenario + "\t" + rec.method + "\tblock" +
             std::to_string(b + 1) + "\t" + format_tsv_number(v.joint) + "\t" +
             format_tsv_number(v.individual) + "\t" + format_tsv_number(v.residual) + "\n";
    }
  }
  return out;
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    if (!out.flush()) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace jivekit
