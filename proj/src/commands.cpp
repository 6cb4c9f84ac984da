#include "jivekit/commands.hpp"

#include "jivekit/io.hpp"
#include "jivekit/metrics.hpp"
#include "jivekit/simulation.hpp"

#include <cmath>
#include <ostream>

namespace jivekit {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

bool all_finite(const json& j) {
  if (j.is_number_float()) return std::isfinite(j.get<double>());
  if (j.is_structured()) {
    for (const auto& v : j) {
      if (!all_finite(v)) return false;
    }
  }
  return true;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
}

// Shared error-to-exit-status mapping.
template <class F>
int guarded(std::ostream& err, F body) {
  try {
    return body();
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const PhaseError& e) {
    err << "numerical failure in " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DegenerateFit& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitOther;
  }
}

std::vector<std::string> numbered(const std::string& prefix, Eigen::Index count) {
  std::vector<std::string> out;
  for (Eigen::Index i = 1; i <= count; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

void write_tsvs(const StudyReport& report, const fs::path& out) {
  write_file_atomic(out / "ranks_median.tsv", ranks_median_tsv(report));
  write_file_atomic(out / "sre.tsv", sre_tsv(report));
  write_file_atomic(out / "auc.tsv", auc_tsv(report));
  write_file_atomic(out / "variance.tsv", variance_tsv(report));
}

const std::vector<std::string> kStudyTsvs{"ranks_median.tsv", "sre.tsv", "auc.tsv", "variance.tsv"};

}  // namespace

// ---------------------------------------------------------------------------
// decompose
// ---------------------------------------------------------------------------

int cmd_decompose(const fs::path& manifest_path, const fs::path& config_path, const fs::path& output_dir,
                  const CommandOverrides& overrides, std::ostream& err) {
  return guarded(err, [&] {
    const LoadedDataset loaded = load_manifest(manifest_path);
    AjiveConfig cfg = ajive_config_from_json(read_json(config_path));
    if (overrides.backend) cfg.backend = *overrides.backend;
    if (overrides.seed) cfg.segmentation.seed = *overrides.seed;
    cfg.validate(loaded.data);

    const AjiveResult res = decompose(loaded.data, cfg);
    const VarianceProportions vp = variance_explained(res, loaded.data);

    ensure_dir(output_dir);
    std::vector<std::string> outputs;
    const auto& data = loaded.data;
    const auto& subjects = loaded.subject_ids;

    json blocks = json::array();
    std::string tsv = "block\tcomponent\tproportion\n";
    for (std::size_t k = 0; k < data.num_blocks(); ++k) {
      const auto& d = res.per_block[k];
      const std::string name = data.name(k);
      const auto& vars = loaded.variable_ids[k];

      // Largest deviation of J + I + E from the input over observed cells.
      const Matrix sum = d.joint + d.individual + d.noise;
      double additivity = 0.0;
      const MissingMask* mask = data.mask(k);
      for (Eigen::Index j = 0; j < sum.cols(); ++j) {
        for (Eigen::Index i = 0; i < sum.rows(); ++i) {
          if (mask != nullptr && !(*mask)(i, j)) continue;
          additivity = std::max(additivity, std::abs(sum(i, j) - data.blocks[k](i, j)));
        }
      }
      const double tol = 1e-8 * std::max(1.0, data.blocks[k].cwiseAbs().maxCoeff());

      blocks.push_back({{"name", name},
                        {"variables", data.blocks[k].rows()},
                        {"individual_rank", d.individual_rank},
                        {"variance", {{"joint", vp[k].joint},
                                      {"individual", vp[k].individual},
                                      {"residual", vp[k].residual}}},
                        {"noise_scale", d.noise_scale},
                        {"individual_threshold", d.individual_threshold},
                        {"remainder_singular_values", d.remainder_singular_values},
                        {"additivity_max_abs_error", additivity},
                        {"additivity_ok", additivity <= tol}});

      const std::pair<const char*, const Matrix*> parts[] = {
          {"joint", &d.joint}, {"individual", &d.individual}, {"residual", &d.noise}};
      for (const auto& [label, m] : parts) {
        const std::string file = name + "_" + label + ".csv";
        write_file_atomic(output_dir / file, format_csv(*m, vars, subjects));
        outputs.push_back(file);
      }
      tsv += name + "\tjoint\t" + format_tsv_number(vp[k].joint) + "\n";
      tsv += name + "\tindividual\t" + format_tsv_number(vp[k].individual) + "\n";
      tsv += name + "\tresidual\t" + format_tsv_number(vp[k].residual) + "\n";
    }

    write_file_atomic(output_dir / "joint_scores.csv",
                      format_csv(res.joint_scores, subjects, numbered("joint", res.joint_rank)));
    outputs.push_back("joint_scores.csv");
    write_file_atomic(output_dir / "variance_explained.tsv", tsv);
    outputs.push_back("variance_explained.tsv");
    outputs.push_back("report.json");

    const json cfg_json = to_json(cfg);
    const auto& seg = res.segmentation;
    json report = {{"schema_version", kSchemaVersion},
                   {"metadata",
                    {{"config_hash", config_hash(cfg_json)},
                     {"seed", cfg.segmentation.seed},
                     {"version", kVersion}}},
                   {"config", cfg_json},
                   {"subjects", data.num_subjects()},
                   {"joint_rank", res.joint_rank},
                   {"segmentation",
                    {{"squared_singular_values", seg.squared_singular_values},
                     {"threshold", seg.threshold},
                     {"null_quantile", seg.null_quantile},
                     {"floor", seg.floor},
                     {"warnings", seg.warnings}}},
                   {"blocks", blocks},
                   {"outputs", outputs}};
    if (!all_finite(report)) throw PhaseError("report", -1, "non-finite value in the decomposition summary");
    write_file_atomic(output_dir / "report.json", report.dump(2) + "\n");
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// simulate / report
// ---------------------------------------------------------------------------

int cmd_simulate(const fs::path& study_path, const fs::path& output_dir, const CommandOverrides& overrides,
                 std::ostream& err) {
  return guarded(err, [&] {
    StudyConfig cfg = study_config_from_json(read_json(study_path));
    if (overrides.seed) {
      cfg.generator.seed = *overrides.seed;
      for (auto& s : cfg.scenarios) s.seed = *overrides.seed;
    }
    if (overrides.backend) cfg.methods = {*overrides.backend};
    if (overrides.workers) cfg.parallel_workers = *overrides.workers;
    if (overrides.replications) cfg.replications = *overrides.replications;
    cfg.validate();

    const StudyReport report = run_study(cfg);
    json j = to_json(report);
    if (!all_finite(j)) throw PhaseError("report", -1, "non-finite value in the study report");
    json files = kStudyTsvs;
    files.push_back("study_report.json");
    j["outputs"] = files;

    ensure_dir(output_dir);
    write_tsvs(report, output_dir);
    write_file_atomic(output_dir / "study_report.json", j.dump(2) + "\n");
    if (report.failed_replications > 0) {
      err << "warning: " << report.failed_replications << " of " << cfg.replications
          << " replications had failed decompositions\n";
    }
    return kExitOk;
  });
}

int cmd_report(const fs::path& report_path, const fs::path& output_dir, std::ostream& err) {
  return guarded(err, [&] {
    const StudyReport report = study_report_from_json(read_json(report_path));
    ensure_dir(output_dir);
    write_tsvs(report, output_dir);
    return kExitOk;
  });
}

}  // namespace jivekit
