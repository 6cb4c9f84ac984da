#pragma once

// File formats: multi-block CSV manifests, JSON configs and reports, and
// plot-ready TSV summaries.

#include "jivekit/ajive.hpp"
#include "jivekit/simulation.hpp"
#include "jivekit/types.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace jivekit {

inline constexpr const char* kSchemaVersion = "1";
inline constexpr const char* kVersion = "0.1.0";

// Malformed or inconsistent input file.
class ParseError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

enum class Orientation { variables_in_rows, variables_in_columns };

struct ManifestBlock {
  std::string name;
  std::filesystem::path csv_path;
  Orientation orientation = Orientation::variables_in_rows;
};

struct DatasetManifest {
  std::vector<ManifestBlock> blocks;
  std::string missing_token = "NA";
  bool center_rows = false;
  bool scale_rows = false;
};

struct LabeledMatrix {
  Matrix values;  // variables x subjects
  MissingMask observed;
  std::vector<std::string> variable_ids;
  std::vector<std::string> subject_ids;
  bool has_missing = false;
};

struct LoadedDataset {
  MultiBlockDataset data;
  std::vector<std::vector<std::string>> variable_ids;
  std::vector<std::string> subject_ids;
};

// ---- CSV ------------------------------------------------------------------

LabeledMatrix parse_csv(const std::string& text, const std::string& missing_token,
                        Orientation orientation, const std::string& source = "<csv>");
LabeledMatrix read_csv(const std::filesystem::path& path, const std::string& missing_token,
                       Orientation orientation);
std::string format_csv(const Matrix& m, const std::vector<std::string>& row_ids,
                       const std::vector<std::string>& col_ids);

// ---- manifests --------------------------------------------------------------

// Relative csv paths resolve against base_dir.
DatasetManifest parse_manifest(const nlohmann::json& j, const std::filesystem::path& base_dir);
DatasetManifest read_manifest(const std::filesystem::path& path);
LoadedDataset load_dataset(const DatasetManifest& manifest);
LoadedDataset load_manifest(const std::filesystem::path& path);

// Row centering / scaling over observed cells.
void preprocess_rows(LabeledMatrix& m, bool center, bool scale, const std::string& block_name);

// ---- JSON <-> config types ----------------------------------------------

nlohmann::json to_json(const HuberConfig& c);
nlohmann::json to_json(const SegmentationConfig& c);
nlohmann::json to_json(const AjiveConfig& c);
nlohmann::json to_json(const GeneratorConfig& c);
nlohmann::json to_json(const OutlierConfig& c);
nlohmann::json to_json(const StudyConfig& c);
nlohmann::json to_json(const MetricRecord& r);
nlohmann::json to_json(const GroupAggregate& g);
nlohmann::json to_json(const StudyReport& r);

HuberConfig huber_from_json(const nlohmann::json& j);
SegmentationConfig segmentation_from_json(const nlohmann::json& j);
AjiveConfig ajive_config_from_json(const nlohmann::json& j);
GeneratorConfig generator_from_json(const nlohmann::json& j);
OutlierConfig outlier_from_json(const nlohmann::json& j);
StudyConfig study_config_from_json(const nlohmann::json& j);
MetricRecord record_from_json(const nlohmann::json& j);
StudyReport study_report_from_json(const nlohmann::json& j);

// Throws ParseError naming both versions when schema_version is not current.
void check_schema_version(const nlohmann::json& j, const std::string& what);

nlohmann::json read_json(const std::filesystem::path& path);

// FNV-1a over the compact dump, hex encoded.
std::string config_hash(const nlohmann::json& j);

// ---- summaries --------------------------------------------------------------

// 6 significant digits.
std::string format_tsv_number(double x);

std::string ranks_median_tsv(const StudyReport& r);
std::string sre_tsv(const StudyReport& r);
std::string auc_tsv(const StudyReport& r);
std::string variance_tsv(const StudyReport& r);

// Writes to a temporary sibling and renames over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace jivekit
