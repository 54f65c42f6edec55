#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace wmlab {

/// Provenance of an attacked response.
struct AttackProvenance {
  std::string kind;  // token_replace | paraphrase
  double p_percent = 0.0;
  std::uint64_t seed = 0;
};

/// One manifest line. `source` is ours-watermarked:<scheme>, ours-plain,
/// theirs or human; `label` is positive for our model's text.
struct DatasetRecord {
  std::string id;
  std::string prompt_id;
  std::string dataset;
  std::string split;  // calibration | test
  std::string prompt;
  std::string response;
  bool positive = false;
  std::string source;
  std::optional<double> entropy;
  std::optional<std::size_t> bucket;
  std::optional<AttackProvenance> attack;

  bool watermarked() const { return source.rfind("ours-watermarked:", 0) == 0; }
  /// Scheme name for watermarked records, empty otherwise.
  std::string scheme() const;
};

using Dataset = std::vector<DatasetRecord>;

std::string to_jsonl_line(const DatasetRecord& r);
DatasetRecord from_jsonl_line(const std::string& line);

/// Checks ids are unique and split/label/source fields are well formed.
void validate_dataset(const Dataset& d);

void write_manifest(const std::filesystem::path& path, const Dataset& d);
Dataset read_manifest(const std::filesystem::path& path);

}  // namespace wmlab
