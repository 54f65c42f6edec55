#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "wmlab/language_model.hpp"
#include "wmlab/pipeline.hpp"
#include "wmlab/watermark.hpp"

namespace wmlab::detail {

extern const char* const kRegisterFiles[4];

std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

WatermarkKey scheme_key(const RunConfig& cfg, const std::string& scheme);
AaronsonConfig aaronson_config(const RunConfig& cfg);
KirchenbauerConfig kirchenbauer_config(const RunConfig& cfg, const std::string& scheme);
BahriConfig bahri_config(const RunConfig& cfg);
KuditipudiConfig kuditipudi_config(const RunConfig& cfg);

struct Models {
  Models(const RunConfig& cfg, bool observers);
  NGramModel ours;
  NGramModel theirs;
  std::unique_ptr<NGramModel> observer_small;
  std::unique_ptr<NGramModel> observer_large;
};

std::filesystem::path manifest_path(const RunConfig& cfg, const std::string& stem);
/// Manifest stems present in the datasets directory, sorted.
std::vector<std::string> manifest_stems(const RunConfig& cfg);
std::string p_label(double p);
/// "<dataset>@tr<p>"
std::string attack_stem(const std::string& dataset, double p);

}  // namespace wmlab::detail

namespace wmlab {
std::vector<std::string> score_columns(const RunConfig& cfg);
}
