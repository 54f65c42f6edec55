#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wmlab/language_model.hpp"
#include "wmlab/synthetic.hpp"

namespace wmlab {

struct DatasetSpec {
  std::string name;
  std::string split;  // calibration | test
  std::size_t prompts = 0;
  std::string lead = "explain";
};

struct SchemeSettings {
  bool aaronson = true;
  std::size_t aaronson_n = 4;
  std::vector<double> kirchenbauer_deltas{0.5, 2.0, 3.0};
  std::size_t kirchenbauer_n = 4;
  double kirchenbauer_gamma = 0.25;
  bool bahri = true;
  std::size_t bahri_m = 64;
  std::size_t bahri_n = 4;
  bool kuditipudi = true;
  std::size_t kuditipudi_list_length = 64;
  std::size_t kuditipudi_n_ref = 200;
};

struct ClassifierSettings {
  std::size_t train_prompts = 200;
  std::size_t dim = 1u << 14;
  std::size_t epochs = 20;
  double lr = 0.5;
  bool length_augment = true;
};

struct AttackSettings {
  std::vector<double> token_replace_p{10, 20, 30, 40};
  bool paraphrase = false;
  double paraphrase_keep = 0.5;
  std::string paraphrase_command;  // empty: built-in resampler
  std::vector<std::string> schemes{"aaronson"};
};

struct EvalSettings {
  std::vector<std::size_t> lengths{25, 50, 75, 100, 150, 200, 250};
  std::size_t main_length = 200;
  double max_fpr = 0.01;
  double grid_pct = 1.0;
  std::size_t bootstrap = 1000;
  std::size_t bootstrap_pauc = 100;
  std::size_t bootstrap_curves = 200;
  std::vector<std::string> negatives{"theirs", "human"};
  std::vector<std::string> methods{"WM Only", "Det Only", "1S", "2S", "LR", "MLP", "Tree"};
  std::string calibration_dataset;
  std::string test_dataset;
};

/// Everything a run needs. Loaded from JSON; unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path work_dir;
  std::filesystem::path corpus_dir;  // defaults to work_dir/corpus
  WorldConfig world;
  std::size_t docs_per_register = 1500;
  std::size_t doc_words_min = 150;
  std::size_t doc_words_max = 350;
  std::size_t max_pieces = 5000;
  std::size_t lm_order = 4;
  double lm_alpha = 1e-7;
  std::size_t observer_small_order = 2;
  std::size_t observer_large_order = 4;
  std::vector<DatasetSpec> datasets;
  GenerationLimits limits{200, 250};
  std::size_t plain_per_prompt = 4;
  std::size_t entropy_horizon = 100;
  SchemeSettings schemes;
  std::vector<std::string> detectors{"llh", "rank", "lrr", "binoculars", "classifier"};
  std::map<std::string, std::string> external_detectors;  // name -> command
  ClassifierSettings classifier;
  AttackSettings attacks;
  EvalSettings eval;

  static RunConfig from_json(const std::string& text, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);
  std::string to_json() const;
  /// Hex SHA-256 of to_json().
  std::string digest() const;
  /// Throws ValidationError on inconsistent settings.
  void validate() const;

  /// Enabled scheme names: aaronson, kb-<delta>, bahri, kuditipudi.
  std::vector<std::string> scheme_names() const;

  std::filesystem::path corpus_path() const;
  std::filesystem::path models_path() const { return work_dir / "models"; }
  std::filesystem::path datasets_path() const { return work_dir / "datasets"; }
  std::filesystem::path scores_path() const { return work_dir / "scores"; }
  std::filesystem::path reports_path() const { return work_dir / "reports"; }
};

/// Stage entry points. Each reads its inputs from the work directory and
/// writes its outputs there; all randomness comes from RunConfig::seed.
void cmd_make_corpus(const RunConfig& cfg);
void cmd_train_lm(const RunConfig& cfg);
void cmd_references(const RunConfig& cfg);
void cmd_train_classifier(const RunConfig& cfg);
void cmd_generate(const RunConfig& cfg);
void cmd_entropy(const RunConfig& cfg);
/// Scores every manifest in the datasets directory (clean and attacked).
void cmd_score(const RunConfig& cfg);
void cmd_attack(const RunConfig& cfg);
void cmd_fit_hybrids(const RunConfig& cfg);
void cmd_evaluate(const RunConfig& cfg);
void cmd_report(const RunConfig& cfg);
/// All stages in order.
void cmd_run_all(const RunConfig& cfg);

/// Hex SHA-256 of a file's bytes.
std::string file_digest(const std::filesystem::path& path);

/// One row of a score table; empty optionals are written as empty cells.
struct ScoreRow {
  std::string record_id;
  std::string prompt_id;
  std::string dataset;
  std::string split;
  std::string source;
  bool positive = false;
  std::size_t length = 0;  // truncation length T
  std::size_t tokens = 0;  // tokens actually scored
  bool was_short = false;
  std::optional<double> entropy;
  std::optional<std::size_t> bucket;
  std::map<std::string, std::optional<double>> values;  // "wm:<scheme>" and "det:<name>"
};

struct ScoreTable {
  std::vector<std::string> columns;  // value columns, in file order
  std::vector<ScoreRow> rows;

  std::string to_csv() const;
  static ScoreTable from_csv(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static ScoreTable load(const std::filesystem::path& path);
};

}  // namespace wmlab
