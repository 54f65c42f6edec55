#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wmlab/error.hpp"
#include "wmlab/fixtures.hpp"
#include "wmlab/pipeline.hpp"

namespace {

struct Stage {
  const char* name;
  const char* help;
  void (*run)(const wmlab::RunConfig&);
};

const Stage kStages[] = {
    {"make-corpus", "Write the synthetic training corpora", wmlab::cmd_make_corpus},
    {"train-lm", "Build the vocabulary and train the n-gram models", wmlab::cmd_train_lm},
    {"references", "Precompute Kuditipudi null reference tables", wmlab::cmd_references},
    {"train-classifier", "Train the hashed n-gram classifier", wmlab::cmd_train_classifier},
    {"generate", "Generate the prompt/response manifests", wmlab::cmd_generate},
    {"entropy", "Estimate response entropy and assign quintiles", wmlab::cmd_entropy},
    {"attack", "Write corrupted copies of the manifests", wmlab::cmd_attack},
    {"score", "Score every manifest at every truncation length", wmlab::cmd_score},
    {"fit-hybrids", "Fit learned combiners on calibration scores", wmlab::cmd_fit_hybrids},
    {"evaluate", "Calibrate, test and bootstrap all methods", wmlab::cmd_evaluate},
    {"report", "Write the markdown summary and plot data", wmlab::cmd_report},
    {"run", "Run every stage in order", wmlab::cmd_run_all},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wmlab: watermark and detector evaluation toolkit"};
  app.require_subcommand(1);
  std::string config_path;
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress stage timing");

  std::vector<std::pair<CLI::App*, const Stage*>> subs;
  for (const auto& s : kStages) {
    auto* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("-c,--config", config_path, "Run configuration (JSON)")->required();
    subs.emplace_back(sub, &s);
  }
  std::string fixture_dir = WMLAB_DEFAULT_FIXTURE_DIR;
  auto* test = app.add_subcommand("test", "Run the golden fixture suite");
  test->add_option("-d,--fixtures", fixture_dir, "Fixture directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (test->parsed()) {
      const auto report = wmlab::run_fixture_suite(fixture_dir);
      std::cout << report.text;
      return report.failures == 0 ? 0 : 1;
    }
    const auto cfg = wmlab::RunConfig::load(config_path);
    for (const auto& [sub, stage] : subs) {
      if (!sub->parsed()) continue;
      const auto t0 = std::chrono::steady_clock::now();
      stage->run(cfg);
      if (!quiet) {
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::fprintf(stderr, "%s: done in %.1fs\n", stage->name, secs);
      }
    }
  } catch (const wmlab::ValidationError& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return 2;
  } catch (const wmlab::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
