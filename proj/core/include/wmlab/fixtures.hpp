#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace wmlab {

struct FixtureReport {
  std::size_t passed = 0;
  std::size_t failures = 0;
  std::vector<std::string> failed;  // "<fixture>#<case>"
  std::string text;                 // one line per case
};

/// Runs every *.json fixture in `dir`. Each file names an operation, how its
/// expected values were obtained, and a list of cases with tolerances.
/// Throws DataError when the directory is missing or holds no fixtures.
FixtureReport run_fixture_suite(const std::filesystem::path& dir);

/// Operation names the suite knows how to execute.
std::vector<std::string> fixture_operations();

}  // namespace wmlab
