#include "wmlab/dataset.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "wmlab/error.hpp"

namespace wmlab {

std::string DatasetRecord::scheme() const {
  return watermarked() ? source.substr(std::string("ours-watermarked:").size()) : std::string();
}

std::string to_jsonl_line(const DatasetRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["prompt_id"] = r.prompt_id;
  j["dataset"] = r.dataset;
  j["split"] = r.split;
  j["label"] = r.positive ? "positive" : "negative";
  j["source"] = r.source;
  j["prompt"] = r.prompt;
  j["response"] = r.response;
  j["entropy"] = r.entropy ? nlohmann::ordered_json(*r.entropy) : nlohmann::ordered_json(nullptr);
  j["bucket"] = r.bucket ? nlohmann::ordered_json(*r.bucket) : nlohmann::ordered_json(nullptr);
  if (r.attack) {
    j["attack"] = {{"kind", r.attack->kind}, {"p_percent", r.attack->p_percent}, {"seed", r.attack->seed}};
  } else {
    j["attack"] = nullptr;
  }
  return j.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

DatasetRecord from_jsonl_line(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    DatasetRecord r;
    r.id = j.at("id");
    r.prompt_id = j.at("prompt_id");
    r.dataset = j.at("dataset");
    r.split = j.at("split");
    const std::string label = j.at("label");
    if (label != "positive" && label != "negative") throw DataError("record " + r.id + " has label '" + label + "'");
    r.positive = label == "positive";
    r.source = j.at("source");
    r.prompt = j.at("prompt");
    r.response = j.at("response");
    if (!j.at("entropy").is_null()) r.entropy = j.at("entropy").get<double>();
    if (!j.at("bucket").is_null()) r.bucket = j.at("bucket").get<std::size_t>();
    if (!j.at("attack").is_null()) {
      const auto& a = j.at("attack");
      r.attack = AttackProvenance{a.at("kind"), a.at("p_percent"), a.at("seed")};
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed manifest line: ") + e.what());
  }
}

void validate_dataset(const Dataset& d) {
  std::set<std::string> ids;
  for (const auto& r : d) {
    if (r.id.empty()) throw DataError("manifest record without id");
    if (!ids.insert(r.id).second) throw DataError("duplicate record id " + r.id);
    if (r.split != "calibration" && r.split != "test") {
      throw DataError("record " + r.id + " has no valid split tag (got '" + r.split + "')");
    }
    const bool ours = r.watermarked() || r.source == "ours-plain";
    if (!ours && r.source != "theirs" && r.source != "human") {
      throw DataError("record " + r.id + " has unknown source '" + r.source + "'");
    }
    if (ours != r.positive) throw DataError("record " + r.id + " label does not match its source");
  }
}

void write_manifest(const std::filesystem::path& path, const Dataset& d) {
  validate_dataset(d);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest " + path.string());
  for (const auto& r : d) out << to_jsonl_line(r) << '\n';
}

Dataset read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read manifest " + path.string());
  Dataset d;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) d.push_back(from_jsonl_line(line));
  }
  validate_dataset(d);
  return d;
}

}  // namespace wmlab
