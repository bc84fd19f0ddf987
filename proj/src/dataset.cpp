#include "satformer/dataset.hpp"
#include "satformer/errors.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace satformer {

using ordered_json = nlohmann::ordered_json;

std::string record_to_json_line(const LabeledInstance& rec) {
  ordered_json j;
  j["id"] = rec.id;
  j["dimacs"] = serialize_dimacs(rec.instance);
  j["is_sat"] = rec.is_sat;
  j["core_mask"] = rec.core_mask;
  j["m"] = rec.instance.num_vars;
  j["n"] = rec.instance.num_clauses();
  if (rec.minimal_only) j["minimal_only"] = true;
  return j.dump();
}

LabeledInstance record_from_json_line(const std::string& line) {
  ordered_json j = ordered_json::parse(line);
  LabeledInstance rec;
  rec.id = j.at("id").get<std::string>();
  rec.instance = parse_dimacs(j.at("dimacs").get<std::string>());
  rec.is_sat = j.at("is_sat").get<bool>();
  rec.core_mask = j.at("core_mask").get<std::vector<uint8_t>>();
  rec.minimal_only = j.value("minimal_only", false);
  if (int(rec.core_mask.size()) != rec.instance.num_clauses()) {
    throw std::runtime_error("dataset record " + rec.id + ": core_mask length mismatch");
  }
  if (j.at("m").get<int>() != rec.instance.num_vars ||
      j.at("n").get<int>() != rec.instance.num_clauses()) {
    throw std::runtime_error("dataset record " + rec.id + ": m/n fields disagree with dimacs");
  }
  return rec;
}

void write_dataset_jsonl(const std::string& path, const std::vector<LabeledInstance>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset: " + path);
  for (const LabeledInstance& rec : records) {
    out << record_to_json_line(rec) << '\n';
  }
  if (!out) throw IoError("dataset write failed: " + path);
}

std::vector<LabeledInstance> load_dataset_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset: " + path);
  std::vector<LabeledInstance> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(record_from_json_line(line));
  }
  return records;
}

}  // namespace satformer
