#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "satformer/cnf.hpp"

namespace satformer {

// One dataset record: instance plus satisfiability label and core mask.
struct LabeledInstance {
  std::string id;
  CnfInstance instance;
  bool is_sat = false;
  std::vector<uint8_t> core_mask;  // length n; all zeros when is_sat
  bool minimal_only = false;       // core is irreducible but not proven minimum
};

// JSONL, one record per line:
// {"id": ..., "dimacs": ..., "is_sat": ..., "core_mask": [...], "m": ..., "n": ...}
// plus "minimal_only": true when the deletion fallback labeled the core.
std::string record_to_json_line(const LabeledInstance& rec);
LabeledInstance record_from_json_line(const std::string& line);

void write_dataset_jsonl(const std::string& path, const std::vector<LabeledInstance>& records);
std::vector<LabeledInstance> load_dataset_jsonl(const std::string& path);

}  // namespace satformer
