#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "schema_check.hpp"

// End-to-end CLI pipeline in a scratch directory; every JSON artifact must
// validate against the shipped schemas.

namespace {

const std::string kCli = SATFORMER_CLI_PATH;
const std::string kSchemas = SATFORMER_SCHEMA_DIR;
const std::string kWork = SATFORMER_CLI_WORKDIR;

int run(const std::string& args) {
  std::string cmd = kCli + " " + args + " >> " + kWork + "/cli.log 2>&1";
  return std::system(cmd.c_str());
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(bool(in), path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void check_schema(const std::string& json_file, const std::string& schema) {
  try {
    schema_check::validate_file(json_file, kSchemas + "/" + schema);
  } catch (const std::exception& e) {
    FAIL_CHECK(json_file << " vs " << schema << ": " << e.what());
  }
}

}  // namespace

TEST_CASE("cli pipeline: artifacts, schemas, manifests") {
  std::string d = kWork;
  REQUIRE(std::system(("rm -rf " + d + " && mkdir -p " + d).c_str()) == 0);
  std::ofstream(d + "/eq2.cnf") << fixtures::unsat9_dimacs();

  REQUIRE(run("gen --m-min 3 --m-max 5 --count 6 --seed 3 --out " + d + "/data.jsonl --jobs 2") == 0);
  std::ifstream data(d + "/data.jsonl");
  std::string line;
  int records = 0;
  while (std::getline(data, line)) {
    ++records;
    std::ofstream(d + "/record.json") << line;
    check_schema(d + "/record.json", "dataset_record.schema.json");
  }
  CHECK(records == 12);
  check_schema(d + "/data.jsonl.summary.json", "gen_summary.schema.json");
  check_schema(d + "/data.jsonl.manifest.json", "manifest.schema.json");

  std::string train_flags =
      " --epochs 2 --batch 4 --dim 8 --iters 3 --window 3 --levels 2 --heads 2 --seed 5 --jobs 2";
  REQUIRE(run("train --data " + d + "/data.jsonl --out " + d + "/model.ckpt" + train_flags) == 0);
  check_schema(d + "/model.ckpt.manifest.json", "manifest.schema.json");
  CHECK(slurp(d + "/model.ckpt").substr(0, 8) == "SATFCKPT");

  REQUIRE(run("eval --ckpt " + d + "/model.ckpt --data " + d + "/data.jsonl --out " + d +
              "/eval.json --jobs 2") == 0);
  check_schema(d + "/eval.json", "eval_report.schema.json");

  REQUIRE(run("attn --ckpt " + d + "/model.ckpt --data " + d + "/data.jsonl --out " + d +
              "/attn.json --jobs 2") == 0);
  check_schema(d + "/attn.json", "attention_breakdown.schema.json");
  nlohmann::json attn = schema_check::load(d + "/attn.json");
  double total = attn["cc"].get<double>() + attn["cu"].get<double>() + attn["uc"].get<double>() +
                 attn["uu"].get<double>();
  CHECK(std::fabs(total - 100.0) < 0.01);

  REQUIRE(run("predict --ckpt " + d + "/model.ckpt --cnf " + d + "/eq2.cnf --out " + d +
              "/scores.json --attn-out " + d + "/records.json") == 0);
  check_schema(d + "/scores.json", "scores.schema.json");
  check_schema(d + "/records.json", "attention_records.schema.json");
  nlohmann::json attn_records = schema_check::load(d + "/records.json");
  CHECK(!attn_records.empty());
  for (const auto& rec : attn_records) {
    for (const auto& row : rec["matrix"]) {
      double s = 0.0;
      for (const auto& cell : row) s += cell.get<double>();
      CHECK(std::fabs(s - 1.0) < 1e-6);
    }
  }

  // verdict goes to stdout
  REQUIRE(std::system((kCli + " solve --cnf " + d + "/eq2.cnf > " + d + "/verdict.txt").c_str()) ==
          0);
  CHECK(slurp(d + "/verdict.txt") == "UNSAT\n");

  REQUIRE(run("solve --cnf " + d + "/eq2.cnf --scores " + d + "/scores.json --stats-out " + d +
              "/stats.json") == 0);
  check_schema(d + "/stats.json", "solve_stats.schema.json");

  REQUIRE(run("compare --cnf " + d + "/eq2.cnf --ckpt " + d + "/model.ckpt --out " + d +
              "/cmp.json") == 0);
  check_schema(d + "/cmp.json", "compare_stats.schema.json");

  // reruns with identical flags are byte-identical
  REQUIRE(run("gen --m-min 3 --m-max 5 --count 6 --seed 3 --out " + d + "/data2.jsonl --jobs 1") ==
          0);
  CHECK(slurp(d + "/data.jsonl") == slurp(d + "/data2.jsonl"));
  REQUIRE(run("train --data " + d + "/data.jsonl --out " + d + "/model2.ckpt" + train_flags) == 0);
  CHECK(slurp(d + "/model.ckpt") == slurp(d + "/model2.ckpt"));

  // config file merge: flag wins, config fills the rest
  std::ofstream(d + "/cfg.json") << R"({"m_min": 3, "m_max": 5, "count": 6, "seed": 3})";
  REQUIRE(run("gen --config " + d + "/cfg.json --count 6 --out " + d + "/data3.jsonl --jobs 2") ==
          0);
  CHECK(slurp(d + "/data.jsonl") == slurp(d + "/data3.jsonl"));
}

TEST_CASE("cli exit codes") {
  std::string d = kWork;
  REQUIRE(std::system(("mkdir -p " + d).c_str()) == 0);
  CHECK(run("gen --m-min 0 --m-max 4 --count 1 --out " + d + "/x.jsonl") == 2 << 8);
  CHECK(run("train --out " + d + "/x.ckpt") == 2 << 8);
  CHECK(run("solve --cnf " + d + "/does_not_exist.cnf") == 3 << 8);
  CHECK(run("nonsense") == 2 << 8);
  // empty dataset is a config error
  std::ofstream(d + "/empty.jsonl").close();
  CHECK(run("eval --ckpt " + d + "/model.ckpt --data " + d + "/empty.jsonl --out " + d +
            "/r.json") == 2 << 8);
}
