#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "satformer/errors.hpp"
#include "satformer/gen.hpp"
#include "satformer/parallel.hpp"
#include "satformer/solver.hpp"
#include "satformer/trainer.hpp"

namespace {

using ordered_json = nlohmann::ordered_json;
using namespace satformer;

constexpr const char* kToolVersion = "0.1.0";

// Exit codes: 0 ok, 1 internal error, 2 usage/config, 3 I/O.
enum ExitCode { kOk = 0, kInternal = 1, kUsage = 2, kIo = 3 };

ordered_json load_config_file(const std::string& path) {
  if (path.empty()) return ordered_json::object();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  return ordered_json::parse(in);
}

// Precedence: explicit flag > config file > built-in default.
template <class T>
void merge_cfg(const ordered_json& cfg, CLI::App* cmd, const std::string& flag, T& var) {
  std::string key = flag;
  for (char& c : key) {
    if (c == '-') c = '_';
  }
  if (cmd->count("--" + flag) == 0 && cfg.contains(key)) {
    var = cfg.at(key).get<T>();
  }
}

void apply_env_seed(CLI::App* cmd, const ordered_json& cfg, uint64_t& seed) {
  if (cmd->count("--seed") > 0 || cfg.contains("seed")) return;
  const char* env = std::getenv("SATFORMER_SEED");
  if (env != nullptr && *env != '\0') seed = std::strtoull(env, nullptr, 10);
}

void write_json_file(const std::string& path, const ordered_json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

void write_manifest(const std::string& artifact_path, const std::string& subcommand,
                    uint64_t seed, const ordered_json& config, const ordered_json& inputs,
                    const ordered_json& outputs) {
  ordered_json m;
  m["tool_version"] = kToolVersion;
  m["subcommand"] = subcommand;
  m["seed"] = seed;
  m["config"] = config;
  m["inputs"] = inputs;
  m["outputs"] = outputs;
  write_json_file(artifact_path + ".manifest.json", m);
}

struct ScoresFile {
  double y_sat = 0.0;
  std::vector<double> y_clause;
};

ScoresFile load_scores(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open scores file: " + path);
  ordered_json j = ordered_json::parse(in);
  ScoresFile s;
  s.y_sat = j.at("y_sat").get<double>();
  s.y_clause = j.at("y_clause").get<std::vector<double>>();
  return s;
}

ordered_json stats_json(const SolveResult& r) {
  return ordered_json{{"verdict", verdict_name(r.verdict)},
                      {"decisions", r.stats.decisions},
                      {"conflicts", r.stats.conflicts},
                      {"propagations", r.stats.propagations},
                      {"learnt_clauses", r.stats.learnt_clauses},
                      {"restarts", r.stats.restarts}};
}

// ---- subcommand state ----

struct GenArgs {
  int m_min = 3, m_max = 10, count = 100, jobs = 0;
  uint64_t seed = 0;
  double p_bernoulli = 0.3, p_geometric = 0.4, cv = 0.0;
  std::string out, config_path;
};

struct TrainArgs {
  std::string data, out, config_path;
  int epochs = 80, batch = 16, dim = 128, iters = 10, window = 4, levels = 4, heads = 8;
  int shuffle_period = 10, jobs = 0;
  double lr = 1e-4, wd = 1e-10, p_clause = 1.0, p_sat = 1.0;
  uint64_t seed = 0;
  bool kl_uniform_target = false;
};

struct EvalArgs {
  std::string ckpt, data, out, config_path;
  double threshold = 0.5;
  int jobs = 0;
};

struct PredictArgs {
  std::string ckpt, cnf, out, attn_out;
};

struct SolveArgs {
  std::string cnf, scores, stats_out;
  int64_t conflict_limit = -1;
  double threshold = 0.5;
};

struct CompareArgs {
  std::string cnf, ckpt, out;
  int64_t conflict_limit = -1;
  double threshold = 0.5;
};

int run_gen(CLI::App* cmd, GenArgs& a) {
  ordered_json file_cfg = load_config_file(a.config_path);
  merge_cfg(file_cfg, cmd, "m-min", a.m_min);
  merge_cfg(file_cfg, cmd, "m-max", a.m_max);
  merge_cfg(file_cfg, cmd, "count", a.count);
  merge_cfg(file_cfg, cmd, "seed", a.seed);
  merge_cfg(file_cfg, cmd, "p-bernoulli", a.p_bernoulli);
  merge_cfg(file_cfg, cmd, "p-geometric", a.p_geometric);
  merge_cfg(file_cfg, cmd, "cv", a.cv);
  merge_cfg(file_cfg, cmd, "jobs", a.jobs);
  apply_env_seed(cmd, file_cfg, a.seed);

  GenParams params;
  params.m_min = a.m_min;
  params.m_max = a.m_max;
  params.p_bernoulli = a.p_bernoulli;
  params.p_geometric = a.p_geometric;
  params.seed = a.seed;
  int jobs = a.jobs > 0 ? a.jobs : default_jobs();

  GenSummary summary = generate_dataset(params, a.count, a.out, jobs, a.cv);

  ordered_json per_m = ordered_json::object();
  for (const auto& [m, c] : summary.per_m_counts) per_m[std::to_string(m)] = c;
  ordered_json sj{{"sat_count", summary.sat_count},
                  {"unsat_count", summary.unsat_count},
                  {"mean_cv", summary.mean_cv},
                  {"per_m_counts", per_m}};
  write_json_file(a.out + ".summary.json", sj);

  ordered_json cfg{{"m_min", a.m_min},       {"m_max", a.m_max},
                   {"count", a.count},       {"p_bernoulli", a.p_bernoulli},
                   {"p_geometric", a.p_geometric}, {"cv", a.cv},
                   {"jobs", jobs}};
  write_manifest(a.out, "gen", a.seed, cfg, ordered_json::object(),
                 ordered_json{{"dataset", a.out}, {"summary", a.out + ".summary.json"}});
  std::cout << "wrote " << (summary.sat_count + summary.unsat_count) << " records to " << a.out
            << " (sat " << summary.sat_count << ", unsat " << summary.unsat_count
            << ", mean CV " << summary.mean_cv << ")\n";
  return kOk;
}

int run_train(CLI::App* cmd, TrainArgs& a) {
  ordered_json file_cfg = load_config_file(a.config_path);
  merge_cfg(file_cfg, cmd, "epochs", a.epochs);
  merge_cfg(file_cfg, cmd, "batch", a.batch);
  merge_cfg(file_cfg, cmd, "lr", a.lr);
  merge_cfg(file_cfg, cmd, "wd", a.wd);
  merge_cfg(file_cfg, cmd, "p-clause", a.p_clause);
  merge_cfg(file_cfg, cmd, "p-sat", a.p_sat);
  merge_cfg(file_cfg, cmd, "seed", a.seed);
  merge_cfg(file_cfg, cmd, "dim", a.dim);
  merge_cfg(file_cfg, cmd, "iters", a.iters);
  merge_cfg(file_cfg, cmd, "window", a.window);
  merge_cfg(file_cfg, cmd, "levels", a.levels);
  merge_cfg(file_cfg, cmd, "heads", a.heads);
  merge_cfg(file_cfg, cmd, "shuffle-period", a.shuffle_period);
  merge_cfg(file_cfg, cmd, "jobs", a.jobs);
  merge_cfg(file_cfg, cmd, "kl-uniform-target", a.kl_uniform_target);
  apply_env_seed(cmd, file_cfg, a.seed);

  TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch;
  cfg.lr = a.lr;
  cfg.weight_decay = a.wd;
  cfg.clause_shuffle_period = a.shuffle_period;
  cfg.seed = a.seed;
  cfg.p_clause = a.p_clause;
  cfg.p_sat = a.p_sat;
  cfg.jobs = a.jobs;
  cfg.model.enc.dim = a.dim;
  cfg.model.enc.iterations = a.iters;
  cfg.model.hier.dim = a.dim;
  cfg.model.hier.window = a.window;
  cfg.model.hier.levels = a.levels;
  cfg.model.hier.heads = a.heads;
  cfg.model.kl_uniform_target = a.kl_uniform_target;

  std::vector<LabeledInstance> dataset = load_dataset_jsonl(a.data);
  TrainResult result = train(dataset, cfg, [](int epoch, double loss) {
    std::cout << "epoch " << epoch << " loss " << loss << std::endl;
  });

  save_model(a.out, result.model, &result, &cfg);
  ordered_json cj{{"epochs", a.epochs},
                  {"batch", a.batch},
                  {"lr", a.lr},
                  {"wd", a.wd},
                  {"p_clause", a.p_clause},
                  {"p_sat", a.p_sat},
                  {"dim", a.dim},
                  {"iters", a.iters},
                  {"window", a.window},
                  {"levels", a.levels},
                  {"heads", a.heads},
                  {"shuffle_period", a.shuffle_period},
                  {"kl_uniform_target", a.kl_uniform_target},
                  {"jobs", a.jobs}};
  write_manifest(a.out, "train", a.seed, cj, ordered_json{{"data", a.data}},
                 ordered_json{{"checkpoint", a.out}, {"meta", a.out + ".meta.json"}});
  std::cout << "trained " << result.iterations << " iterations; final epoch loss "
            << result.epoch_losses.back() << "; checkpoint " << a.out << " ("
            << ad::param_count(result.model.params) << " parameters)\n";
  return kOk;
}

int run_eval(CLI::App* cmd, EvalArgs& a) {
  ordered_json file_cfg = load_config_file(a.config_path);
  merge_cfg(file_cfg, cmd, "threshold", a.threshold);
  merge_cfg(file_cfg, cmd, "jobs", a.jobs);

  Model model = load_model(a.ckpt);
  std::vector<LabeledInstance> dataset = load_dataset_jsonl(a.data);
  EvalReport report = evaluate(model, dataset, a.threshold, a.jobs);
  std::ofstream out(a.out, std::ios::binary);
  if (!out) throw IoError("cannot write: " + a.out);
  out << eval_report_to_json(report) << '\n';
  write_manifest(a.out, "eval", 0, ordered_json{{"threshold", a.threshold}, {"jobs", a.jobs}},
                 ordered_json{{"ckpt", a.ckpt}, {"data", a.data}},
                 ordered_json{{"report", a.out}});
  std::cout << "accuracy " << report.accuracy << " over " << report.count << " instances\n";
  for (const auto& [key, b] : report.buckets) {
    std::cout << "  " << key << ": " << b.correct << "/" << b.count << "\n";
  }
  return kOk;
}

int run_attn(CLI::App* cmd, EvalArgs& a) {
  ordered_json file_cfg = load_config_file(a.config_path);
  merge_cfg(file_cfg, cmd, "jobs", a.jobs);

  Model model = load_model(a.ckpt);
  std::vector<LabeledInstance> dataset = load_dataset_jsonl(a.data);
  AttentionBreakdown b = attention_breakdown(model, dataset, a.jobs);
  std::ofstream out(a.out, std::ios::binary);
  if (!out) throw IoError("cannot write: " + a.out);
  out << breakdown_to_json(b) << '\n';
  write_manifest(a.out, "attn", 0, ordered_json{{"jobs", a.jobs}},
                 ordered_json{{"ckpt", a.ckpt}, {"data", a.data}},
                 ordered_json{{"breakdown", a.out}});
  std::cout << "attention split: CC " << b.cc << "% CU " << b.cu << "% UC " << b.uc << "% UU "
            << b.uu << "%\n";
  return kOk;
}

int run_predict(CLI::App*, PredictArgs& a) {
  Model model = load_model(a.ckpt);
  CnfInstance inst = parse_dimacs_file(a.cnf);
  if (inst.num_clauses() < 1) {
    throw std::invalid_argument("predict: instance has no clauses");
  }
  ad::Tape tape;
  ModelForward fwd = model.forward(tape, inst);
  ordered_json j{{"y_sat", fwd.y_sat}, {"y_clause", fwd.y_clause}};
  write_json_file(a.out, j);
  write_manifest(a.out, "predict", 0, ordered_json::object(),
                 ordered_json{{"ckpt", a.ckpt}, {"cnf", a.cnf}}, ordered_json{{"scores", a.out}});
  if (!a.attn_out.empty()) {
    ordered_json records = ordered_json::array();
    for (const AttentionRecord& rec : fwd.records) {
      ordered_json matrix = ordered_json::array();
      for (int r = 0; r < rec.matrix.rows; ++r) {
        ordered_json row = ordered_json::array();
        for (int c = 0; c < rec.matrix.cols; ++c) row.push_back(rec.matrix.at(r, c));
        matrix.push_back(row);
      }
      records.push_back(ordered_json{
          {"level", rec.level}, {"window", rec.window}, {"head", rec.head}, {"matrix", matrix}});
    }
    write_json_file(a.attn_out, records);
  }
  std::cout << "y_sat " << fwd.y_sat << " (" << (fwd.y_sat >= 0.5 ? "SAT" : "UNSAT")
            << " predicted) for " << a.cnf << "\n";
  return kOk;
}

int run_solve(CLI::App*, SolveArgs& a) {
  CnfInstance inst = parse_dimacs_file(a.cnf);
  SolverConfig cfg;
  cfg.conflict_limit = a.conflict_limit;

  SolveResult result;
  if (!a.scores.empty()) {
    ScoresFile s = load_scores(a.scores);
    InitialScores init = init_scores(var_clause_adjacency(inst), s.y_clause, s.y_sat, a.threshold);
    result = solve(inst, cfg, &init);
  } else {
    result = solve(inst, cfg, nullptr);
  }
  std::cout << verdict_name(result.verdict) << "\n";
  if (!a.stats_out.empty()) {
    ordered_json j = stats_json(result);
    if (result.verdict == Verdict::Sat) {
      std::vector<int> assignment;
      for (size_t v = 0; v < result.witness.size(); ++v) {
        assignment.push_back(result.witness[v] ? int(v + 1) : -int(v + 1));
      }
      j["witness"] = assignment;
    }
    write_json_file(a.stats_out, j);
    write_manifest(a.stats_out, "solve", 0,
                   ordered_json{{"conflict_limit", a.conflict_limit}, {"threshold", a.threshold}},
                   ordered_json{{"cnf", a.cnf}, {"scores", a.scores}},
                   ordered_json{{"stats", a.stats_out}});
  }
  return kOk;
}

int run_compare(CLI::App*, CompareArgs& a) {
  CnfInstance inst = parse_dimacs_file(a.cnf);
  if (inst.num_clauses() < 1) {
    throw std::invalid_argument("compare: instance has no clauses");
  }
  Model model = load_model(a.ckpt);
  ad::Tape tape;
  ModelForward fwd = model.forward(tape, inst);
  InitialScores init =
      init_scores(var_clause_adjacency(inst), fwd.y_clause, fwd.y_sat, a.threshold);
  SolverConfig cfg;
  cfg.conflict_limit = a.conflict_limit;
  CompareResult cmp = compare_runs(inst, cfg, init);

  ordered_json j{{"y_sat", fwd.y_sat},
                 {"without", stats_json(cmp.without_init)},
                 {"with", stats_json(cmp.with_init)},
                 {"lemma_reduction_pct", cmp.lemma_reduction_pct},
                 {"decision_reduction_pct", cmp.decision_reduction_pct}};
  std::cout << "verdict " << verdict_name(cmp.without_init.verdict) << "; lemmas "
            << cmp.without_init.stats.learnt_clauses << " -> "
            << cmp.with_init.stats.learnt_clauses << " (" << cmp.lemma_reduction_pct
            << "% reduction); decisions " << cmp.without_init.stats.decisions << " -> "
            << cmp.with_init.stats.decisions << " (" << cmp.decision_reduction_pct << "%)\n";
  if (!a.out.empty()) {
    write_json_file(a.out, j);
    write_manifest(a.out, "compare", 0,
                   ordered_json{{"conflict_limit", a.conflict_limit}, {"threshold", a.threshold}},
                   ordered_json{{"cnf", a.cnf}, {"ckpt", a.ckpt}},
                   ordered_json{{"stats", a.out}});
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"satformer: SR-pair generation, UNSAT-core model training, and CDCL solving"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  GenArgs gen_args;
  CLI::App* gen_cmd = app.add_subcommand("gen", "generate a labeled SR(m) dataset");
  gen_cmd->add_option("--m-min", gen_args.m_min, "smallest variable count");
  gen_cmd->add_option("--m-max", gen_args.m_max, "largest variable count");
  gen_cmd->add_option("--count", gen_args.count, "number of SR pairs (or instances with --cv)");
  gen_cmd->add_option("--seed", gen_args.seed, "RNG seed");
  gen_cmd->add_option("--p-bernoulli", gen_args.p_bernoulli, "clause length Bernoulli p");
  gen_cmd->add_option("--p-geometric", gen_args.p_geometric, "clause length geometric p");
  gen_cmd->add_option("--cv", gen_args.cv, "truncate to this clause/variable ratio and relabel");
  gen_cmd->add_option("--jobs", gen_args.jobs, "worker threads (default: logical cores)");
  gen_cmd->add_option("--out", gen_args.out, "output JSONL path")->required();
  gen_cmd->add_option("--config", gen_args.config_path, "JSON config file");

  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "train the model on a labeled dataset");
  train_cmd->add_option("--data", train_args.data, "dataset JSONL")->required();
  train_cmd->add_option("--epochs", train_args.epochs, "training epochs");
  train_cmd->add_option("--batch", train_args.batch, "batch size");
  train_cmd->add_option("--lr", train_args.lr, "Adam learning rate");
  train_cmd->add_option("--wd", train_args.wd, "decoupled weight decay");
  train_cmd->add_option("--p-clause", train_args.p_clause, "clause loss weight (0: no-core arm)");
  train_cmd->add_option("--p-sat", train_args.p_sat, "sat loss weight");
  train_cmd->add_option("--seed", train_args.seed, "RNG seed");
  train_cmd->add_option("--dim", train_args.dim, "embedding width");
  train_cmd->add_option("--iters", train_args.iters, "message-passing rounds");
  train_cmd->add_option("--window", train_args.window, "attention window size");
  train_cmd->add_option("--levels", train_args.levels, "hierarchy levels");
  train_cmd->add_option("--heads", train_args.heads, "attention heads");
  train_cmd->add_option("--shuffle-period", train_args.shuffle_period,
                        "iterations between clause shuffles (0: never)");
  train_cmd->add_option("--jobs", train_args.jobs, "worker threads");
  train_cmd->add_flag("--kl-uniform-target", train_args.kl_uniform_target,
                      "normalize the core mask to a distribution");
  train_cmd->add_option("--out", train_args.out, "checkpoint output path")->required();
  train_cmd->add_option("--config", train_args.config_path, "JSON config file");

  EvalArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--ckpt", eval_args.ckpt, "checkpoint path")->required();
  eval_cmd->add_option("--data", eval_args.data, "dataset JSONL")->required();
  eval_cmd->add_option("--threshold", eval_args.threshold, "SAT decision threshold");
  eval_cmd->add_option("--jobs", eval_args.jobs, "worker threads");
  eval_cmd->add_option("--out", eval_args.out, "report JSON path")->required();
  eval_cmd->add_option("--config", eval_args.config_path, "JSON config file");

  EvalArgs attn_args;
  CLI::App* attn_cmd = app.add_subcommand("attn", "attention-weight breakdown on a dataset");
  attn_cmd->add_option("--ckpt", attn_args.ckpt, "checkpoint path")->required();
  attn_cmd->add_option("--data", attn_args.data, "dataset JSONL")->required();
  attn_cmd->add_option("--jobs", attn_args.jobs, "worker threads");
  attn_cmd->add_option("--out", attn_args.out, "breakdown JSON path")->required();
  attn_cmd->add_option("--config", attn_args.config_path, "JSON config file");

  PredictArgs predict_args;
  CLI::App* predict_cmd = app.add_subcommand("predict", "score one CNF instance");
  predict_cmd->add_option("--ckpt", predict_args.ckpt, "checkpoint path")->required();
  predict_cmd->add_option("--cnf", predict_args.cnf, "DIMACS CNF file")->required();
  predict_cmd->add_option("--out", predict_args.out, "scores JSON path")->required();
  predict_cmd->add_option("--attn-out", predict_args.attn_out,
                          "also export per-window attention records as JSON");

  SolveArgs solve_args;
  CLI::App* solve_cmd = app.add_subcommand("solve", "run the CDCL solver on a CNF file");
  solve_cmd->add_option("--cnf", solve_args.cnf, "DIMACS CNF file")->required();
  solve_cmd->add_option("--scores", solve_args.scores, "scores JSON from predict");
  solve_cmd->add_option("--conflict-limit", solve_args.conflict_limit, "conflict budget");
  solve_cmd->add_option("--threshold", solve_args.threshold, "UNSAT-prediction threshold");
  solve_cmd->add_option("--stats-out", solve_args.stats_out, "stats JSON path");

  CompareArgs compare_args;
  CLI::App* compare_cmd =
      app.add_subcommand("compare", "paired solver runs with and without neural scores");
  compare_cmd->add_option("--cnf", compare_args.cnf, "DIMACS CNF file")->required();
  compare_cmd->add_option("--ckpt", compare_args.ckpt, "checkpoint path")->required();
  compare_cmd->add_option("--conflict-limit", compare_args.conflict_limit, "conflict budget");
  compare_cmd->add_option("--threshold", compare_args.threshold, "UNSAT-prediction threshold");
  compare_cmd->add_option("--out", compare_args.out, "paired stats JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (gen_cmd->parsed()) return run_gen(gen_cmd, gen_args);
    if (train_cmd->parsed()) return run_train(train_cmd, train_args);
    if (eval_cmd->parsed()) return run_eval(eval_cmd, eval_args);
    if (attn_cmd->parsed()) return run_attn(attn_cmd, attn_args);
    if (predict_cmd->parsed()) return run_predict(predict_cmd, predict_args);
    if (solve_cmd->parsed()) return run_solve(solve_cmd, solve_args);
    if (compare_cmd->parsed()) return run_compare(compare_cmd, compare_args);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}
