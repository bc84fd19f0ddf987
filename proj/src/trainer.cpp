#include "satformer/trainer.hpp"
#include "satformer/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "satformer/gen.hpp"
#include "satformer/parallel.hpp"

namespace satformer {

using ordered_json = nlohmann::ordered_json;

namespace {

int resolve_jobs(int jobs) { return jobs > 0 ? jobs : default_jobs(); }

std::string sr_label(const std::vector<LabeledInstance>& dataset) {
  int lo = 0, hi = 0;
  for (const LabeledInstance& rec : dataset) {
    int m = rec.instance.num_vars;
    if (lo == 0 || m < lo) lo = m;
    hi = std::max(hi, m);
  }
  if (lo == hi) return "SR(" + std::to_string(lo) + ")";
  return "SR(" + std::to_string(lo) + "-" + std::to_string(hi) + ")";
}

std::string cv_label(double cv) {
  if (cv > 5.0) return "CV>5";
  return "CV=" + std::to_string(int(std::lround(cv)));
}

}  // namespace

void permute_record(LabeledInstance& rec, Rng& rng) {
  int n = rec.instance.num_clauses();
  std::vector<int> perm(size_t(n), 0);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  std::vector<Clause> clauses{size_t(n), Clause{}};
  std::vector<uint8_t> mask(size_t(n), 0);
  for (int i = 0; i < n; ++i) {
    clauses[size_t(i)] = std::move(rec.instance.clauses[size_t(perm[size_t(i)])]);
    mask[size_t(i)] = rec.core_mask[size_t(perm[size_t(i)])];
  }
  rec.instance.clauses = std::move(clauses);
  rec.core_mask = std::move(mask);
}

TrainResult train(std::vector<LabeledInstance> dataset, const TrainConfig& cfg,
                  const std::function<void(int, double)>& on_epoch) {
  if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");
  if (cfg.epochs < 1 || cfg.batch_size < 1) {
    throw std::invalid_argument("train: epochs and batch_size must be >= 1");
  }
  if (cfg.p_clause < 0 || cfg.p_sat < 0 || cfg.p_clause + cfg.p_sat <= 0) {
    throw std::invalid_argument("train: loss weights must be nonnegative with positive sum");
  }

  TrainResult result;
  result.model.cfg = cfg.model;
  result.model.init(cfg.seed);
  Model& model = result.model;

  ad::AdamState adam;
  ad::AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  adam_cfg.weight_decay = cfg.weight_decay;

  Rng order_rng = Rng::substream(cfg.seed, 0xBA7C);
  Rng shuffle_rng = Rng::substream(cfg.seed, 0x51AF);
  const int jobs = resolve_jobs(cfg.jobs);
  const int total = int(dataset.size());

  std::vector<int> order(size_t(total), 0);
  std::iota(order.begin(), order.end(), 0);

  int64_t iter = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    double epoch_loss = 0.0;
    int epoch_batches = 0;
    for (int start = 0; start < total; start += cfg.batch_size) {
      if (cfg.clause_shuffle_period > 0 && iter % cfg.clause_shuffle_period == 0) {
        for (LabeledInstance& rec : dataset) permute_record(rec, shuffle_rng);
      }
      int batch = std::min(cfg.batch_size, total - start);
      std::vector<std::vector<ad::Tensor>> slot_grads;
      slot_grads.resize(size_t(batch));
      std::vector<double> slot_loss(size_t(batch), 0.0);
      parallel_for(batch, jobs, [&](int bi) {
        const LabeledInstance& rec = dataset[size_t(order[size_t(start + bi)])];
        ad::Tape tape;
        ad::ParamBinding bind(tape, model.params);
        ModelForward fwd = model.forward(tape, bind, rec.instance);
        ad::Val loss = model.loss(tape, fwd, rec.is_sat, rec.core_mask, cfg.p_clause, cfg.p_sat);
        tape.backward(loss);
        slot_loss[size_t(bi)] = tape.value(loss).data[0];
        slot_grads[size_t(bi)] = model.params.zeros_like();
        bind.accumulate_grads(slot_grads[size_t(bi)]);
      });

      std::vector<ad::Tensor> grads = model.params.zeros_like();
      double batch_loss = 0.0;
      for (int bi = 0; bi < batch; ++bi) {
        batch_loss += slot_loss[size_t(bi)];
        for (size_t p = 0; p < grads.size(); ++p) {
          ad::Tensor& acc = grads[p];
          const ad::Tensor& g = slot_grads[size_t(bi)][p];
          for (size_t k = 0; k < acc.data.size(); ++k) acc.data[k] += g.data[k];
        }
      }
      batch_loss /= batch;
      if (!std::isfinite(batch_loss)) {
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 " iteration " + std::to_string(iter));
      }
      for (ad::Tensor& g : grads) {
        for (double& v : g.data) v /= batch;
      }
      ad::adam_step(model.params, adam, grads, adam_cfg);

      result.iteration_losses.push_back(batch_loss);
      epoch_loss += batch_loss;
      ++epoch_batches;
      ++iter;
    }
    result.epoch_losses.push_back(epoch_loss / epoch_batches);
    if (on_epoch) on_epoch(epoch, result.epoch_losses.back());
  }
  result.iterations = iter;
  return result;
}

EvalReport evaluate(const Model& model, const std::vector<LabeledInstance>& dataset,
                    double threshold, int jobs) {
  if (dataset.empty()) throw std::invalid_argument("evaluate: dataset is empty");
  EvalReport report;
  report.threshold = threshold;
  const int total = int(dataset.size());
  report.per_instance.resize(size_t(total));
  std::vector<double> row_err(size_t(total), 0.0);

  parallel_for(total, resolve_jobs(jobs), [&](int i) {
    const LabeledInstance& rec = dataset[size_t(i)];
    ad::Tape tape;
    ModelForward fwd = model.forward(tape, rec.instance);
    EvalReport::PerInstance& pi = report.per_instance[size_t(i)];
    pi.id = rec.id;
    pi.y_sat = fwd.y_sat;
    pi.pred_sat = fwd.y_sat >= threshold;
    pi.label_sat = rec.is_sat;
    pi.m = rec.instance.num_vars;
    pi.n = rec.instance.num_clauses();
    pi.cv = compute_cv(rec.instance);
    double err = 0.0;
    for (const AttentionRecord& r : fwd.records) {
      for (int row = 0; row < r.matrix.rows; ++row) {
        double s = 0.0;
        for (int col = 0; col < r.matrix.cols; ++col) s += r.matrix.at(row, col);
        err = std::max(err, std::fabs(s - 1.0));
      }
    }
    row_err[size_t(i)] = err;
  });

  std::string sr = sr_label(dataset);
  for (int i = 0; i < total; ++i) {
    const EvalReport::PerInstance& pi = report.per_instance[size_t(i)];
    bool ok = pi.pred_sat == pi.label_sat;
    report.count += 1;
    report.correct += ok ? 1 : 0;
    BucketStats& bucket = report.buckets[sr + "/" + cv_label(pi.cv)];
    bucket.count += 1;
    bucket.correct += ok ? 1 : 0;
    report.max_attention_row_err = std::max(report.max_attention_row_err, row_err[size_t(i)]);
  }
  report.accuracy = double(report.correct) / report.count;
  return report;
}

std::vector<bool> median_split(const std::vector<double>& scores) {
  const int n = int(scores.size());
  std::vector<int> idx(size_t(n), 0);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return scores[size_t(a)] > scores[size_t(b)]; });
  std::vector<bool> is_core(size_t(n), false);
  for (int r = 0; r < n / 2; ++r) is_core[size_t(idx[size_t(r)])] = true;
  return is_core;
}

void accumulate_breakdown(const std::vector<AttentionRecord>& records,
                          const std::vector<bool>& is_core, int n, int w, double sums[4]) {
  for (const AttentionRecord& rec : records) {
    if (rec.level != 1) continue;
    int base = rec.window * w;
    for (int r = 0; r < rec.matrix.rows; ++r) {
      int q = base + r;
      if (q >= n) continue;  // padding row
      for (int c = 0; c < rec.matrix.cols; ++c) {
        int k = base + c;
        if (k >= n) continue;  // padding column
        int cat_q = is_core[size_t(q)] ? 0 : 1;
        int cat_k = is_core[size_t(k)] ? 0 : 1;
        sums[cat_q * 2 + cat_k] += rec.matrix.at(r, c);
      }
    }
  }
}

AttentionBreakdown attention_breakdown(const Model& model,
                                       const std::vector<LabeledInstance>& dataset, int jobs) {
  if (dataset.empty()) throw std::invalid_argument("attention_breakdown: dataset is empty");
  const int total = int(dataset.size());
  std::vector<std::array<double, 4>> slot_sums(size_t(total), {0.0, 0.0, 0.0, 0.0});
  parallel_for(total, resolve_jobs(jobs), [&](int i) {
    const LabeledInstance& rec = dataset[size_t(i)];
    ad::Tape tape;
    ModelForward fwd = model.forward(tape, rec.instance);
    std::vector<bool> is_core = median_split(fwd.s_clause);
    accumulate_breakdown(fwd.records, is_core, rec.instance.num_clauses(), model.cfg.hier.window,
                         slot_sums[size_t(i)].data());
  });
  double sums[4] = {0, 0, 0, 0};
  for (const auto& s : slot_sums) {
    for (int k = 0; k < 4; ++k) sums[k] += s[size_t(k)];
  }
  double totalw = sums[0] + sums[1] + sums[2] + sums[3];
  AttentionBreakdown out;
  if (totalw > 0) {
    out.cc = sums[0] / totalw * 100.0;
    out.cu = sums[1] / totalw * 100.0;
    out.uc = sums[2] / totalw * 100.0;
    out.uu = sums[3] / totalw * 100.0;
  }
  return out;
}

void save_model(const std::string& path, const Model& model, const TrainResult* result,
                const TrainConfig* cfg) {
  ad::save_checkpoint(path, model.params);
  ordered_json meta;
  meta["model"] = {{"dim", model.cfg.enc.dim},
                   {"iterations", model.cfg.enc.iterations},
                   {"window", model.cfg.hier.window},
                   {"levels", model.cfg.hier.levels},
                   {"heads", model.cfg.hier.heads},
                   {"kl_uniform_target", model.cfg.kl_uniform_target}};
  meta["param_count"] = ad::param_count(model.params);
  if (cfg != nullptr) {
    meta["train"] = {{"epochs", cfg->epochs},
                     {"batch_size", cfg->batch_size},
                     {"lr", cfg->lr},
                     {"weight_decay", cfg->weight_decay},
                     {"clause_shuffle_period", cfg->clause_shuffle_period},
                     {"seed", cfg->seed},
                     {"p_clause", cfg->p_clause},
                     {"p_sat", cfg->p_sat}};
  }
  if (result != nullptr) {
    meta["curve"] = {{"iterations", result->iterations},
                     {"epoch_losses", result->epoch_losses},
                     {"iteration_losses", result->iteration_losses}};
  }
  std::ofstream out(path + ".meta.json", std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint meta: " + path + ".meta.json");
  out << meta.dump(2) << '\n';
}

Model load_model(const std::string& path) {
  std::ifstream meta_in(path + ".meta.json", std::ios::binary);
  if (!meta_in) {
    throw IoError("missing checkpoint meta sidecar: " + path + ".meta.json");
  }
  ordered_json meta = ordered_json::parse(meta_in);
  Model model;
  model.cfg.enc.dim = meta["model"]["dim"].get<int>();
  model.cfg.enc.iterations = meta["model"]["iterations"].get<int>();
  model.cfg.hier.dim = model.cfg.enc.dim;
  model.cfg.hier.window = meta["model"]["window"].get<int>();
  model.cfg.hier.levels = meta["model"]["levels"].get<int>();
  model.cfg.hier.heads = meta["model"]["heads"].get<int>();
  model.cfg.kl_uniform_target = meta["model"]["kl_uniform_target"].get<bool>();
  model.params = ad::load_checkpoint(path);
  return model;
}

std::string eval_report_to_json(const EvalReport& report) {
  ordered_json j;
  j["count"] = report.count;
  j["correct"] = report.correct;
  j["accuracy"] = report.accuracy;
  j["threshold"] = report.threshold;
  j["max_attention_row_err"] = report.max_attention_row_err;
  ordered_json buckets = ordered_json::object();
  for (const auto& [key, b] : report.buckets) {
    buckets[key] = {{"count", b.count},
                    {"correct", b.correct},
                    {"accuracy", double(b.correct) / b.count}};
  }
  j["buckets"] = buckets;
  ordered_json per = ordered_json::array();
  for (const auto& pi : report.per_instance) {
    per.push_back({{"id", pi.id},
                   {"y_sat", pi.y_sat},
                   {"pred_sat", pi.pred_sat},
                   {"label_sat", pi.label_sat},
                   {"m", pi.m},
                   {"n", pi.n},
                   {"cv", pi.cv}});
  }
  j["per_instance"] = per;
  return j.dump(2);
}

std::string breakdown_to_json(const AttentionBreakdown& b) {
  ordered_json j;
  j["cc"] = b.cc;
  j["cu"] = b.cu;
  j["uc"] = b.uc;
  j["uu"] = b.uu;
  return j.dump(2);
}

}  // namespace satformer
