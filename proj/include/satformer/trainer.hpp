#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "satformer/dataset.hpp"
#include "satformer/model.hpp"

namespace satformer {

struct TrainConfig {
  int epochs = 80;
  int batch_size = 16;
  double lr = 1e-4;
  double weight_decay = 1e-10;
  int clause_shuffle_period = 10;  // iterations between clause re-permutations
  uint64_t seed = 0;
  double p_clause = 1.0;  // 0 reproduces the no-core ablation arm
  double p_sat = 1.0;
  int jobs = 0;  // 0: hardware default
  ModelConfig model;
};

struct TrainResult {
  Model model;
  std::vector<double> iteration_losses;
  std::vector<double> epoch_losses;
  int64_t iterations = 0;
};

// Per batch: encode, both heads, weighted loss, backward, Adam step.
// Gradients are averaged over the batch; instances run on worker threads and
// reduce in index order, so results are byte-identical for a fixed seed
// regardless of the thread count. Every clause_shuffle_period iterations the
// clause order (and core mask) of every dataset instance is re-permuted in
// unison. Throws on non-finite loss.
TrainResult train(std::vector<LabeledInstance> dataset, const TrainConfig& cfg,
                  const std::function<void(int, double)>& on_epoch = {});

struct BucketStats {
  int count = 0;
  int correct = 0;
};

struct EvalReport {
  int count = 0;
  int correct = 0;
  double accuracy = 0.0;
  double threshold = 0.5;
  std::map<std::string, BucketStats> buckets;  // "SR(a-b)/CV..." keys
  struct PerInstance {
    std::string id;
    double y_sat = 0.0;
    bool pred_sat = false;
    bool label_sat = false;
    int m = 0;
    int n = 0;
    double cv = 0.0;
  };
  std::vector<PerInstance> per_instance;
  // max |row sum - 1| over every attention record of the run
  double max_attention_row_err = 0.0;
};

EvalReport evaluate(const Model& model, const std::vector<LabeledInstance>& dataset,
                    double threshold = 0.5, int jobs = 0);

struct AttentionBreakdown {
  double cc = 0.0, cu = 0.0, uc = 0.0, uu = 0.0;  // percentages, sum 100
};

// Level-1 attention mass split by the median C/U clause categories from the
// per-clause scores; padding rows and columns excluded.
AttentionBreakdown attention_breakdown(const Model& model,
                                       const std::vector<LabeledInstance>& dataset,
                                       int jobs = 0);

// Aggregation core, exposed for direct testing: is_core[i] marks C-clauses.
void accumulate_breakdown(const std::vector<AttentionRecord>& records,
                          const std::vector<bool>& is_core, int n, int w, double sums[4]);

// Median split over per-clause scores: top floor(n/2) by score are
// C-clauses; the middle clause of an odd n goes to U. Ties break by index.
std::vector<bool> median_split(const std::vector<double>& scores);

// Checkpoint + sidecar "<path>.meta.json" holding the model configuration
// and training metadata.
void save_model(const std::string& path, const Model& model, const TrainResult* result,
                const TrainConfig* cfg);
Model load_model(const std::string& path);

std::string eval_report_to_json(const EvalReport& report);
std::string breakdown_to_json(const AttentionBreakdown& b);

// Re-permutes clause order and core mask in unison.
void permute_record(LabeledInstance& rec, Rng& rng);

}  // namespace satformer
