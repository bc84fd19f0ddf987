#pragma once

#include <vector>

#include "satformer/autodiff.hpp"

namespace satformer {

struct HierConfig {
  int window = 4;
  int levels = 4;
  int heads = 8;
  int dim = 128;
};

// One head's attention matrix for one window; rows sum to 1.
struct AttentionRecord {
  int level = 0;
  int window = 0;
  int head = 0;
  ad::Tensor matrix;  // w x w
};

struct AttentionOut {
  ad::Val updated;  // t x d
  std::vector<ad::Tensor> head_matrices;
};

struct UnitOut {
  ad::Val group;           // 1 x d
  ad::Val updated_tokens;  // w x d, the post-block rows feeding level pools
  std::vector<ad::Tensor> head_matrices;
};

struct HierOutput {
  ad::Val y_sat;  // 1 x 1, in (0,1)
  std::vector<AttentionRecord> records;
  std::vector<int> window_counts;     // D^l for l = 1..levels
  std::vector<ad::Val> level_groups;  // G^l matrix (D^l x d) per level
  std::vector<ad::Val> level_embeddings;  // F^0..F^L
};

// D^l: number of windows at level l for n clauses, window w.
int window_count(int n, int w, int l);

// Level-1 window composition: [start, end) of real token indices per window.
std::vector<std::pair<int, int>> level1_windows(int n, int w);

void init_hier_params(ad::ParamStore& params, const HierConfig& cfg, Rng& rng);

// Bare multi-head self-attention: per-head scale 1/sqrt(d/heads), heads
// concatenated then output-projected. Level selects the parameter set.
AttentionOut self_attention(ad::ParamBinding& bind, ad::Val tokens, int level,
                            const HierConfig& cfg);

// Attention Unit: transformer block (attention + residual, feed-forward
// d->4d->d + residual) over one padded window, then the w rows flattened
// through the (w*d)->d combiner into one group embedding.
UnitOut attention_unit(ad::ParamBinding& bind, ad::Val window_tokens, int level,
                       const HierConfig& cfg);

// Column-wise max over the first real_rows rows (padding excluded).
ad::Val level_embedding(ad::Val tokens, int real_rows);

// MLP over Cat(F^0..F^L, G^L*) followed by a logistic squash.
ad::Val readout(ad::ParamBinding& bind, const std::vector<ad::Val>& level_embeddings,
                ad::Val final_groups, const HierConfig& cfg);

// Full hierarchy over clause embeddings H^0 (n x d, n >= 1).
HierOutput hier_forward(ad::ParamBinding& bind, ad::Val h0, const HierConfig& cfg);

}  // namespace satformer
