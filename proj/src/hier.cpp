#include "satformer/hier.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "satformer/gnn.hpp"

namespace satformer {

using namespace ad;

namespace {

std::string level_prefix(int level) { return "hier.l" + std::to_string(level) + "."; }

void validate(const HierConfig& cfg) {
  if (cfg.window < 2) throw std::invalid_argument("hier config: window must be >= 2");
  if (cfg.levels < 1) throw std::invalid_argument("hier config: levels must be >= 1");
  if (cfg.heads < 1 || cfg.dim % cfg.heads != 0) {
    throw std::invalid_argument("hier config: dim must be divisible by heads");
  }
}

}  // namespace

int window_count(int n, int w, int l) {
  if (n < 1 || w < 2 || l < 1) throw std::invalid_argument("window_count: n>=1, w>=2, l>=1");
  int64_t denom = 1;
  for (int i = 0; i < l; ++i) denom *= w;
  return int((int64_t(n) + denom - 1) / denom);
}

std::vector<std::pair<int, int>> level1_windows(int n, int w) {
  int d1 = window_count(n, w, 1);
  std::vector<std::pair<int, int>> out;
  out.reserve(size_t(d1));
  for (int i = 0; i < d1; ++i) {
    out.emplace_back(i * w, std::min((i + 1) * w, n));
  }
  return out;
}

void init_hier_params(ParamStore& params, const HierConfig& cfg, Rng& rng) {
  validate(cfg);
  int d = cfg.dim;
  double s = 1.0 / std::sqrt(double(d));
  for (int l = 1; l <= cfg.levels; ++l) {
    std::string p = level_prefix(l);
    params.add(p + "wq", Tensor::randn(d, d, s, rng));
    params.add(p + "wk", Tensor::randn(d, d, s, rng));
    params.add(p + "wv", Tensor::randn(d, d, s, rng));
    params.add(p + "wo", Tensor::randn(d, d, s, rng));
    params.add(p + "ff.w1", Tensor::randn(d, 4 * d, s, rng));
    params.add(p + "ff.b1", Tensor::zeros(1, 4 * d));
    params.add(p + "ff.w2", Tensor::randn(4 * d, d, 1.0 / std::sqrt(4.0 * d), rng));
    params.add(p + "ff.b2", Tensor::zeros(1, d));
    params.add(p + "comb.w", Tensor::randn(cfg.window * d, d, 1.0 / std::sqrt(double(cfg.window) * d), rng));
    params.add(p + "comb.b", Tensor::zeros(1, d));
  }
  init_mlp3(params, "hier.readout.", (cfg.levels + 2) * d, d, 1, rng);
}

AttentionOut self_attention(ParamBinding& P, Val tokens, int level, const HierConfig& cfg) {
  validate(cfg);
  std::string p = level_prefix(level);
  const int dh = cfg.dim / cfg.heads;
  const double att_scale = 1.0 / std::sqrt(double(dh));
  Val q = matmul(tokens, P(p + "wq"));
  Val k = matmul(tokens, P(p + "wk"));
  Val v = matmul(tokens, P(p + "wv"));
  std::vector<Val> head_outs;
  std::vector<Tensor> matrices;
  head_outs.reserve(size_t(cfg.heads));
  for (int h = 0; h < cfg.heads; ++h) {
    Val qh = slice_cols(q, h * dh, dh);
    Val kh = slice_cols(k, h * dh, dh);
    Val vh = slice_cols(v, h * dh, dh);
    Val attn = softmax_rows(scale(matmul_nt(qh, kh), att_scale));
    matrices.push_back(tokens.tape->value(attn));
    head_outs.push_back(matmul(attn, vh));
  }
  Val updated = matmul(concat_cols(head_outs), P(p + "wo"));
  return AttentionOut{updated, std::move(matrices)};
}

UnitOut attention_unit(ParamBinding& P, Val window_tokens, int level, const HierConfig& cfg) {
  const Tensor& in = window_tokens.tape->value(window_tokens);
  if (in.rows != cfg.window) {
    throw ShapeError("attention_unit: expected " + std::to_string(cfg.window) +
                     " padded token rows, got " + in.shape_str());
  }
  std::string p = level_prefix(level);
  AttentionOut att = self_attention(P, window_tokens, level, cfg);
  Val x1 = window_tokens + att.updated;
  Val ff = linear(relu(linear(x1, P(p + "ff.w1"), P(p + "ff.b1"))), P(p + "ff.w2"),
                  P(p + "ff.b2"));
  Val x2 = x1 + ff;
  Val group = linear(reshape(x2, 1, cfg.window * cfg.dim), P(p + "comb.w"), P(p + "comb.b"));
  return UnitOut{group, x2, std::move(att.head_matrices)};
}

Val level_embedding(Val tokens, int real_rows) {
  return max_pool_rows(slice_rows(tokens, 0, real_rows));
}

Val readout(ParamBinding& P, const std::vector<Val>& level_embeddings, Val final_groups,
            const HierConfig& cfg) {
  (void)cfg;
  std::vector<Val> parts = level_embeddings;
  parts.push_back(max_pool_rows(final_groups));
  Val features = concat_cols(parts);
  return sigmoid(mlp3(P, "hier.readout.", features));
}

HierOutput hier_forward(ParamBinding& P, Val h0, const HierConfig& cfg) {
  validate(cfg);
  Tape& tape = *h0.tape;
  const int n = tape.value(h0).rows;
  if (n < 1) throw ShapeError("hier_forward: needs at least one clause embedding");
  if (tape.value(h0).cols != cfg.dim) {
    throw ShapeError("hier_forward: H0 width " + tape.value(h0).shape_str() +
                     " does not match dim " + std::to_string(cfg.dim));
  }

  HierOutput out;
  std::vector<Val> level_f;
  level_f.push_back(level_embedding(h0, n));  // F^0 over the raw clause rows

  Val tokens = h0;
  int real = n;
  Val groups = h0;  // overwritten at level 1
  for (int l = 1; l <= cfg.levels; ++l) {
    int d_l = window_count(n, cfg.window, l);
    out.window_counts.push_back(d_l);
    Val padded = pad_rows(tokens, d_l * cfg.window);
    std::vector<Val> group_rows;
    std::vector<Val> updated_windows;
    group_rows.reserve(size_t(d_l));
    for (int di = 0; di < d_l; ++di) {
      Val win = slice_rows(padded, di * cfg.window, cfg.window);
      UnitOut unit = attention_unit(P, win, l, cfg);
      group_rows.push_back(unit.group);
      updated_windows.push_back(unit.updated_tokens);
      for (int h = 0; h < cfg.heads; ++h) {
        out.records.push_back(AttentionRecord{l, di, h, std::move(unit.head_matrices[size_t(h)])});
      }
    }
    Val updated_all = concat_rows(updated_windows);
    level_f.push_back(level_embedding(updated_all, real));  // padding rows excluded
    groups = concat_rows(group_rows);
    out.level_groups.push_back(groups);
    tokens = groups;
    real = d_l;
  }

  out.level_embeddings = level_f;
  out.y_sat = readout(P, level_f, groups, cfg);
  return out;
}

}  // namespace satformer
