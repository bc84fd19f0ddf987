#include "satformer/heads.hpp"

#include <cmath>
#include <stdexcept>

#include "satformer/gnn.hpp"

namespace satformer {

using namespace ad;

void init_clause_head_params(ParamStore& params, int dim, Rng& rng) {
  init_mlp3(params, "head.clause.", dim, dim, 1, rng);
}

ClauseHeadOut clause_head(ParamBinding& P, Val h0) {
  Tape& tape = *h0.tape;
  const int n = tape.value(h0).rows;
  if (n < 1) throw ShapeError("clause_head: needs at least one clause embedding");
  Val logits_col = mlp3(P, "head.clause.", h0);  // n x 1
  Val logits = reshape(logits_col, 1, n);
  return ClauseHeadOut{logits, softmax_rows(logits), sigmoid(logits)};
}

Val kl_clause_loss(Tape& tape, const std::vector<uint8_t>& core_mask, Val y,
                   bool uniform_target) {
  const Tensor& yv = tape.value(y);
  if (yv.rows != 1 || yv.cols != int(core_mask.size())) {
    throw ShapeError("kl_clause_loss: mask length " + std::to_string(core_mask.size()) +
                     " vs prediction " + yv.shape_str());
  }
  int k = 0;
  for (uint8_t b : core_mask) k += b;

  Tensor target(1, int(core_mask.size()));
  double w = uniform_target && k > 0 ? 1.0 / k : 1.0;
  for (size_t i = 0; i < core_mask.size(); ++i) {
    target.data[i] = core_mask[i] ? w : 0.0;
  }
  Val tv = tape.input(std::move(target));
  // sum_i t_i * (log t_i - log y_i); with the literal binary mask the
  // log t_i term is zero, and an all-zero mask yields exactly zero.
  Val cross = scale(sum(tv * ad::log(y)), -1.0);
  if (uniform_target && k > 0) {
    return affine(cross, 1.0, std::log(w));
  }
  return cross;
}

Val bce_sat_loss(double y_star, Val y_sat) {
  Tape& tape = *y_sat.tape;
  const Tensor& v = tape.value(y_sat);
  if (v.rows != 1 || v.cols != 1) {
    throw ShapeError("bce_sat_loss: prediction must be scalar, got " + v.shape_str());
  }
  Val c = clamp(y_sat, 1e-12, 1.0 - 1e-12);
  Val term = scale(ad::log(c), y_star) + scale(ad::log(affine(c, -1.0, 1.0)), 1.0 - y_star);
  return scale(term, -1.0);
}

Val total_loss(Val l_clause, Val l_sat, double p_clause, double p_sat) {
  if (p_clause < 0 || p_sat < 0 || p_clause + p_sat <= 0) {
    throw std::invalid_argument("total_loss: weights must be nonnegative with positive sum");
  }
  return scale(scale(l_clause, p_clause) + scale(l_sat, p_sat), 1.0 / (p_clause + p_sat));
}

}  // namespace satformer
