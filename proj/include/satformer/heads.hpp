#pragma once

#include <cstdint>
#include <vector>

#include "satformer/autodiff.hpp"

namespace satformer {

struct ClauseHeadOut {
  ad::Val logits;  // 1 x n
  ad::Val y;       // 1 x n softmax distribution over clauses
  ad::Val s;       // 1 x n per-clause logistic scores
};

void init_clause_head_params(ad::ParamStore& params, int dim, Rng& rng);

// Shared 3-layer perceptron maps each clause embedding row to a scalar
// logit; y is the softmax over clauses, s the per-clause logistic score.
ClauseHeadOut clause_head(ad::ParamBinding& bind, ad::Val h0);

// KL divergence against the binary core mask, used literally: a SAT
// instance (all-zero mask) contributes exactly zero. With uniform_target
// the mask is normalized to a distribution over core clauses instead.
ad::Val kl_clause_loss(ad::Tape& tape, const std::vector<uint8_t>& core_mask, ad::Val y,
                       bool uniform_target = false);

// Binary cross-entropy with the prediction clamped to [1e-12, 1-1e-12].
ad::Val bce_sat_loss(double y_star, ad::Val y_sat);

// (p_clause * l_clause + p_sat * l_sat) / (p_clause + p_sat).
ad::Val total_loss(ad::Val l_clause, ad::Val l_sat, double p_clause, double p_sat);

}  // namespace satformer
