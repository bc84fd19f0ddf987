#pragma once

#include "satformer/autodiff.hpp"
#include "satformer/cnf.hpp"

namespace satformer {

struct EncoderConfig {
  int dim = 128;
  int iterations = 10;
};

struct EncodeOutput {
  ad::Val literal_states;  // 2m x d
  ad::Val clause_states;   // n x d; the H^0 consumed by both heads
};

// Registers all "enc.*" parameters: init vectors, the two 3-layer message
// perceptrons, and the two layer-norm LSTM update cells.
void init_encoder_params(ad::ParamStore& params, const EncoderConfig& cfg, Rng& rng);

// T rounds of alternating message passing on the literal-clause graph:
// clauses aggregate literal messages, literals aggregate clause messages
// concatenated with their negation partner's state.
EncodeOutput encode(ad::Tape& tape, ad::ParamBinding& bind, const LiteralClauseGraph& graph,
                    const EncoderConfig& cfg);

// Shared building blocks reused by the transformer and heads.
ad::Val mlp3(ad::ParamBinding& bind, const std::string& prefix, ad::Val x);
void init_mlp3(ad::ParamStore& params, const std::string& prefix, int in_dim, int hidden,
               int out_dim, Rng& rng);

}  // namespace satformer
