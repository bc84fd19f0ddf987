#pragma once

#include <cstdint>
#include <vector>

#include "satformer/cnf.hpp"
#include "satformer/gnn.hpp"
#include "satformer/heads.hpp"
#include "satformer/hier.hpp"

namespace satformer {

struct ModelConfig {
  EncoderConfig enc;
  HierConfig hier;
  bool kl_uniform_target = false;
};

// One instance pushed through encoder, clause head, and hierarchy.
struct ModelForward {
  double y_sat = 0.0;
  std::vector<double> y_clause;  // softmax distribution over clauses
  std::vector<double> s_clause;  // per-clause logistic scores
  std::vector<AttentionRecord> records;
  ad::Val y_sat_val;
  ClauseHeadOut heads;
};

struct Model {
  ModelConfig cfg;
  ad::ParamStore params;

  // Deterministic initialization: same seed and config give identical
  // parameter bytes.
  void init(uint64_t seed);

  ModelForward forward(ad::Tape& tape, const CnfInstance& inst) const;
  ModelForward forward(ad::Tape& tape, ad::ParamBinding& bind, const CnfInstance& inst) const;

  // Eq-style combined objective for one labeled instance.
  ad::Val loss(ad::Tape& tape, const ModelForward& fwd, bool is_sat,
               const std::vector<uint8_t>& core_mask, double p_clause, double p_sat) const;
};

}  // namespace satformer
