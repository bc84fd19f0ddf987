#include "satformer/model.hpp"

#include <stdexcept>

namespace satformer {

using namespace ad;

void Model::init(uint64_t seed) {
  if (cfg.enc.dim != cfg.hier.dim) {
    throw std::invalid_argument("model config: encoder and hierarchy dims differ");
  }
  params = ParamStore{};
  Rng rng(seed);
  init_encoder_params(params, cfg.enc, rng);
  init_clause_head_params(params, cfg.enc.dim, rng);
  init_hier_params(params, cfg.hier, rng);
}

ModelForward Model::forward(Tape& tape, const CnfInstance& inst) const {
  ParamBinding bind(tape, params);
  return forward(tape, bind, inst);
}

ModelForward Model::forward(Tape& tape, ParamBinding& bind, const CnfInstance& inst) const {
  if (inst.num_clauses() < 1) {
    throw std::invalid_argument("model forward: instance has no clauses");
  }
  LiteralClauseGraph graph = build_lcg(inst);
  EncodeOutput enc = encode(tape, bind, graph, cfg.enc);

  ModelForward out;
  out.heads = clause_head(bind, enc.clause_states);
  HierOutput hier = hier_forward(bind, enc.clause_states, cfg.hier);
  out.y_sat_val = hier.y_sat;
  out.records = std::move(hier.records);

  out.y_sat = tape.value(hier.y_sat).data[0];
  const Tensor& y = tape.value(out.heads.y);
  const Tensor& s = tape.value(out.heads.s);
  out.y_clause.assign(y.data.begin(), y.data.end());
  out.s_clause.assign(s.data.begin(), s.data.end());
  return out;
}

Val Model::loss(Tape& tape, const ModelForward& fwd, bool is_sat,
                const std::vector<uint8_t>& core_mask, double p_clause, double p_sat) const {
  Val l_clause = kl_clause_loss(tape, core_mask, fwd.heads.y, cfg.kl_uniform_target);
  Val l_sat = bce_sat_loss(is_sat ? 1.0 : 0.0, fwd.y_sat_val);
  return total_loss(l_clause, l_sat, p_clause, p_sat);
}

}  // namespace satformer
