#include "satformer/gnn.hpp"

#include <cmath>
#include <stdexcept>

namespace satformer {

using namespace ad;

namespace {

void init_lstm_cell(ParamStore& params, const std::string& prefix, int in_dim, int d,
                    Rng& rng) {
  params.add(prefix + "w", Tensor::randn(in_dim + d, 4 * d, 1.0 / std::sqrt(double(d)), rng));
  for (const char* gate : {"i", "j", "f", "o", "c"}) {
    params.add(prefix + "ln_" + gate + "_g", Tensor::full(1, d, 1.0));
    params.add(prefix + "ln_" + gate + "_b", Tensor::zeros(1, d));
  }
}

// Layer-norm LSTM cell: per-gate layer norm on the joint projection, cell
// state normalized before the output gate, forget bias 1.
std::pair<Val, Val> lstm_cell(ParamBinding& P, const std::string& prefix, int d, Val x,
                              Val h, Val cell) {
  Val pre = matmul(concat_cols({x, h}), P(prefix + "w"));  // rows x 4d
  Val gi = layernorm_rows(slice_cols(pre, 0, d), P(prefix + "ln_i_g"), P(prefix + "ln_i_b"));
  Val gj = layernorm_rows(slice_cols(pre, d, d), P(prefix + "ln_j_g"), P(prefix + "ln_j_b"));
  Val gf = layernorm_rows(slice_cols(pre, 2 * d, d), P(prefix + "ln_f_g"), P(prefix + "ln_f_b"));
  Val go = layernorm_rows(slice_cols(pre, 3 * d, d), P(prefix + "ln_o_g"), P(prefix + "ln_o_b"));
  Val cell_new = sigmoid(affine(gf, 1.0, 1.0)) * cell + sigmoid(gi) * ad::tanh(gj);
  Val cell_ln = layernorm_rows(cell_new, P(prefix + "ln_c_g"), P(prefix + "ln_c_b"));
  Val h_new = sigmoid(go) * ad::tanh(cell_ln);
  return {h_new, cell_new};
}

}  // namespace

void init_mlp3(ParamStore& params, const std::string& prefix, int in_dim, int hidden,
               int out_dim, Rng& rng) {
  params.add(prefix + "w0", Tensor::randn(in_dim, hidden, 1.0 / std::sqrt(double(in_dim)), rng));
  params.add(prefix + "b0", Tensor::zeros(1, hidden));
  params.add(prefix + "w1", Tensor::randn(hidden, hidden, 1.0 / std::sqrt(double(hidden)), rng));
  params.add(prefix + "b1", Tensor::zeros(1, hidden));
  params.add(prefix + "w2", Tensor::randn(hidden, out_dim, 1.0 / std::sqrt(double(hidden)), rng));
  params.add(prefix + "b2", Tensor::zeros(1, out_dim));
}

Val mlp3(ParamBinding& P, const std::string& prefix, Val x) {
  Val h0 = relu(linear(x, P(prefix + "w0"), P(prefix + "b0")));
  Val h1 = relu(linear(h0, P(prefix + "w1"), P(prefix + "b1")));
  return linear(h1, P(prefix + "w2"), P(prefix + "b2"));
}

void init_encoder_params(ParamStore& params, const EncoderConfig& cfg, Rng& rng) {
  if (cfg.dim < 1 || cfg.iterations < 1) {
    throw std::invalid_argument("encoder config: dim and iterations must be >= 1");
  }
  int d = cfg.dim;
  double s = 1.0 / std::sqrt(double(d));
  params.add("enc.l_init", Tensor::randn(1, d, s, rng));
  params.add("enc.c_init", Tensor::randn(1, d, s, rng));
  init_mlp3(params, "enc.lit_msg.", d, d, d, rng);
  init_mlp3(params, "enc.cla_msg.", d, d, d, rng);
  init_lstm_cell(params, "enc.cla_cell.", d, d, rng);      // input: literal aggregate
  init_lstm_cell(params, "enc.lit_cell.", 2 * d, d, rng);  // input: clause aggregate + flip
}

EncodeOutput encode(Tape& tape, ParamBinding& P, const LiteralClauseGraph& graph,
                    const EncoderConfig& cfg) {
  const int d = cfg.dim;
  const int num_lits = graph.num_literal_nodes();
  const int num_clauses = graph.num_clauses;

  std::vector<int> edge_lit, edge_clause;
  edge_lit.reserve(graph.edges.size());
  edge_clause.reserve(graph.edges.size());
  for (auto [slot, ci] : graph.edges) {
    edge_lit.push_back(slot);
    edge_clause.push_back(ci);
  }
  std::vector<int> flip(size_t(num_lits), 0);
  for (int s = 0; s < num_lits; ++s) flip[size_t(s)] = LiteralClauseGraph::negation_partner(s);

  Val lit_h = broadcast_rows(P("enc.l_init"), num_lits);
  Val cla_h = broadcast_rows(P("enc.c_init"), num_clauses);
  Val lit_cell = tape.input(Tensor(num_lits, d));
  Val cla_cell = tape.input(Tensor(num_clauses, d));

  for (int round = 0; round < cfg.iterations; ++round) {
    Val lit_msg = mlp3(P, "enc.lit_msg.", lit_h);
    Val clause_in = scatter_add_rows(gather_rows(lit_msg, edge_lit), edge_clause, num_clauses);
    std::tie(cla_h, cla_cell) = lstm_cell(P, "enc.cla_cell.", d, clause_in, cla_h, cla_cell);

    Val cla_msg = mlp3(P, "enc.cla_msg.", cla_h);
    Val lit_in = scatter_add_rows(gather_rows(cla_msg, edge_clause), edge_lit, num_lits);
    Val lit_update_in = concat_cols({lit_in, gather_rows(lit_h, flip)});
    std::tie(lit_h, lit_cell) = lstm_cell(P, "enc.lit_cell.", d, lit_update_in, lit_h, lit_cell);
  }
  return EncodeOutput{lit_h, cla_h};
}

}  // namespace satformer
