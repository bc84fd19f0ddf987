#include <cmath>
#include <numeric>

#include "doctest.h"
#include "fixtures.hpp"
#include "satformer/gnn.hpp"
#include "satformer/heads.hpp"
#include "satformer/hier.hpp"
#include "satformer/model.hpp"

using namespace satformer;
using namespace satformer::ad;

namespace {

EncoderConfig small_enc() {
  EncoderConfig cfg;
  cfg.dim = 8;
  cfg.iterations = 4;
  return cfg;
}

HierConfig small_hier(int dim = 8, int window = 3, int levels = 2, int heads = 2) {
  HierConfig cfg;
  cfg.dim = dim;
  cfg.window = window;
  cfg.levels = levels;
  cfg.heads = heads;
  return cfg;
}

CnfInstance permute_clauses(const CnfInstance& inst, const std::vector<int>& perm) {
  CnfInstance out = inst;
  for (size_t i = 0; i < perm.size(); ++i) out.clauses[i] = inst.clauses[size_t(perm[i])];
  return out;
}

}  // namespace

TEST_CASE("encode output shapes") {
  EncoderConfig cfg = small_enc();
  ParamStore params;
  Rng rng(1);
  init_encoder_params(params, cfg, rng);
  Tape tape;
  ParamBinding bind(tape, params);
  EncodeOutput out = encode(tape, bind, build_lcg(fixtures::example_sat3()), cfg);
  CHECK(tape.value(out.literal_states).rows == 6);
  CHECK(tape.value(out.literal_states).cols == cfg.dim);
  CHECK(tape.value(out.clause_states).rows == 3);
  CHECK(tape.value(out.clause_states).cols == cfg.dim);
}

TEST_CASE("encode: clause-permutation equivariance of H0 is exact") {
  EncoderConfig cfg = small_enc();
  ParamStore params;
  Rng rng(2);
  init_encoder_params(params, cfg, rng);

  CnfInstance base = fixtures::example_unsat9();
  std::vector<int> perm = {4, 0, 7, 2, 8, 1, 5, 3, 6};
  CnfInstance permuted = permute_clauses(base, perm);

  Tape t1, t2;
  ParamBinding b1(t1, params), b2(t2, params);
  EncodeOutput o1 = encode(t1, b1, build_lcg(base), cfg);
  EncodeOutput o2 = encode(t2, b2, build_lcg(permuted), cfg);

  const Tensor& h1 = t1.value(o1.clause_states);
  const Tensor& h2 = t2.value(o2.clause_states);
  for (size_t i = 0; i < perm.size(); ++i) {
    for (int j = 0; j < cfg.dim; ++j) {
      CHECK(h2.at(int(i), j) == h1.at(perm[i], j));  // bitwise
    }
  }
  CHECK(t1.value(o1.literal_states).data == t2.value(o2.literal_states).data);
}

TEST_CASE("encode: variable renaming permutes literal rows, H0 unchanged") {
  EncoderConfig cfg = small_enc();
  ParamStore params;
  Rng rng(3);
  init_encoder_params(params, cfg, rng);

  CnfInstance base = fixtures::example_sat3();
  // rename variables 1,2,3 -> 3,1,2 (clause literal order kept)
  int rename[4] = {0, 3, 1, 2};
  CnfInstance renamed = base;
  for (Clause& c : renamed.clauses) {
    for (Literal& lit : c.literals) lit.var = rename[lit.var];
  }

  Tape t1, t2;
  ParamBinding b1(t1, params), b2(t2, params);
  EncodeOutput o1 = encode(t1, b1, build_lcg(base), cfg);
  EncodeOutput o2 = encode(t2, b2, build_lcg(renamed), cfg);

  CHECK(t1.value(o1.clause_states).data == t2.value(o2.clause_states).data);
  const Tensor& l1 = t1.value(o1.literal_states);
  const Tensor& l2 = t2.value(o2.literal_states);
  for (int var = 1; var <= 3; ++var) {
    for (int ni = 0; ni < 2; ++ni) {
      int old_slot = 2 * (var - 1) + ni;
      int new_slot = 2 * (rename[var] - 1) + ni;
      for (int j = 0; j < cfg.dim; ++j) CHECK(l2.at(new_slot, j) == l1.at(old_slot, j));
    }
  }
}

TEST_CASE("encode stays finite at T=32") {
  EncoderConfig cfg;
  cfg.dim = 8;
  cfg.iterations = 32;
  ParamStore params;
  Rng rng(4);
  init_encoder_params(params, cfg, rng);
  Tape tape;
  ParamBinding bind(tape, params);
  EncodeOutput out = encode(tape, bind, build_lcg(fixtures::example_unsat9()), cfg);
  for (double v : tape.value(out.clause_states).data) CHECK(std::isfinite(v));
  for (double v : tape.value(out.literal_states).data) CHECK(std::isfinite(v));
}

TEST_CASE("window_count worked values and ceiling oracle") {
  CHECK(window_count(11, 4, 1) == 3);
  CHECK(window_count(9, 3, 1) == 3);
  CHECK(window_count(9, 3, 2) == 1);
  for (int n = 1; n <= 500; ++n) {
    for (int w : {2, 3, 4}) {
      for (int l = 1; l <= 6; ++l) {
        // independent oracle: repeated subtraction
        int64_t cell = 1;
        for (int i = 0; i < l; ++i) cell *= w;
        int count = 0;
        int64_t rest = n;
        while (rest > 0) {
          rest -= cell;
          ++count;
        }
        CHECK(window_count(n, w, l) == count);
      }
    }
  }
}

TEST_CASE("self_attention: singleton token and hand-computed 2x2 case") {
  HierConfig cfg = small_hier(2, 2, 1, 1);
  ParamStore params;
  Rng rng(5);
  init_hier_params(params, cfg, rng);
  // identity projections
  Tensor eye = Tensor::from_rows({{1, 0}, {0, 1}});
  params.get("hier.l1.wq") = eye;
  params.get("hier.l1.wk") = eye;
  params.get("hier.l1.wv") = eye;
  params.get("hier.l1.wo") = eye;

  Tape t1;
  ParamBinding b1(t1, params);
  Val single = t1.input(Tensor::from_rows({{0.3, -0.7}}));
  AttentionOut one = self_attention(b1, single, 1, cfg);
  REQUIRE(one.head_matrices.size() == 1);
  CHECK(one.head_matrices[0].rows == 1);
  CHECK(one.head_matrices[0].data[0] == 1.0);
  CHECK(t1.value(one.updated).data == std::vector<double>{0.3, -0.7});

  Tape t2;
  ParamBinding b2(t2, params);
  Val tokens = t2.input(Tensor::from_rows({{1, 0}, {0, 1}}));
  AttentionOut out = self_attention(b2, tokens, 1, cfg);
  const Tensor& a = out.head_matrices[0];
  CHECK(a.at(0, 0) == doctest::Approx(0.6698).epsilon(1e-3));
  CHECK(a.at(0, 1) == doctest::Approx(0.3302).epsilon(1e-3));
  CHECK(a.at(1, 0) == doctest::Approx(0.3302).epsilon(1e-3));
  CHECK(a.at(1, 1) == doctest::Approx(0.6698).epsilon(1e-3));
}

TEST_CASE("attention rows sum to one on random inputs") {
  HierConfig cfg = small_hier();
  ParamStore params;
  Rng rng(6);
  init_hier_params(params, cfg, rng);
  Tape tape;
  ParamBinding bind(tape, params);
  Val h0 = tape.input(Tensor::randn(7, cfg.dim, 1.0, rng));
  HierOutput out = hier_forward(bind, h0, cfg);
  CHECK(!out.records.empty());
  for (const AttentionRecord& rec : out.records) {
    REQUIRE(rec.matrix.rows == cfg.window);
    for (int r = 0; r < rec.matrix.rows; ++r) {
      double s = 0;
      for (int c = 0; c < rec.matrix.cols; ++c) {
        CHECK(rec.matrix.at(r, c) >= 0.0);
        s += rec.matrix.at(r, c);
      }
      CHECK(std::fabs(s - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("attention_unit: zero combiner gives a zero group") {
  HierConfig cfg = small_hier();
  ParamStore params;
  Rng rng(7);
  init_hier_params(params, cfg, rng);
  params.get("hier.l1.comb.w") = Tensor(cfg.window * cfg.dim, cfg.dim);
  params.get("hier.l1.comb.b") = Tensor(1, cfg.dim);
  Tape tape;
  ParamBinding bind(tape, params);
  Val win = tape.input(Tensor::randn(cfg.window, cfg.dim, 1.0, rng));
  UnitOut unit = attention_unit(bind, win, 1, cfg);
  for (double v : tape.value(unit.group).data) CHECK(v == 0.0);
}

TEST_CASE("level-1 window locality is exact") {
  HierConfig cfg = small_hier();
  ParamStore params;
  Rng rng(8);
  init_hier_params(params, cfg, rng);

  Tensor h0 = Tensor::randn(9, cfg.dim, 1.0, rng);
  Tensor h0_mod = h0;
  h0_mod.at(4, 2) += 1.25;  // clause in window 2

  Tape t1, t2;
  ParamBinding b1(t1, params), b2(t2, params);
  HierOutput o1 = hier_forward(b1, t1.input(h0), cfg);
  HierOutput o2 = hier_forward(b2, t2.input(h0_mod), cfg);
  const Tensor& g1 = t1.value(o1.level_groups[0]);
  const Tensor& g2 = t2.value(o2.level_groups[0]);
  REQUIRE(g1.rows == 3);
  for (int j = 0; j < cfg.dim; ++j) {
    CHECK(g2.at(0, j) == g1.at(0, j));  // window 1 untouched, bitwise
    CHECK(g2.at(2, j) == g1.at(2, j));  // window 3 untouched, bitwise
  }
  bool changed = false;
  for (int j = 0; j < cfg.dim; ++j) changed = changed || g2.at(1, j) != g1.at(1, j);
  CHECK(changed);
}

TEST_CASE("readout: zero final layer gives exactly 0.5") {
  HierConfig cfg = small_hier();
  ParamStore params;
  Rng rng(9);
  init_hier_params(params, cfg, rng);
  params.get("hier.readout.w2") = Tensor(cfg.dim, 1);
  params.get("hier.readout.b2") = Tensor(1, 1);
  Tape tape;
  ParamBinding bind(tape, params);
  HierOutput out = hier_forward(bind, tape.input(Tensor::randn(5, cfg.dim, 1.0, rng)), cfg);
  CHECK(tape.value(out.y_sat).data[0] == 0.5);
}

TEST_CASE("hier output always lies strictly inside (0,1)") {
  HierConfig cfg = small_hier();
  ParamStore params;
  Rng rng(10);
  init_hier_params(params, cfg, rng);
  Tape tape;
  ParamBinding bind(tape, params);
  for (int n : {1, 2, 9, 17}) {
    HierOutput out = hier_forward(bind, tape.input(Tensor::randn(n, cfg.dim, 2.0, rng)), cfg);
    double y = tape.value(out.y_sat).data[0];
    CHECK(y > 0.0);
    CHECK(y < 1.0);
  }
}

TEST_CASE("hier level trace shapes") {
  HierConfig cfg = small_hier(8, 3, 4, 2);
  ParamStore params;
  Rng rng(11);
  init_hier_params(params, cfg, rng);
  Tape tape;
  ParamBinding bind(tape, params);
  HierOutput out = hier_forward(bind, tape.input(Tensor::randn(9, cfg.dim, 1.0, rng)), cfg);
  CHECK(out.window_counts == std::vector<int>{3, 1, 1, 1});
  CHECK(tape.value(out.level_groups[0]).rows == 3);
  CHECK(tape.value(out.level_groups[1]).rows == 1);
  CHECK(out.level_embeddings.size() == 5);  // F^0..F^4

  // n=1: a single window of 1 real + w-1 padding tokens at every level
  Tape tape1;
  ParamBinding bind1(tape1, params);
  HierOutput single = hier_forward(bind1, tape1.input(Tensor::randn(1, cfg.dim, 1.0, rng)), cfg);
  CHECK(single.window_counts == std::vector<int>{1, 1, 1, 1});
}

TEST_CASE("level embedding excludes padding and matches column max") {
  Tape tape;
  Val x = tape.input(Tensor::from_rows({{1, 4}, {3, 2}, {99, 99}}));  // third row is padding
  CHECK(tape.value(level_embedding(x, 2)).data == std::vector<double>{3, 4});
  Val one = tape.input(Tensor::from_rows({{7, -2}}));
  CHECK(tape.value(level_embedding(one, 1)).data == std::vector<double>{7, -2});
}

TEST_CASE("case study: level-1 window composition of the two clause orders") {
  // MUC positions (0-based): phi_U1 {1,4,5}, phi_U2 {1,4,8}
  auto windows = level1_windows(9, 3);
  REQUIRE(windows.size() == 3);
  auto window_of = [&](int idx) {
    for (size_t w = 0; w < windows.size(); ++w) {
      if (idx >= windows[w].first && idx < windows[w].second) return int(w);
    }
    return -1;
  };
  std::vector<int> u1_windows = {window_of(1), window_of(4), window_of(5)};
  CHECK(u1_windows == std::vector<int>{0, 1, 1});  // inside windows 1-2
  std::vector<int> u2_windows = {window_of(1), window_of(4), window_of(8)};
  CHECK(u2_windows == std::vector<int>{0, 1, 2});  // spans all three
}

TEST_CASE("clause head: singleton, symmetry, permutation equivariance") {
  ParamStore params;
  Rng rng(12);
  init_clause_head_params(params, 8, rng);

  Tape t1;
  ParamBinding b1(t1, params);
  ClauseHeadOut one = clause_head(b1, t1.input(Tensor::randn(1, 8, 1.0, rng)));
  CHECK(t1.value(one.y).data == std::vector<double>{1.0});

  // identical rows -> exactly uniform distribution
  Tensor same(4, 8);
  Rng rng2(13);
  Tensor row = Tensor::randn(1, 8, 1.0, rng2);
  for (int i = 0; i < 4; ++i) {
    std::copy(row.data.begin(), row.data.end(), same.row_ptr(i));
  }
  Tape t2;
  ParamBinding b2(t2, params);
  ClauseHeadOut uniform = clause_head(b2, t2.input(same));
  for (double v : t2.value(uniform.y).data) CHECK(v == 0.25);

  // permuting H0 rows permutes y identically
  Tensor h0 = Tensor::randn(5, 8, 1.0, rng2);
  std::vector<int> perm = {3, 0, 4, 1, 2};
  Tensor h0p(5, 8);
  for (int i = 0; i < 5; ++i) {
    std::copy(h0.row_ptr(perm[size_t(i)]), h0.row_ptr(perm[size_t(i)]) + 8, h0p.row_ptr(i));
  }
  Tape t3, t4;
  ParamBinding b3(t3, params), b4(t4, params);
  ClauseHeadOut a = clause_head(b3, t3.input(h0));
  ClauseHeadOut b = clause_head(b4, t4.input(h0p));
  for (int i = 0; i < 5; ++i) {
    CHECK(t4.value(b.y).data[size_t(i)] == t3.value(a.y).data[size_t(perm[size_t(i)])]);
    CHECK(t4.value(b.s).data[size_t(i)] == t3.value(a.s).data[size_t(perm[size_t(i)])]);
  }

  // softmax argmax is invariant to constant logit shifts
  Tape t5;
  Val logits = t5.input(Tensor::from_rows({{0.3, 1.7, -0.2, 0.9}}));
  Val shifted = affine(logits, 1.0, 12.5);
  const Tensor& y1 = t5.value(softmax_rows(logits));
  const Tensor& y2 = t5.value(softmax_rows(shifted));
  auto argmax = [](const Tensor& t) {
    return int(std::max_element(t.data.begin(), t.data.end()) - t.data.begin());
  };
  CHECK(argmax(y1) == argmax(y2));
  CHECK(argmax(y1) == 1);
}

TEST_CASE("kl loss: literal binary mask semantics") {
  Tape tape;
  // all-zero mask contributes exactly zero
  Val y3 = tape.input(Tensor::from_rows({{0.2, 0.5, 0.3}}));
  Val zero_loss = kl_clause_loss(tape, {0, 0, 0}, y3);
  CHECK(tape.value(zero_loss).data[0] == 0.0);

  // one-hot mask against uniform: ln 3
  Val uniform = tape.input(Tensor::from_rows({{1.0 / 3, 1.0 / 3, 1.0 / 3}}));
  Val ln3 = kl_clause_loss(tape, {0, 1, 0}, uniform);
  CHECK(std::fabs(tape.value(ln3).data[0] - std::log(3.0)) < 1e-12);

  // loss -> 0 as the prediction approaches the one-hot target
  for (double eps : {1e-3, 1e-6, 1e-9}) {
    Val near = tape.input(Tensor::from_rows({{1.0 - eps, eps}}));
    Val l = kl_clause_loss(tape, {1, 0}, near);
    CHECK(tape.value(l).data[0] == doctest::Approx(-std::log1p(-eps)).epsilon(1e-6));
  }

  // one-hot identity: equals -log y_k
  Val y = tape.input(Tensor::from_rows({{0.1, 0.6, 0.3}}));
  Val l = kl_clause_loss(tape, {0, 0, 1}, y);
  CHECK(tape.value(l).data[0] == doctest::Approx(-std::log(0.3)).epsilon(1e-12));
  CHECK(tape.value(l).data[0] >= 0.0);

  // uniform-over-core switch
  Val flat = tape.input(Tensor::from_rows({{0.25, 0.25, 0.25, 0.25}}));
  Val u = kl_clause_loss(tape, {0, 1, 0, 1}, flat, true);
  CHECK(tape.value(u).data[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  CHECK_THROWS_AS(kl_clause_loss(tape, {1, 0}, y3), ShapeError);
}

TEST_CASE("bce loss values") {
  Tape tape;
  Val half = tape.input(Tensor::scalar(0.5));
  CHECK(std::fabs(tape.value(bce_sat_loss(1.0, half)).data[0] - std::log(2.0)) < 1e-12);

  Val p9 = tape.input(Tensor::scalar(0.9));
  Val p6 = tape.input(Tensor::scalar(0.6));
  double l9 = tape.value(bce_sat_loss(1.0, p9)).data[0];
  double l6 = tape.value(bce_sat_loss(1.0, p6)).data[0];
  CHECK(l9 == doctest::Approx(0.1054).epsilon(1e-3));
  CHECK(l6 == doctest::Approx(0.5108).epsilon(1e-3));
  CHECK(l9 < l6);

  // y* = 0 with y -> 0 vanishes; extreme values stay finite via the clamp
  Val tiny = tape.input(Tensor::scalar(1e-9));
  CHECK(tape.value(bce_sat_loss(0.0, tiny)).data[0] == doctest::Approx(0.0).epsilon(1e-8));
  Val zero = tape.input(Tensor::scalar(0.0));
  CHECK(std::isfinite(tape.value(bce_sat_loss(1.0, zero)).data[0]));
}

TEST_CASE("total loss combination") {
  Tape tape;
  Val lc = tape.input(Tensor::scalar(2.0));
  Val ls = tape.input(Tensor::scalar(0.0));
  CHECK(tape.value(total_loss(lc, ls, 1.0, 1.0)).data[0] == 1.0);
  // p_clause = 0: pure sat loss (the no-core ablation arm)
  Val ls2 = tape.input(Tensor::scalar(0.37));
  CHECK(tape.value(total_loss(lc, ls2, 0.0, 1.0)).data[0] == 0.37);
  // equal losses are a fixed point for any weights
  Val c1 = tape.input(Tensor::scalar(1.3));
  Val c2 = tape.input(Tensor::scalar(1.3));
  CHECK(tape.value(total_loss(c1, c2, 0.7, 2.9)).data[0] == doctest::Approx(1.3).epsilon(1e-15));
  CHECK_THROWS_AS(total_loss(lc, ls, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("full model: deterministic init and finite-difference spot check") {
  Model model;
  model.cfg.enc = small_enc();
  model.cfg.hier = small_hier();
  model.init(99);

  Model again;
  again.cfg = model.cfg;
  again.init(99);
  REQUIRE(model.params.count() == again.params.count());
  for (int i = 0; i < model.params.count(); ++i) {
    CHECK(model.params.tensor(i).data == again.params.tensor(i).data);
  }

  CnfInstance inst = fixtures::example_unsat9();
  std::vector<uint8_t> mask = {0, 1, 0, 0, 1, 1, 0, 0, 0};

  auto loss_value = [&](const Model& m) {
    Tape tape;
    ModelForward fwd = m.forward(tape, inst);
    return tape.value(m.loss(tape, fwd, false, mask, 1.0, 1.0)).data[0];
  };

  Tape tape;
  ParamBinding bind(tape, model.params);
  ModelForward fwd = model.forward(tape, bind, inst);
  Val loss = model.loss(tape, fwd, false, mask, 1.0, 1.0);
  tape.backward(loss);
  std::vector<Tensor> grads = model.params.zeros_like();
  bind.accumulate_grads(grads);

  // sample a few coordinates across different parameter tensors
  Rng rng(55);
  const double h = 1e-5;
  for (int probe = 0; probe < 12; ++probe) {
    int pi = rng.next_int(0, model.params.count() - 1);
    if (model.params.tensor(pi).size() == 0) continue;
    int k = rng.next_int(0, model.params.tensor(pi).size() - 1);
    Model plus = model, minus = model;
    plus.params.tensor(pi).data[size_t(k)] += h;
    minus.params.tensor(pi).data[size_t(k)] -= h;
    double fd = (loss_value(plus) - loss_value(minus)) / (2 * h);
    double an = grads[size_t(pi)].data[size_t(k)];
    CHECK(std::fabs(fd - an) <= 1e-4 * std::max({std::fabs(fd), std::fabs(an)}) + 1e-7);
  }
}

TEST_CASE("model forward surfaces y_sat, y_clause, s_clause, records") {
  Model model;
  model.cfg.enc = small_enc();
  model.cfg.hier = small_hier();
  model.init(7);
  Tape tape;
  ModelForward fwd = model.forward(tape, fixtures::example_unsat9());
  CHECK(fwd.y_sat > 0.0);
  CHECK(fwd.y_sat < 1.0);
  REQUIRE(fwd.y_clause.size() == 9);
  double total = 0;
  for (double v : fwd.y_clause) total += v;
  CHECK(std::fabs(total - 1.0) < 1e-9);
  for (double v : fwd.s_clause) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  CHECK(!fwd.records.empty());
}
