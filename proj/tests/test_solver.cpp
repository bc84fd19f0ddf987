#include <algorithm>
#include <limits>

#include "doctest.h"
#include "fixtures.hpp"
#include "satformer/gen.hpp"
#include "satformer/oracle.hpp"
#include "satformer/solver.hpp"

using namespace satformer;

namespace {

CnfInstance random_cnf(Rng& rng, int min_vars, int max_vars) {
  CnfInstance inst;
  inst.num_vars = rng.next_int(min_vars, max_vars);
  int n = rng.next_int(1, int(4.5 * inst.num_vars));
  for (int i = 0; i < n; ++i) {
    Clause c;
    int k = rng.next_int(1, std::min(4, inst.num_vars));
    std::vector<int> pool;
    for (int v = 1; v <= inst.num_vars; ++v) pool.push_back(v);
    rng.shuffle(pool);
    for (int j = 0; j < k; ++j) c.literals.push_back({pool[size_t(j)], rng.next_bool(0.5)});
    inst.clauses.push_back(c);
  }
  return inst;
}

// Pigeonhole principle instance PHP(holes+1, holes): unsatisfiable, needs
// genuine search.
CnfInstance pigeonhole(int holes) {
  int pigeons = holes + 1;
  CnfInstance inst;
  inst.num_vars = pigeons * holes;
  auto var = [&](int p, int h) { return p * holes + h + 1; };
  for (int p = 0; p < pigeons; ++p) {
    Clause c;
    for (int h = 0; h < holes; ++h) c.literals.push_back({var(p, h), false});
    inst.clauses.push_back(c);
  }
  for (int h = 0; h < holes; ++h) {
    for (int p1 = 0; p1 < pigeons; ++p1) {
      for (int p2 = p1 + 1; p2 < pigeons; ++p2) {
        Clause c;
        c.literals.push_back({var(p1, h), true});
        c.literals.push_back({var(p2, h), true});
        inst.clauses.push_back(c);
      }
    }
  }
  return inst;
}

bool witness_ok(const CnfInstance& inst, const std::vector<bool>& w) {
  for (const Clause& c : inst.clauses) {
    bool sat = false;
    for (const Literal& l : c.literals) sat = sat || (w[size_t(l.var - 1)] != l.negated);
    if (!sat) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("worked examples") {
  SolveResult unsat = solve(fixtures::example_unsat9());
  CHECK(unsat.verdict == Verdict::Unsat);

  SolveResult sat = solve(fixtures::example_sat3());
  REQUIRE(sat.verdict == Verdict::Sat);
  CHECK(witness_ok(fixtures::example_sat3(), sat.witness));

  SolveResult contra = solve(parse_dimacs("p cnf 1 2\n1 0\n-1 0\n"));
  CHECK(contra.verdict == Verdict::Unsat);
  CHECK(contra.stats.conflicts <= 1);

  CHECK(solve(CnfInstance{}).verdict == Verdict::Sat);
  CHECK(solve(parse_dimacs("p cnf 1 1\n1 -1 0\n")).verdict == Verdict::Sat);
}

TEST_CASE("init_scores worked example and guard") {
  VarClauseAdjacency adj = var_clause_adjacency(fixtures::example_sat3());
  InitialScores scores = init_scores(adj, {0.5, 0.3, 0.2}, 0.1);
  CHECK(scores.v == std::vector<double>{0.7, 0.8, 0.5});

  // predicted SAT: the accumulation loop is skipped
  InitialScores zeros = init_scores(adj, {0.5, 0.3, 0.2}, 0.9);
  CHECK(zeros.v == std::vector<double>{0.0, 0.0, 0.0});

  // uniform distribution: scores proportional to variable degree
  InitialScores uniform = init_scores(adj, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 0.0);
  for (int j = 0; j < 3; ++j) {
    int deg = 0;
    for (int i = 0; i < 3; ++i) deg += adj.at(j, i);
    CHECK(uniform.v[size_t(j)] == doctest::Approx(deg / 3.0).epsilon(1e-12));
  }

  CHECK_THROWS_AS(init_scores(adj, {0.5, 0.5}, 0.1), std::invalid_argument);
}

TEST_CASE("differential: solver agrees with oracle, with and without init") {
  Rng rng(101);
  SolverConfig cfg;
  cfg.check_invariants = true;
  for (int trial = 0; trial < 500; ++trial) {
    // the oracle switches from truth tables to DPLL above 16 variables
    CnfInstance inst = trial % 5 == 4 ? random_cnf(rng, 17, 20) : random_cnf(rng, 3, 12);
    bool expected = solve_exhaustive(inst).is_sat;

    SolveResult plain = solve(inst, cfg, nullptr);
    CHECK((plain.verdict == Verdict::Sat) == expected);
    if (plain.verdict == Verdict::Sat) CHECK(witness_ok(inst, plain.witness));

    // arbitrary nonnegative activities must not change the verdict
    InitialScores init;
    init.v.resize(size_t(inst.num_vars));
    for (double& v : init.v) v = rng.next_unit() * 3.0;
    SolveResult seeded = solve(inst, cfg, &init);
    CHECK(seeded.verdict == plain.verdict);
    if (seeded.verdict == Verdict::Sat) CHECK(witness_ok(inst, seeded.witness));
  }
}

TEST_CASE("learnt clauses are implied by the original formula") {
  Rng rng(202);
  SolverConfig cfg;
  cfg.record_learnts = true;
  int checked = 0;
  for (int trial = 0; trial < 120 && checked < 40; ++trial) {
    CnfInstance inst = random_cnf(rng, 4, 11);
    SolveResult res = solve(inst, cfg);
    for (const std::vector<int>& learnt : res.learnts) {
      ++checked;
      // every assignment satisfying the instance satisfies the lemma
      uint32_t total = uint32_t(1) << inst.num_vars;
      for (uint32_t a = 0; a < total; ++a) {
        std::vector<bool> w(size_t(inst.num_vars));
        for (int j = 0; j < inst.num_vars; ++j) w[size_t(j)] = (a >> j) & 1;
        if (!witness_ok(inst, w)) continue;
        bool lemma_sat = false;
        for (int lit : learnt) {
          int var = lit > 0 ? lit : -lit;
          bool neg = lit < 0;
          lemma_sat = lemma_sat || (w[size_t(var - 1)] != neg);
        }
        CHECK(lemma_sat);
      }
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("pigeonhole: conflict limit yields UNKNOWN, restarts fire") {
  CnfInstance php = pigeonhole(4);
  SolveResult full = solve(php);
  CHECK(full.verdict == Verdict::Unsat);
  CHECK(full.stats.conflicts > 2);
  CHECK(full.stats.learnt_clauses > 0);

  if (full.stats.conflicts > 64) CHECK(full.stats.restarts >= 1);

  SolverConfig limited;
  limited.conflict_limit = 2;
  SolveResult capped = solve(php, limited);
  CHECK(capped.verdict == Verdict::Unknown);
  CHECK(capped.stats.conflicts <= 2);
}

TEST_CASE("phase saving and decision stats") {
  Rng rng(7);
  CnfInstance inst = random_cnf(rng, 8, 12);
  SolveResult res = solve(inst);
  if (res.verdict == Verdict::Sat) {
    CHECK(res.stats.decisions >= 1);
  }
  CHECK(res.stats.propagations >= 0);
}

TEST_CASE("compare_runs: identical zero init gives exactly 0% reduction") {
  CnfInstance php = pigeonhole(3);
  InitialScores zero;
  zero.v.assign(size_t(php.num_vars), 0.0);
  CompareResult cmp = compare_runs(php, SolverConfig{}, zero);
  CHECK(cmp.lemma_reduction_pct == 0.0);
  CHECK(cmp.decision_reduction_pct == 0.0);
  CHECK(cmp.without_init.verdict == cmp.with_init.verdict);
  CHECK(cmp.without_init.stats.learnt_clauses == cmp.with_init.stats.learnt_clauses);
}

TEST_CASE("compare_runs: verdicts match across arms on random instances") {
  Rng rng(303);
  for (int trial = 0; trial < 60; ++trial) {
    CnfInstance inst = random_cnf(rng, 4, 10);
    InitialScores init;
    init.v.resize(size_t(inst.num_vars));
    for (double& v : init.v) v = rng.next_unit();
    CompareResult cmp = compare_runs(inst, SolverConfig{}, init);
    CHECK(cmp.without_init.verdict == cmp.with_init.verdict);
    int64_t a = cmp.without_init.stats.learnt_clauses;
    int64_t b = cmp.with_init.stats.learnt_clauses;
    double expect = a == 0 ? 0.0 : double(a - b) / double(a) * 100.0;
    CHECK(cmp.lemma_reduction_pct == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("initial scores bias the first decision") {
  // two independent variables, both free: the decision follows the scores
  CnfInstance inst = parse_dimacs("p cnf 4 2\n1 2 0\n3 4 0\n");
  InitialScores favor_v3;
  favor_v3.v = {0.0, 0.0, 5.0, 0.0};
  SolveResult res = solve(inst, SolverConfig{}, &favor_v3);
  REQUIRE(res.verdict == Verdict::Sat);
  CHECK(witness_ok(inst, res.witness));

  InitialScores bad;
  bad.v = {1.0, std::numeric_limits<double>::infinity(), 0.0, 0.0};
  CHECK_THROWS_AS(solve(inst, SolverConfig{}, &bad), std::invalid_argument);
}

TEST_CASE("solver config validation") {
  SolverConfig cfg;
  cfg.vsids_decay = 1.5;
  CHECK_THROWS_AS(solve(fixtures::example_sat3(), cfg), std::invalid_argument);
}
