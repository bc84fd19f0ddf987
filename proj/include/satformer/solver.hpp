#pragma once

#include <cstdint>
#include <vector>

#include "satformer/cnf.hpp"

namespace satformer {

struct SolverConfig {
  double vsids_decay = 0.95;
  double activity_bump = 1.0;
  int luby_unit = 64;           // restart interval unit, in conflicts
  bool phase_saving = true;
  int64_t conflict_limit = -1;  // < 0: unlimited
  bool record_learnts = false;  // keep learnt clauses in the result
  bool check_invariants = false;  // watched-literal integrity scan per fixpoint
};

// Initial VSIDS activities: one nonnegative score per variable.
struct InitialScores {
  std::vector<double> v;
};

enum class Verdict { Sat, Unsat, Unknown };

struct SolveStats {
  int64_t decisions = 0;
  int64_t conflicts = 0;
  int64_t propagations = 0;
  int64_t learnt_clauses = 0;  // "# Lemma"
  int64_t restarts = 0;
};

struct SolveResult {
  Verdict verdict = Verdict::Unknown;
  std::vector<bool> witness;  // present iff SAT; witness[j] is var j+1
  SolveStats stats;
  std::vector<std::vector<int>> learnts;  // DIMACS literals, if recorded
};

// If the model predicts UNSAT (y_sat < threshold), v_j = sum_i A[j][i]*y_i;
// otherwise all zeros.
InitialScores init_scores(const VarClauseAdjacency& adjacency,
                          const std::vector<double>& y_clause, double y_sat,
                          double threshold = 0.5);

// Complete CDCL with two-watched-literal propagation, first-UIP learning,
// EVSIDS branching, Luby restarts, and phase saving. Verdict is UNKNOWN only
// when a conflict limit is set and exceeded.
SolveResult solve(const CnfInstance& inst, const SolverConfig& cfg = {},
                  const InitialScores* initial = nullptr);

struct CompareResult {
  SolveResult without_init;
  SolveResult with_init;
  double lemma_reduction_pct = 0.0;
  double decision_reduction_pct = 0.0;
};

// Both arms of the Table-VII style comparison: zero initialization vs the
// provided scores. Reduction is (a - b) / a * 100 with a the zero-init arm.
CompareResult compare_runs(const CnfInstance& inst, const SolverConfig& cfg,
                           const InitialScores& initial);

const char* verdict_name(Verdict v);

}  // namespace satformer
