#include "satformer/solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace satformer {

namespace {

// Internal literal encoding: lit = 2*var + sign, var 0-based, sign 1 for
// negated. neg(lit) = lit ^ 1.
inline int lit_of(const Literal& l) { return 2 * (l.var - 1) + (l.negated ? 1 : 0); }
inline int lit_var(int lit) { return lit >> 1; }
inline bool lit_sign(int lit) { return lit & 1; }
inline int to_dimacs_lit(int lit) { return lit_sign(lit) ? -(lit_var(lit) + 1) : lit_var(lit) + 1; }

enum : int8_t { kUndef = 0, kTrue = 1, kFalse = -1 };

int64_t luby(int64_t i) {
  // Finite-subsequence Luby value for 1-based index i.
  int64_t k = 1;
  while ((int64_t(1) << (k + 1)) <= i + 1) ++k;
  for (;;) {
    if ((int64_t(1) << k) == i + 1) return int64_t(1) << (k - 1);
    i = i - (int64_t(1) << k) + 1;
    k = 1;
    while ((int64_t(1) << (k + 1)) <= i + 1) ++k;
  }
}

class CdclSolver {
 public:
  CdclSolver(const CnfInstance& inst, const SolverConfig& cfg, const InitialScores* init)
      : cfg_(cfg), num_vars_(inst.num_vars) {
    assign_.assign(size_t(num_vars_), kUndef);
    level_.assign(size_t(num_vars_), 0);
    reason_.assign(size_t(num_vars_), -1);
    activity_.assign(size_t(num_vars_), 0.0);
    phase_.assign(size_t(num_vars_), false);
    seen_.assign(size_t(num_vars_), false);
    watches_.assign(size_t(2 * num_vars_), {});
    var_inc_ = cfg.activity_bump;

    if (init != nullptr) {
      if (int(init->v.size()) != num_vars_) {
        throw std::invalid_argument("initial scores: expected " + std::to_string(num_vars_) +
                                    " entries, got " + std::to_string(init->v.size()));
      }
      for (int v = 0; v < num_vars_; ++v) {
        if (!(init->v[size_t(v)] >= 0.0) || !std::isfinite(init->v[size_t(v)])) {
          throw std::invalid_argument("initial scores must be finite and nonnegative");
        }
        activity_[size_t(v)] = init->v[size_t(v)];
      }
    }

    for (const Clause& c : inst.clauses) {
      std::vector<int> lits;
      lits.reserve(c.literals.size());
      for (const Literal& l : c.literals) {
        int lit = lit_of(l);
        if (std::find(lits.begin(), lits.end(), lit) == lits.end()) lits.push_back(lit);
      }
      if (!add_original_clause(std::move(lits))) {
        ok_ = false;
        return;
      }
    }
  }

  SolveResult run() {
    SolveResult result;
    if (!ok_) {
      result.verdict = Verdict::Unsat;
      result.stats = stats_;
      result.learnts = recorded_;
      return result;
    }

    int64_t restart_index = 1;
    int64_t conflicts_since_restart = 0;
    int64_t reduce_cap = 300;

    for (;;) {
      int confl = propagate();
      if (confl >= 0) {
        ++stats_.conflicts;
        ++conflicts_since_restart;
        if (decision_level() == 0) {
          result.verdict = Verdict::Unsat;
          break;
        }
        std::vector<int> learnt;
        int bt_level = 0, lbd = 0;
        analyze(confl, learnt, bt_level, lbd);
        backtrack(bt_level);
        attach_learnt(std::move(learnt), lbd);
        var_inc_ /= cfg_.vsids_decay;
        cla_inc_ /= 0.999;
        if (cfg_.conflict_limit >= 0 && stats_.conflicts >= cfg_.conflict_limit) {
          result.verdict = Verdict::Unknown;
          break;
        }
        continue;
      }

      if (cfg_.check_invariants) check_watch_integrity();

      if (conflicts_since_restart >= cfg_.luby_unit * luby(restart_index)) {
        ++restart_index;
        ++stats_.restarts;
        conflicts_since_restart = 0;
        backtrack(0);
        continue;
      }
      if (live_learnts_ > reduce_cap) {
        reduce_db();
        reduce_cap = int64_t(double(reduce_cap) * 1.3) + 16;
      }

      int decision = pick_branch_lit();
      if (decision < 0) {
        result.verdict = Verdict::Sat;
        result.witness.resize(size_t(num_vars_));
        for (int v = 0; v < num_vars_; ++v) result.witness[size_t(v)] = assign_[size_t(v)] == kTrue;
        break;
      }
      ++stats_.decisions;
      trail_lim_.push_back(int(trail_.size()));
      enqueue(decision, -1);
    }

    result.stats = stats_;
    result.learnts = std::move(recorded_);
    return result;
  }

 private:
  struct InternalClause {
    std::vector<int> lits;
    double activity = 0.0;
    int lbd = 0;
    bool learnt = false;
    bool deleted = false;
  };

  int decision_level() const { return int(trail_lim_.size()); }

  int8_t value_lit(int lit) const {
    int8_t a = assign_[size_t(lit_var(lit))];
    if (a == kUndef) return kUndef;
    return (a == kTrue) != lit_sign(lit) ? kTrue : kFalse;
  }

  bool add_original_clause(std::vector<int> lits) {
    if (lits.empty()) return false;  // empty clause: immediately UNSAT
    if (lits.size() == 1) {
      int8_t v = value_lit(lits[0]);
      if (v == kFalse) return false;
      if (v == kUndef) enqueue(lits[0], -1);
      return true;
    }
    attach(int(clauses_.size()), lits);
    clauses_.push_back(InternalClause{std::move(lits), 0.0, 0, false, false});
    return true;
  }

  void attach(int ci, const std::vector<int>& lits) {
    watches_[size_t(lits[0])].push_back(ci);
    watches_[size_t(lits[1])].push_back(ci);
  }

  void detach(int ci) {
    const InternalClause& c = clauses_[size_t(ci)];
    for (int k = 0; k < 2; ++k) {
      auto& w = watches_[size_t(c.lits[size_t(k)])];
      w.erase(std::find(w.begin(), w.end(), ci));
    }
  }

  void enqueue(int lit, int reason) {
    int v = lit_var(lit);
    assign_[size_t(v)] = lit_sign(lit) ? kFalse : kTrue;
    level_[size_t(v)] = decision_level();
    reason_[size_t(v)] = reason;
    trail_.push_back(lit);
  }

  // Returns conflicting clause index or -1.
  int propagate() {
    while (qhead_ < trail_.size()) {
      int p = trail_[qhead_++];
      int falsified = p ^ 1;
      auto& watch_list = watches_[size_t(falsified)];
      size_t keep = 0;
      for (size_t wi = 0; wi < watch_list.size(); ++wi) {
        int ci = watch_list[wi];
        InternalClause& c = clauses_[size_t(ci)];
        auto& lits = c.lits;
        if (lits[0] == falsified) std::swap(lits[0], lits[1]);
        if (value_lit(lits[0]) == kTrue) {
          watch_list[keep++] = ci;
          continue;
        }
        bool moved = false;
        for (size_t k = 2; k < lits.size(); ++k) {
          if (value_lit(lits[size_t(k)]) != kFalse) {
            std::swap(lits[1], lits[size_t(k)]);
            watches_[size_t(lits[1])].push_back(ci);
            moved = true;
            break;
          }
        }
        if (moved) continue;
        // Unit or conflict.
        watch_list[keep++] = ci;
        if (value_lit(lits[0]) == kFalse) {
          for (size_t rest = wi + 1; rest < watch_list.size(); ++rest) {
            watch_list[keep++] = watch_list[rest];
          }
          watch_list.resize(keep);
          qhead_ = trail_.size();
          return ci;
        }
        ++stats_.propagations;
        enqueue(lits[0], ci);
      }
      watch_list.resize(keep);
    }
    return -1;
  }

  void bump_var(int v) {
    activity_[size_t(v)] += var_inc_;
    if (activity_[size_t(v)] > 1e100) {
      for (double& a : activity_) a *= 1e-100;
      var_inc_ *= 1e-100;
    }
  }

  void bump_clause(InternalClause& c) {
    c.activity += cla_inc_;
    if (c.activity > 1e100) {
      for (InternalClause& cc : clauses_) {
        if (cc.learnt) cc.activity *= 1e-100;
      }
      cla_inc_ *= 1e-100;
    }
  }

  // First-UIP conflict analysis; learned-clause minimization intentionally
  // off.
  void analyze(int confl, std::vector<int>& learnt, int& bt_level, int& lbd) {
    learnt.clear();
    learnt.push_back(0);  // slot for the asserting literal
    std::vector<int> to_clear;
    int counter = 0;
    int p = -1;
    size_t idx = trail_.size();

    for (;;) {
      InternalClause& c = clauses_[size_t(confl)];
      if (c.learnt) bump_clause(c);
      for (int q : c.lits) {
        int v = lit_var(q);
        if (p != -1 && v == lit_var(p)) continue;
        if (!seen_[size_t(v)] && level_[size_t(v)] > 0) {
          seen_[size_t(v)] = true;
          to_clear.push_back(v);
          bump_var(v);
          if (level_[size_t(v)] >= decision_level()) {
            ++counter;
          } else {
            learnt.push_back(q);
          }
        }
      }
      while (!seen_[size_t(lit_var(trail_[--idx]))]) {
      }
      p = trail_[idx];
      seen_[size_t(lit_var(p))] = false;
      --counter;
      if (counter == 0) break;
      confl = reason_[size_t(lit_var(p))];
    }
    learnt[0] = p ^ 1;

    bt_level = 0;
    if (learnt.size() > 1) {
      size_t max_i = 1;
      for (size_t i = 2; i < learnt.size(); ++i) {
        if (level_[size_t(lit_var(learnt[i]))] > level_[size_t(lit_var(learnt[max_i]))]) max_i = i;
      }
      std::swap(learnt[1], learnt[max_i]);
      bt_level = level_[size_t(lit_var(learnt[1]))];
    }

    std::vector<int> levels;
    for (int q : learnt) levels.push_back(level_[size_t(lit_var(q))]);
    std::sort(levels.begin(), levels.end());
    lbd = int(std::unique(levels.begin(), levels.end()) - levels.begin());

    for (int v : to_clear) seen_[size_t(v)] = false;
  }

  void attach_learnt(std::vector<int> learnt, int lbd) {
    ++stats_.learnt_clauses;
    if (cfg_.record_learnts) {
      std::vector<int> dimacs;
      dimacs.reserve(learnt.size());
      for (int q : learnt) dimacs.push_back(to_dimacs_lit(q));
      recorded_.push_back(std::move(dimacs));
    }
    if (learnt.size() == 1) {
      enqueue(learnt[0], -1);
      return;
    }
    int ci = int(clauses_.size());
    attach(ci, learnt);
    int asserting = learnt[0];
    clauses_.push_back(InternalClause{std::move(learnt), cla_inc_, lbd, true, false});
    ++live_learnts_;
    enqueue(asserting, ci);
  }

  void backtrack(int target_level) {
    if (decision_level() <= target_level) return;
    int boundary = trail_lim_[size_t(target_level)];
    for (int i = int(trail_.size()) - 1; i >= boundary; --i) {
      int v = lit_var(trail_[size_t(i)]);
      if (cfg_.phase_saving) phase_[size_t(v)] = assign_[size_t(v)] == kTrue;
      assign_[size_t(v)] = kUndef;
      reason_[size_t(v)] = -1;
    }
    trail_.resize(size_t(boundary));
    trail_lim_.resize(size_t(target_level));
    qhead_ = trail_.size();
  }

  int pick_branch_lit() {
    int best = -1;
    for (int v = 0; v < num_vars_; ++v) {
      if (assign_[size_t(v)] != kUndef) continue;
      if (best < 0 || activity_[size_t(v)] > activity_[size_t(best)]) best = v;
    }
    if (best < 0) return -1;
    return 2 * best + (phase_[size_t(best)] ? 0 : 1);
  }

  bool clause_locked(int ci) const {
    const InternalClause& c = clauses_[size_t(ci)];
    int v = lit_var(c.lits[0]);
    return assign_[size_t(v)] != kUndef && reason_[size_t(v)] == ci;
  }

  void reduce_db() {
    std::vector<int> candidates;
    for (int ci = 0; ci < int(clauses_.size()); ++ci) {
      const InternalClause& c = clauses_[size_t(ci)];
      if (c.learnt && !c.deleted && c.lbd > 2 && !clause_locked(ci)) candidates.push_back(ci);
    }
    std::sort(candidates.begin(), candidates.end(), [&](int a, int b) {
      const InternalClause& ca = clauses_[size_t(a)];
      const InternalClause& cb = clauses_[size_t(b)];
      if (ca.lbd != cb.lbd) return ca.lbd > cb.lbd;
      if (ca.activity != cb.activity) return ca.activity < cb.activity;
      return a < b;
    });
    size_t drop = candidates.size() / 2;
    for (size_t i = 0; i < drop; ++i) {
      int ci = candidates[i];
      detach(ci);
      clauses_[size_t(ci)].deleted = true;
      clauses_[size_t(ci)].lits.clear();
      --live_learnts_;
    }
  }

  void check_watch_integrity() const {
    for (int ci = 0; ci < int(clauses_.size()); ++ci) {
      const InternalClause& c = clauses_[size_t(ci)];
      if (c.deleted) continue;
      bool all_false = true;
      for (int q : c.lits) {
        if (value_lit(q) != kFalse) {
          all_false = false;
          break;
        }
      }
      if (all_false) {
        throw std::logic_error("watched-literal integrity: clause falsified but unnoticed");
      }
    }
  }

  SolverConfig cfg_;
  int num_vars_;
  bool ok_ = true;

  std::vector<InternalClause> clauses_;
  std::vector<std::vector<int>> watches_;
  std::vector<int8_t> assign_;
  std::vector<int> level_;
  std::vector<int> reason_;
  std::vector<double> activity_;
  std::vector<bool> phase_;
  std::vector<bool> seen_;
  std::vector<int> trail_;
  std::vector<int> trail_lim_;
  size_t qhead_ = 0;
  double var_inc_ = 1.0;
  double cla_inc_ = 1.0;
  int64_t live_learnts_ = 0;

  SolveStats stats_;
  std::vector<std::vector<int>> recorded_;
};

bool witness_satisfies(const CnfInstance& inst, const std::vector<bool>& witness) {
  for (const Clause& c : inst.clauses) {
    bool sat = false;
    for (const Literal& l : c.literals) {
      if (witness[size_t(l.var - 1)] != l.negated) {
        sat = true;
        break;
      }
    }
    if (!sat) return false;
  }
  return true;
}

}  // namespace

InitialScores init_scores(const VarClauseAdjacency& adjacency,
                          const std::vector<double>& y_clause, double y_sat,
                          double threshold) {
  if (int(y_clause.size()) != adjacency.num_clauses) {
    throw std::invalid_argument("init_scores: got " + std::to_string(y_clause.size()) +
                                " clause scores for " + std::to_string(adjacency.num_clauses) +
                                " clauses");
  }
  InitialScores out;
  out.v.assign(size_t(adjacency.num_vars), 0.0);
  if (y_sat >= threshold) return out;  // predicted SAT: initialization loop skipped
  for (int j = 0; j < adjacency.num_vars; ++j) {
    double acc = 0.0;
    for (int i = 0; i < adjacency.num_clauses; ++i) {
      if (adjacency.at(j, i)) acc += y_clause[size_t(i)];
    }
    out.v[size_t(j)] = acc;
  }
  return out;
}

SolveResult solve(const CnfInstance& inst, const SolverConfig& cfg, const InitialScores* initial) {
  if (cfg.vsids_decay <= 0.0 || cfg.vsids_decay >= 1.0) {
    throw std::invalid_argument("solver config: vsids_decay must lie in (0,1)");
  }
  CdclSolver solver(inst, cfg, initial);
  SolveResult result = solver.run();
  if (result.verdict == Verdict::Sat && !witness_satisfies(inst, result.witness)) {
    throw std::logic_error("solver returned SAT with an invalid witness");
  }
  return result;
}

CompareResult compare_runs(const CnfInstance& inst, const SolverConfig& cfg,
                           const InitialScores& initial) {
  CompareResult out;
  out.without_init = solve(inst, cfg, nullptr);
  out.with_init = solve(inst, cfg, &initial);
  auto reduction = [](int64_t a, int64_t b) {
    return a == 0 ? 0.0 : double(a - b) / double(a) * 100.0;
  };
  out.lemma_reduction_pct =
      reduction(out.without_init.stats.learnt_clauses, out.with_init.stats.learnt_clauses);
  out.decision_reduction_pct =
      reduction(out.without_init.stats.decisions, out.with_init.stats.decisions);
  return out;
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Sat:
      return "SAT";
    case Verdict::Unsat:
      return "UNSAT";
    case Verdict::Unknown:
      return "UNKNOWN";
  }
  return "UNKNOWN";
}

}  // namespace satformer
