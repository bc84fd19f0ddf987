#include "satformer/oracle.hpp"

#include <algorithm>
#include <stdexcept>

namespace satformer {

namespace {

// Clause as positive/negative variable bitmasks; assignment bit j is the
// value of variable j+1. A clause is satisfied by assignment a iff
// (a & pos) | (~a & neg) is nonzero.
struct MaskClause {
  uint32_t pos = 0;
  uint32_t neg = 0;
};

std::vector<MaskClause> to_masks(const CnfInstance& inst) {
  std::vector<MaskClause> out(inst.clauses.size());
  for (size_t i = 0; i < inst.clauses.size(); ++i) {
    for (const Literal& lit : inst.clauses[i].literals) {
      uint32_t bit = uint32_t(1) << (lit.var - 1);
      if (lit.negated) {
        out[i].neg |= bit;
      } else {
        out[i].pos |= bit;
      }
    }
  }
  return out;
}

std::optional<uint32_t> truth_table_witness(const std::vector<MaskClause>& clauses,
                                            const std::vector<int>& subset, int m) {
  uint64_t total = uint64_t(1) << m;
  for (uint64_t a = 0; a < total; ++a) {
    uint32_t assign = uint32_t(a);
    bool ok = true;
    for (int ci : subset) {
      const MaskClause& c = clauses[ci];
      if (((assign & c.pos) | (~assign & c.neg)) == 0) {
        ok = false;
        break;
      }
    }
    if (ok) return assign;
  }
  return std::nullopt;
}

// Complete DPLL with unit propagation over a clause subset.
class Dpll {
 public:
  Dpll(const CnfInstance& inst, const std::vector<int>& subset) : inst_(inst) {
    clause_lits_.reserve(subset.size());
    for (int ci : subset) {
      std::vector<int> lits;
      lits.reserve(inst.clauses[ci].literals.size());
      for (const Literal& lit : inst.clauses[ci].literals) {
        lits.push_back(lit.negated ? -(lit.var) : lit.var);
      }
      clause_lits_.push_back(std::move(lits));
    }
    assign_.assign(size_t(inst.num_vars) + 1, 0);
  }

  std::optional<std::vector<bool>> solve() {
    if (!search()) return std::nullopt;
    std::vector<bool> witness(size_t(inst_.num_vars));
    for (int v = 1; v <= inst_.num_vars; ++v) witness[size_t(v - 1)] = assign_[size_t(v)] > 0;
    return witness;
  }

 private:
  bool search() {
    // Unit propagation to fixpoint.
    std::vector<int> trail;
    for (;;) {
      int unit = 0;
      for (const auto& lits : clause_lits_) {
        int unassigned = 0;
        int free_lit = 0;
        bool sat = false;
        for (int l : lits) {
          int v = l > 0 ? l : -l;
          int a = assign_[size_t(v)];
          if (a == 0) {
            ++unassigned;
            free_lit = l;
          } else if ((a > 0) == (l > 0)) {
            sat = true;
            break;
          }
        }
        if (sat) continue;
        if (unassigned == 0) {
          for (int l : trail) assign_[size_t(l > 0 ? l : -l)] = 0;
          return false;  // conflict
        }
        if (unassigned == 1) {
          unit = free_lit;
          break;
        }
      }
      if (unit == 0) break;
      assign_[size_t(unit > 0 ? unit : -unit)] = unit > 0 ? 1 : -1;
      trail.push_back(unit);
    }

    int branch = 0;
    for (int v = 1; v <= inst_.num_vars; ++v) {
      if (assign_[size_t(v)] == 0) {
        branch = v;
        break;
      }
    }
    if (branch == 0) return true;  // all assigned, no conflict

    for (int phase : {1, -1}) {
      assign_[size_t(branch)] = phase;
      if (search()) return true;
    }
    assign_[size_t(branch)] = 0;
    for (int l : trail) assign_[size_t(l > 0 ? l : -l)] = 0;
    return false;
  }

  const CnfInstance& inst_;
  std::vector<std::vector<int>> clause_lits_;
  std::vector<int> assign_;  // 0 unassigned, +1 true, -1 false
};

std::vector<int> all_indices(const CnfInstance& inst) {
  std::vector<int> idx(size_t(inst.num_clauses()));
  for (int i = 0; i < inst.num_clauses(); ++i) idx[size_t(i)] = i;
  return idx;
}

OracleVerdict solve_subset(const CnfInstance& inst, const std::vector<int>& subset,
                           const OracleConfig& cfg) {
  if (inst.num_vars > cfg.max_vars) {
    throw std::invalid_argument("solve_exhaustive: " + std::to_string(inst.num_vars) +
                                " variables exceeds cap " + std::to_string(cfg.max_vars));
  }
  OracleVerdict v;
  if (inst.num_vars <= 16) {
    auto masks = to_masks(inst);
    auto witness = truth_table_witness(masks, subset, inst.num_vars);
    v.is_sat = witness.has_value();
    if (v.is_sat) {
      v.witness.resize(size_t(inst.num_vars));
      for (int j = 0; j < inst.num_vars; ++j) v.witness[size_t(j)] = (*witness >> j) & 1;
    }
  } else {
    Dpll dpll(inst, subset);
    auto witness = dpll.solve();
    v.is_sat = witness.has_value();
    if (v.is_sat) v.witness = std::move(*witness);
  }
  return v;
}

}  // namespace

OracleVerdict solve_exhaustive(const CnfInstance& inst, const OracleConfig& cfg) {
  return solve_subset(inst, all_indices(inst), cfg);
}

bool subset_is_sat(const CnfInstance& inst, const std::vector<int>& clause_indices,
                   const OracleConfig& cfg) {
  return solve_subset(inst, clause_indices, cfg).is_sat;
}

CoreResult minimal_unsat_core(const CnfInstance& inst, const OracleConfig& cfg) {
  if (solve_exhaustive(inst, cfg).is_sat) {
    throw std::invalid_argument("minimal_unsat_core: instance is satisfiable");
  }
  int n = inst.num_clauses();

  CoreResult result;
  if (n <= cfg.enumeration_max_clauses) {
    // Size-increasing subset enumeration, lexicographic within each size:
    // the first unsatisfiable subset found is the minimum core.
    for (int s = 1; s <= n; ++s) {
      std::vector<int> combo(size_t(s), 0);
      for (int i = 0; i < s; ++i) combo[size_t(i)] = i;
      for (;;) {
        if (!subset_is_sat(inst, combo, cfg)) {
          result.core_indices = combo;
          result.is_minimum = true;
          return result;
        }
        // Next combination in lexicographic order.
        int i = s - 1;
        while (i >= 0 && combo[size_t(i)] == n - s + i) --i;
        if (i < 0) break;
        ++combo[size_t(i)];
        for (int j = i + 1; j < s; ++j) combo[size_t(j)] = combo[size_t(j - 1)] + 1;
      }
    }
    // Unreachable: the full set itself is unsatisfiable.
    throw std::logic_error("minimal_unsat_core: enumeration exhausted");
  }

  // Deletion-based minimization: one ascending pass yields an irreducible
  // core (removal was tested against a superset of the final set, so every
  // kept clause stays necessary).
  std::vector<int> working = all_indices(inst);
  for (int i = 0; i < n; ++i) {
    std::vector<int> trial;
    trial.reserve(working.size());
    for (int idx : working) {
      if (idx != i) trial.push_back(idx);
    }
    if (trial.size() < working.size() && !subset_is_sat(inst, trial, cfg)) {
      working = std::move(trial);
    }
  }
  result.core_indices = std::move(working);
  result.is_minimum = false;
  return result;
}

std::vector<uint8_t> core_mask(const CnfInstance& inst, const CoreResult& core) {
  std::vector<uint8_t> mask(size_t(inst.num_clauses()), 0);
  for (int idx : core.core_indices) {
    if (idx < 0 || idx >= inst.num_clauses()) {
      throw std::out_of_range("core_mask: clause index " + std::to_string(idx) +
                              " out of range for n=" + std::to_string(inst.num_clauses()));
    }
    mask[size_t(idx)] = 1;
  }
  return mask;
}

std::vector<uint8_t> core_mask_sat(const CnfInstance& inst) {
  return std::vector<uint8_t>(size_t(inst.num_clauses()), 0);
}

}  // namespace satformer
