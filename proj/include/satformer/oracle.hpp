#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "satformer/cnf.hpp"

namespace satformer {

struct OracleConfig {
  int max_vars = 26;                // solve_exhaustive refuses above this
  int enumeration_max_clauses = 20; // minimum-core subset enumeration cap
};

struct OracleVerdict {
  bool is_sat = false;
  // Present iff is_sat; witness[j] is the value of variable j+1.
  std::vector<bool> witness;
};

struct CoreResult {
  // Sorted 0-based clause indices of an unsatisfiable subset that is
  // irreducible (removing any one clause yields SAT).
  std::vector<int> core_indices;
  // True when found by size-increasing subset enumeration, i.e. the core has
  // globally minimal cardinality. False for the deletion-based fallback,
  // which is minimal-only.
  bool is_minimum = false;

  int size() const { return int(core_indices.size()); }
};

// Complete verdict by truth-table enumeration (m <= 16) or DPLL with unit
// propagation (16 < m <= max_vars). Throws std::invalid_argument above cap.
OracleVerdict solve_exhaustive(const CnfInstance& inst, const OracleConfig& cfg = {});

// Smallest-cardinality unsatisfiable subset, ties broken by lexicographically
// smallest index tuple. Falls back to deletion-based minimization when the
// clause count exceeds cfg.enumeration_max_clauses. Throws
// std::invalid_argument if the instance is satisfiable.
CoreResult minimal_unsat_core(const CnfInstance& inst, const OracleConfig& cfg = {});

// Binary vector of length n with ones exactly at core indices.
std::vector<uint8_t> core_mask(const CnfInstance& inst, const CoreResult& core);

// All-zeros mask for a satisfiable instance.
std::vector<uint8_t> core_mask_sat(const CnfInstance& inst);

// Verdict for the sub-instance restricted to the given clause indices.
bool subset_is_sat(const CnfInstance& inst, const std::vector<int>& clause_indices,
                   const OracleConfig& cfg = {});

}  // namespace satformer
