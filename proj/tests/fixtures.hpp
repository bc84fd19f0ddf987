#pragma once

#include <string>
#include <vector>

#include "satformer/cnf.hpp"

namespace fixtures {

// (~x1 | x2) & (~x2 | ~x3) & (x1 | x3): the satisfiable 3-var worked example.
inline satformer::CnfInstance example_sat3() {
  return satformer::parse_dimacs("p cnf 3 3\n-1 2 0\n-2 -3 0\n1 3 0\n");
}

// The 9-clause unsatisfiable instance whose minimum core is {C2, C5, C6}.
inline const char* unsat9_dimacs() {
  return
      "p cnf 3 9\n"
      "-1 2 -3 0\n"
      "2 0\n"
      "-1 -2 -3 0\n"
      "-1 2 3 0\n"
      "1 -2 0\n"
      "-1 0\n"
      "1 -2 3 0\n"
      "1 2 3 0\n"
      "1 -3 0\n";
}

inline satformer::CnfInstance example_unsat9() {
  return satformer::parse_dimacs(unsat9_dimacs());
}

// Clause orderings of the two equivalent unsatisfiable case-study instances:
// phi_U1 keeps C1..C9; phi_U2 swaps C6 and C9 so the core spans all windows
// at w=3.
inline satformer::CnfInstance phi_u1() { return example_unsat9(); }

inline satformer::CnfInstance phi_u2() {
  satformer::CnfInstance base = example_unsat9();
  satformer::CnfInstance out = base;
  out.clauses[5] = base.clauses[8];  // position 6 <- C9
  out.clauses[8] = base.clauses[5];  // position 9 <- C6
  return out;
}

}  // namespace fixtures
