#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace satformer {

// A variable or its negation. Variables are 1-based, matching DIMACS.
struct Literal {
  int var = 1;
  bool negated = false;

  // LCG node slot: positive literal of var j sits at 2j-2, negative at 2j-1.
  int slot() const { return 2 * (var - 1) + (negated ? 1 : 0); }
  int to_dimacs() const { return negated ? -var : var; }
  static Literal from_dimacs(int x) { return Literal{x < 0 ? -x : x, x < 0}; }

  bool operator==(const Literal&) const = default;
};

struct Clause {
  std::vector<Literal> literals;

  bool operator==(const Clause&) const = default;
};

// CNF instance: m variables, ordered clause list. Clause order is
// significant; clause indices are stable labels (0-based internally,
// 1-based in reports).
struct CnfInstance {
  int num_vars = 0;
  std::vector<Clause> clauses;

  int num_clauses() const { return int(clauses.size()); }

  bool operator==(const CnfInstance&) const = default;
};

struct ParseError : std::runtime_error {
  int line;
  ParseError(int line_no, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line_no) + ": " + msg),
        line(line_no) {}
};

// DIMACS CNF: `c` comments permitted anywhere before EOF, one `p cnf M N`
// header, clauses as 0-terminated integer lists (may span lines).
CnfInstance parse_dimacs(std::istream& in);
CnfInstance parse_dimacs(const std::string& text);
CnfInstance parse_dimacs_file(const std::string& path);

// Round-trip contract: parse_dimacs(serialize_dimacs(x)) == x.
std::string serialize_dimacs(const CnfInstance& inst);

// Bipartite literal/clause graph. Literal slots pair with their negation via
// slot ^ 1.
struct LiteralClauseGraph {
  int num_vars = 0;
  int num_clauses = 0;
  // (literal slot, clause index), enumerated clause-major in literal order.
  std::vector<std::pair<int, int>> edges;

  int num_literal_nodes() const { return 2 * num_vars; }
  static int negation_partner(int slot) { return slot ^ 1; }
};

LiteralClauseGraph build_lcg(const CnfInstance& inst);

// Dense boolean occurrence matrix: at(j, i) == 1 iff variable j+1 occurs in
// clause i (either polarity).
struct VarClauseAdjacency {
  int num_vars = 0;
  int num_clauses = 0;
  std::vector<uint8_t> cells;  // row-major num_vars x num_clauses

  uint8_t at(int var_row, int clause_col) const {
    return cells[size_t(var_row) * num_clauses + clause_col];
  }
};

VarClauseAdjacency var_clause_adjacency(const CnfInstance& inst);

}  // namespace satformer
