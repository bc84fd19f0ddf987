#include "satformer/cnf.hpp"
#include "satformer/errors.hpp"

#include <fstream>
#include <istream>
#include <sstream>

namespace satformer {

namespace {

// Token reader that tracks line numbers and classifies comment lines.
class DimacsLexer {
 public:
  explicit DimacsLexer(std::istream& in) : in_(in) {}

  int line() const { return line_; }

  // Next non-comment token, or empty string at EOF.
  std::string next() {
    for (;;) {
      skip_ws();
      int c = in_.peek();
      if (c == EOF) return {};
      if (c == 'c' && at_line_start_) {
        std::string rest;
        std::getline(in_, rest);
        ++line_;
        at_line_start_ = true;
        continue;
      }
      std::string tok;
      while ((c = in_.peek()) != EOF && !std::isspace(c)) {
        tok.push_back(char(in_.get()));
      }
      at_line_start_ = false;
      return tok;
    }
  }

 private:
  void skip_ws() {
    int c;
    while ((c = in_.peek()) != EOF && std::isspace(c)) {
      in_.get();
      if (c == '\n') {
        ++line_;
        at_line_start_ = true;
      }
    }
  }

  std::istream& in_;
  int line_ = 1;
  bool at_line_start_ = true;
};

int parse_int(const std::string& tok, int line, const char* what) {
  size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(tok, &pos);
  } catch (const std::exception&) {
    throw ParseError(line, std::string("non-integer ") + what + " token '" + tok + "'");
  }
  if (pos != tok.size()) {
    throw ParseError(line, std::string("non-integer ") + what + " token '" + tok + "'");
  }
  if (v > 1000000000LL || v < -1000000000LL) {
    throw ParseError(line, std::string(what) + " out of range: " + tok);
  }
  return int(v);
}

}  // namespace

CnfInstance parse_dimacs(std::istream& in) {
  DimacsLexer lex(in);

  // Header.
  std::string tok = lex.next();
  if (tok.empty()) throw ParseError(lex.line(), "missing 'p cnf' header");
  if (tok != "p") throw ParseError(lex.line(), "expected 'p cnf' header, got '" + tok + "'");
  tok = lex.next();
  if (tok != "cnf") throw ParseError(lex.line(), "expected 'cnf' after 'p', got '" + tok + "'");
  int num_vars = parse_int(lex.next(), lex.line(), "variable count");
  int declared_clauses = parse_int(lex.next(), lex.line(), "clause count");
  if (num_vars < 0) throw ParseError(lex.line(), "negative variable count");
  if (declared_clauses < 0) throw ParseError(lex.line(), "negative clause count");

  CnfInstance inst;
  inst.num_vars = num_vars;
  inst.clauses.reserve(size_t(declared_clauses));

  Clause current;
  bool clause_open = false;
  for (;;) {
    tok = lex.next();
    if (tok.empty()) break;  // EOF
    if (tok == "p") throw ParseError(lex.line(), "duplicate 'p cnf' header");
    int x = parse_int(tok, lex.line(), "literal");
    if (x == 0) {
      if (!clause_open) throw ParseError(lex.line(), "empty clause");
      if (int(inst.clauses.size()) == declared_clauses) {
        throw ParseError(lex.line(), "more clauses than declared (" +
                                         std::to_string(declared_clauses) + ")");
      }
      inst.clauses.push_back(std::move(current));
      current = Clause{};
      clause_open = false;
      continue;
    }
    Literal lit = Literal::from_dimacs(x);
    if (lit.var > num_vars) {
      throw ParseError(lex.line(), "variable " + std::to_string(lit.var) +
                                       " exceeds declared " + std::to_string(num_vars));
    }
    for (const Literal& prev : current.literals) {
      if (prev == lit) {
        throw ParseError(lex.line(), "duplicate literal " + std::to_string(x) + " in clause");
      }
    }
    current.literals.push_back(lit);
    clause_open = true;
  }
  if (clause_open) throw ParseError(lex.line(), "unterminated clause at end of input");
  if (int(inst.clauses.size()) != declared_clauses) {
    throw ParseError(lex.line(), "declared " + std::to_string(declared_clauses) +
                                     " clauses but found " +
                                     std::to_string(inst.clauses.size()));
  }
  return inst;
}

CnfInstance parse_dimacs(const std::string& text) {
  std::istringstream in(text);
  return parse_dimacs(in);
}

CnfInstance parse_dimacs_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open CNF file: " + path);
  return parse_dimacs(in);
}

std::string serialize_dimacs(const CnfInstance& inst) {
  std::string out;
  out += "p cnf " + std::to_string(inst.num_vars) + " " +
         std::to_string(inst.num_clauses()) + "\n";
  for (const Clause& c : inst.clauses) {
    for (const Literal& lit : c.literals) {
      out += std::to_string(lit.to_dimacs());
      out += ' ';
    }
    out += "0\n";
  }
  return out;
}

LiteralClauseGraph build_lcg(const CnfInstance& inst) {
  LiteralClauseGraph g;
  g.num_vars = inst.num_vars;
  g.num_clauses = inst.num_clauses();
  for (int ci = 0; ci < g.num_clauses; ++ci) {
    for (const Literal& lit : inst.clauses[ci].literals) {
      g.edges.emplace_back(lit.slot(), ci);
    }
  }
  return g;
}

VarClauseAdjacency var_clause_adjacency(const CnfInstance& inst) {
  VarClauseAdjacency a;
  a.num_vars = inst.num_vars;
  a.num_clauses = inst.num_clauses();
  a.cells.assign(size_t(a.num_vars) * a.num_clauses, 0);
  for (int ci = 0; ci < a.num_clauses; ++ci) {
    for (const Literal& lit : inst.clauses[ci].literals) {
      a.cells[size_t(lit.var - 1) * a.num_clauses + ci] = 1;
    }
  }
  return a;
}

}  // namespace satformer
