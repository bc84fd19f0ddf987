#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "satformer/cnf.hpp"
#include "satformer/dataset.hpp"
#include "satformer/oracle.hpp"
#include "satformer/rng.hpp"

namespace satformer {

struct GenParams {
  int m_min = 3;
  int m_max = 10;
  double p_bernoulli = 0.3;
  double p_geometric = 0.4;
  uint64_t seed = 0;
};

struct SrPair {
  CnfInstance sat;
  CnfInstance unsat;
};

struct GenSummary {
  int sat_count = 0;
  int unsat_count = 0;
  double mean_cv = 0.0;
  std::map<int, int> per_m_counts;  // instances per variable count
};

// Clause-to-variable ratio n/m. Throws std::invalid_argument for m == 0.
double compute_cv(const CnfInstance& inst);

// SR(m) pair: clauses of length 2 + Bernoulli(p_b) + Geometric(p_g) (capped
// at m) are appended until the instance first becomes unsatisfiable; the
// UNSAT member keeps that clause, the SAT member negates one uniformly
// chosen literal of it. Any single flip of the threshold clause is
// satisfiable: every model of the prefix falsified the whole clause, so it
// satisfies the flipped literal.
SrPair generate_sr_pair(int m, const GenParams& params, Rng& rng);

// Labeled records for `count` pairs (pair mode, 2*count records) or `count`
// truncated instances when cv_target > 0: the clause list is cut to
// ceil(cv*m) clauses and re-labeled by the oracle.
std::vector<LabeledInstance> generate_records(const GenParams& params, int count, int jobs,
                                              double cv_target = 0.0);

GenSummary summarize(const std::vector<LabeledInstance>& records);

// Writes the JSONL dataset; deterministic bytes for a given seed.
GenSummary generate_dataset(const GenParams& params, int count, const std::string& out_path,
                            int jobs, double cv_target = 0.0);

}  // namespace satformer
