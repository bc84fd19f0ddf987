#include "satformer/gen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "satformer/parallel.hpp"

namespace satformer {

namespace {

Clause random_clause(int m, const GenParams& params, Rng& rng) {
  int k = 2 + (rng.next_bool(params.p_bernoulli) ? 1 : 0) + rng.next_geometric(params.p_geometric);
  k = std::min(k, m);
  // k distinct variables by partial Fisher-Yates over 1..m.
  std::vector<int> vars(size_t(m), 0);
  for (int i = 0; i < m; ++i) vars[size_t(i)] = i + 1;
  Clause c;
  c.literals.reserve(size_t(k));
  for (int i = 0; i < k; ++i) {
    int j = i + int(rng.next_u64() % uint64_t(m - i));
    std::swap(vars[size_t(i)], vars[size_t(j)]);
    c.literals.push_back(Literal{vars[size_t(i)], rng.next_bool(0.5)});
  }
  return c;
}

std::string pair_id(int index, const char* suffix) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06d-%s", index, suffix);
  return buf;
}

LabeledInstance label_instance(std::string id, CnfInstance inst, const OracleVerdict& verdict) {
  LabeledInstance rec;
  rec.id = std::move(id);
  rec.is_sat = verdict.is_sat;
  if (verdict.is_sat) {
    rec.core_mask = core_mask_sat(inst);
  } else {
    CoreResult core = minimal_unsat_core(inst);
    rec.core_mask = core_mask(inst, core);
    rec.minimal_only = !core.is_minimum;
  }
  rec.instance = std::move(inst);
  return rec;
}

}  // namespace

double compute_cv(const CnfInstance& inst) {
  if (inst.num_vars == 0) throw std::invalid_argument("compute_cv: instance has no variables");
  return double(inst.num_clauses()) / double(inst.num_vars);
}

SrPair generate_sr_pair(int m, const GenParams& params, Rng& rng) {
  if (m < 3) throw std::invalid_argument("generate_sr_pair: m must be >= 3");
  CnfInstance inst;
  inst.num_vars = m;
  for (;;) {
    inst.clauses.push_back(random_clause(m, params, rng));
    if (!solve_exhaustive(inst).is_sat) break;
  }
  SrPair pair;
  pair.unsat = inst;
  int flip = rng.next_int(0, int(inst.clauses.back().literals.size()) - 1);
  inst.clauses.back().literals[size_t(flip)].negated =
      !inst.clauses.back().literals[size_t(flip)].negated;
  pair.sat = std::move(inst);
  return pair;
}

std::vector<LabeledInstance> generate_records(const GenParams& params, int count, int jobs,
                                              double cv_target) {
  if (params.m_min < 3 || params.m_min > params.m_max) {
    throw std::invalid_argument("generate_records: need 3 <= m_min <= m_max");
  }
  if (params.p_bernoulli <= 0 || params.p_bernoulli >= 1 || params.p_geometric <= 0 ||
      params.p_geometric >= 1) {
    throw std::invalid_argument("generate_records: probabilities must lie in (0,1)");
  }
  if (count < 1) throw std::invalid_argument("generate_records: count must be >= 1");

  const int per_pair = cv_target > 0 ? 1 : 2;
  std::vector<LabeledInstance> records(size_t(count) * size_t(per_pair));
  parallel_for(count, jobs, [&](int idx) {
    Rng rng = Rng::substream(params.seed, uint64_t(idx));
    int m = rng.next_int(params.m_min, params.m_max);
    SrPair pair = generate_sr_pair(m, params, rng);
    if (cv_target > 0) {
      CnfInstance inst = std::move(pair.unsat);
      int keep = std::max(1, int(std::ceil(cv_target * m)));
      if (keep < inst.num_clauses()) {
        inst.clauses.resize(size_t(keep));
      }
      char suffix[24];
      std::snprintf(suffix, sizeof(suffix), "cv%g", cv_target);
      OracleVerdict verdict = solve_exhaustive(inst);
      records[size_t(idx)] = label_instance(pair_id(idx, suffix), std::move(inst), verdict);
    } else {
      OracleVerdict sat_v = solve_exhaustive(pair.sat);
      OracleVerdict unsat_v = solve_exhaustive(pair.unsat);
      if (!sat_v.is_sat || unsat_v.is_sat) {
        throw std::logic_error("generate_records: pair labels failed oracle confirmation");
      }
      records[size_t(idx) * 2] = label_instance(pair_id(idx, "sat"), std::move(pair.sat), sat_v);
      records[size_t(idx) * 2 + 1] =
          label_instance(pair_id(idx, "unsat"), std::move(pair.unsat), unsat_v);
    }
  });
  return records;
}

GenSummary summarize(const std::vector<LabeledInstance>& records) {
  GenSummary s;
  double cv_sum = 0.0;
  for (const LabeledInstance& rec : records) {
    (rec.is_sat ? s.sat_count : s.unsat_count) += 1;
    cv_sum += compute_cv(rec.instance);
    s.per_m_counts[rec.instance.num_vars] += 1;
  }
  s.mean_cv = records.empty() ? 0.0 : cv_sum / double(records.size());
  return s;
}

GenSummary generate_dataset(const GenParams& params, int count, const std::string& out_path,
                            int jobs, double cv_target) {
  std::vector<LabeledInstance> records = generate_records(params, count, jobs, cv_target);
  write_dataset_jsonl(out_path, records);
  return summarize(records);
}

}  // namespace satformer
