#pragma once

#include <map>
#include <string>
#include <vector>

#include "essn/checker.hpp"
#include "essn/generate.hpp"
#include "essn/history.hpp"
#include "essn/kto.hpp"
#include "essn/resolve.hpp"

namespace essn {

enum class TxnRole { LongRo, LongRw, Shorts };

inline const char* to_string(TxnRole r) {
  switch (r) {
    case TxnRole::LongRo: return "t1_long_ro";
    case TxnRole::LongRw: return "t2_long_rw";
    case TxnRole::Shorts: return "shorts";
  }
  return "?";
}

struct ExperimentRow {
  RfPolicy rf_policy = RfPolicy::SnapshotAtBegin;
  double pivot_prob = 0;
  double short_hit_prob = 0;
  Protocol protocol = Protocol::SSN;
  TxnRole role = TxnRole::LongRw;
  long trials = 0;
  long aborts = 0;
  double abort_rate = 0;
};

struct ExperimentGrid {
  std::vector<double> pivot_probs{0.0, 0.2, 0.5, 0.8, 1.0};
  std::vector<double> short_hit_probs{0.0, 0.2, 0.5, 0.8, 1.0};
  std::vector<RfPolicy> rf_policies{RfPolicy::AsOfReadCommit,
                                    RfPolicy::SnapshotAtBegin};
};

/// Sweep the grid under a commit-ordered KTO. Every cell generates `repeats`
/// schedules and evaluates the same schedule under both SSN and ESSN.
inline std::vector<ExperimentRow> run_experiment(
    const ExperimentGrid& grid, WorkloadParams params) {
  params.kto_flavor = KtoFlavor::Commit;
  std::vector<ExperimentRow> rows;
  std::uint64_t cell_index = 0;
  for (RfPolicy policy : grid.rf_policies) {
    for (double pivot : grid.pivot_probs) {
      for (double hit : grid.short_hit_probs) {
        ++cell_index;
        std::map<Protocol, std::map<TxnRole, long>> aborts;
        long n_short_trials = 0;
        for (int rep = 0; rep < params.repeats; ++rep) {
          WorkloadParams cell = params;
          cell.rf_policy = policy;
          cell.pivot_prob = pivot;
          cell.short_hit_prob = hit;
          cell.seed = SplitMix64::stream(params.seed,
                                         cell_index * 100000 +
                                             static_cast<std::uint64_t>(rep))
                          .next();
          InputTrace trace = generate_mixed(cell);
          MVSchedule schedule = resolve_reads(trace, policy);
          Kto kto = make_kto(schedule, KtoFlavor::Commit);
          for (Protocol proto : {Protocol::SSN, Protocol::ESSN}) {
            CertResults verdicts = run_checker(schedule, kto, proto);
            for (auto& [t, r] : verdicts) {
              if (r.verdict != Verdict::Abort) continue;
              if (t == kLongRoTxn)
                ++aborts[proto][TxnRole::LongRo];
              else if (t == kLongRwTxn)
                ++aborts[proto][TxnRole::LongRw];
              else
                ++aborts[proto][TxnRole::Shorts];
            }
          }
          n_short_trials += cell.n_shorts;
        }
        for (Protocol proto : {Protocol::SSN, Protocol::ESSN}) {
          for (TxnRole role :
               {TxnRole::LongRo, TxnRole::LongRw, TxnRole::Shorts}) {
            ExperimentRow row;
            row.rf_policy = policy;
            row.pivot_prob = pivot;
            row.short_hit_prob = hit;
            row.protocol = proto;
            row.role = role;
            row.trials =
                role == TxnRole::Shorts ? n_short_trials : params.repeats;
            row.aborts = aborts[proto][role];
            row.abort_rate = row.trials == 0
                                 ? 0.0
                                 : static_cast<double>(row.aborts) /
                                       static_cast<double>(row.trials);
            rows.push_back(row);
          }
        }
      }
    }
  }
  return rows;
}

inline std::string format_double(double v) {
  std::string s = std::to_string(v);
  while (s.size() > 1 && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

inline std::string experiment_csv(const std::vector<ExperimentRow>& rows) {
  std::string out =
      "rf_policy,pivot_prob,short_hit_prob,protocol,role,trials,aborts,"
      "abort_rate\n";
  for (const ExperimentRow& r : rows) {
    out += std::string(to_string(r.rf_policy)) + "," +
           format_double(r.pivot_prob) + "," + format_double(r.short_hit_prob) +
           "," + to_string(r.protocol) + "," + to_string(r.role) + "," +
           std::to_string(r.trials) + "," + std::to_string(r.aborts) + "," +
           format_double(r.abort_rate) + "\n";
  }
  return out;
}

/// Mean abort rate of a role under one protocol/policy across the grid.
inline double mean_abort_rate(const std::vector<ExperimentRow>& rows,
                              RfPolicy policy, Protocol proto, TxnRole role) {
  double sum = 0;
  long n = 0;
  for (const ExperimentRow& r : rows)
    if (r.rf_policy == policy && r.protocol == proto && r.role == role) {
      sum += r.abort_rate;
      ++n;
    }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

struct CellRates {
  double pivot_prob = 0;
  double short_hit_prob = 0;
  double ssn = 0;
  double essn = 0;
  double gain() const { return ssn - essn; }
};

inline std::vector<CellRates> cell_rates(const std::vector<ExperimentRow>& rows,
                                         RfPolicy policy, TxnRole role) {
  std::map<std::pair<double, double>, CellRates> cells;
  for (const ExperimentRow& r : rows) {
    if (r.rf_policy != policy || r.role != role) continue;
    CellRates& c = cells[{r.pivot_prob, r.short_hit_prob}];
    c.pivot_prob = r.pivot_prob;
    c.short_hit_prob = r.short_hit_prob;
    (r.protocol == Protocol::SSN ? c.ssn : c.essn) = r.abort_rate;
  }
  std::vector<CellRates> out;
  for (auto& [k, v] : cells) out.push_back(v);
  return out;
}

}  // namespace essn
