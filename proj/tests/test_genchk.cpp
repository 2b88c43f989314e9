#include "essn/generate.hpp"

#include <gtest/gtest.h>

#include "essn/certify.hpp"
#include "essn/checker.hpp"
#include "essn/experiment.hpp"
#include "essn/history.hpp"
#include "essn/resolve.hpp"

namespace essn {
namespace {

WorkloadParams small_params(std::uint64_t seed) {
  WorkloadParams p;
  p.n_keys = 20;
  p.read_size = 6;
  p.n_shorts = 10;
  p.seed = seed;
  return p;
}

TEST(KeyNames, DigitFreeAndDistinct) {
  std::set<std::string> seen;
  for (int i = 0; i < 300; ++i) {
    std::string name = key_name(i);
    EXPECT_TRUE(seen.insert(name).second) << name;
    for (char c : name) EXPECT_FALSE(c >= '0' && c <= '9') << name;
  }
  EXPECT_EQ(key_name(0), "z");
}

TEST(GenerateMixed, DeterministicInSeed) {
  WorkloadParams p = small_params(42);
  EXPECT_EQ(format_trace(generate_mixed(p)), format_trace(generate_mixed(p)));
  WorkloadParams q = small_params(43);
  EXPECT_NE(format_trace(generate_mixed(p)), format_trace(generate_mixed(q)));
}

TEST(GenerateMixed, InfeasibleParamsRejected) {
  WorkloadParams p = small_params(1);
  p.read_size = p.n_keys;  // cannot pick read_size keys besides z
  try {
    generate_mixed(p);
    FAIL() << "expected InfeasibleParams";
  } catch (const GenError& e) {
    EXPECT_EQ(e.code(), GenErrorCode::InfeasibleParams);
  }
}

TEST(GenerateMixed, StructureHoldsAcrossSeeds) {
  SplitMix64 rng(5);
  for (int i = 0; i < 50; ++i) {
    WorkloadParams p = small_params(rng.next());
    p.pivot_prob = (i % 3) * 0.5;
    p.short_hit_prob = (i % 5) * 0.25;
    InputTrace t = generate_mixed(p);

    // t1 is read-only and reads z; t2 performs exactly one (final) write.
    int t1_reads = 0, t1_writes = 0, t2_writes = 0;
    bool t1_reads_z = false;
    std::set<std::string> t2_read_keys;
    for (const Event& e : t.events()) {
      if (e.txn == kLongRoTxn && e.kind == EventKind::Read) {
        ++t1_reads;
        if (e.key == "z") t1_reads_z = true;
      }
      if (e.txn == kLongRoTxn && e.kind == EventKind::Write) ++t1_writes;
      if (e.txn == kLongRwTxn && e.kind == EventKind::Write) ++t2_writes;
      if (e.txn == kLongRwTxn && e.kind == EventKind::Read)
        t2_read_keys.insert(e.key);
    }
    EXPECT_EQ(t1_writes, 0);
    EXPECT_TRUE(t1_reads_z);
    EXPECT_EQ(t1_reads, p.read_size + 1);
    EXPECT_EQ(t2_writes, 1);
    EXPECT_FALSE(t2_read_keys.count("z"));

    // Shorts are write-only and never touch z.
    for (const Event& e : t.events()) {
      if (e.txn < kFirstShort) continue;
      EXPECT_NE(e.kind, EventKind::Read);
      if (e.kind == EventKind::Write) {
        EXPECT_NE(e.key, "z");
      }
    }

    // Every long strictly contains at least one complete short.
    for (TxnId lng : {kLongRoTxn, kLongRwTxn}) {
      bool contained = false;
      for (TxnId s : t.txns()) {
        if (s < kFirstShort) continue;
        if (t.begin_pos(lng) < t.begin_pos(s) &&
            t.terminal_pos(s) < t.terminal_pos(lng)) {
          contained = true;
          break;
        }
      }
      EXPECT_TRUE(contained) << "long t" << lng << " contains no short";
    }

    // Longs commit after the last short that wrote any key they read, and
    // t2 commits last.
    std::map<TxnId, std::set<std::string>> reads_by;
    for (const Event& e : t.events())
      if (e.kind == EventKind::Read) reads_by[e.txn].insert(e.key);
    for (TxnId lng : {kLongRoTxn, kLongRwTxn}) {
      for (const Event& e : t.events()) {
        if (e.kind != EventKind::Write || e.txn < kFirstShort) continue;
        if (reads_by[lng].count(e.key)) {
          EXPECT_LT(t.terminal_pos(e.txn), t.terminal_pos(lng));
        }
      }
    }
    EXPECT_GT(t.terminal_pos(kLongRwTxn), t.terminal_pos(kLongRoTxn));
  }
}

TEST(GenerateMixed, NoConflictKnobsMeanNoAborts) {
  SplitMix64 rng(9);
  for (int i = 0; i < 20; ++i) {
    WorkloadParams p = small_params(rng.next());
    p.pivot_prob = 0.0;
    p.short_hit_prob = 0.0;
    InputTrace trace = generate_mixed(p);
    for (RfPolicy policy :
         {RfPolicy::AsOfReadCommit, RfPolicy::SnapshotAtBegin}) {
      MVSchedule s = resolve_reads(trace, policy);
      Kto kto = make_kto(s, KtoFlavor::Commit);
      for (Protocol proto : {Protocol::SSN, Protocol::ESSN})
        for (auto& [t, r] : run_checker(s, kto, proto))
          EXPECT_EQ(r.verdict, Verdict::Commit)
              << to_string(policy) << " " << to_string(proto) << " t" << t;
    }
  }
}

TEST(RandomSiHistory, AlwaysSatisfiesSiPredicate) {
  SplitMix64 rng(13);
  for (int i = 0; i < 300; ++i) {
    MVSchedule s = random_si_history(rng);
    EXPECT_TRUE(is_si_history(s)) << format_trace(s);
  }
}

TEST(Experiment, SmallGridSchemaAndDominance) {
  ExperimentGrid grid;
  grid.pivot_probs = {0.0, 1.0};
  grid.short_hit_probs = {0.0, 0.8};
  WorkloadParams p = small_params(7);
  p.repeats = 10;
  auto rows = run_experiment(grid, p);
  // 2 policies x 4 cells x 2 protocols x 3 roles.
  EXPECT_EQ(rows.size(), 2u * 4 * 2 * 3);
  for (RfPolicy policy :
       {RfPolicy::AsOfReadCommit, RfPolicy::SnapshotAtBegin}) {
    for (const CellRates& cell : cell_rates(rows, policy, TxnRole::LongRw)) {
      EXPECT_LE(cell.essn, cell.ssn)
          << to_string(policy) << " pivot=" << cell.pivot_prob
          << " hit=" << cell.short_hit_prob;
    }
  }
  std::string csv = experiment_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "rf_policy,pivot_prob,short_hit_prob,protocol,role,trials,aborts,"
            "abort_rate");
  EXPECT_NE(csv.find("snapshot_at_begin,1,0.8,ssn,t2_long_rw"),
            std::string::npos);
}

TEST(Experiment, R2TrendStructure) {
  // Trend assertions, not exact contours: under as_of_read_commit the SSN
  // rate tracks SHORT_HIT_PROB; under snapshot_at_begin the gain column
  // tracks PIVOT_PROB.
  WorkloadParams p;  // full defaults, fixed seed
  p.seed = 1;
  auto rows = run_experiment(ExperimentGrid{}, p);
  std::vector<double> probs{0.0, 0.2, 0.5, 0.8, 1.0};
  auto cell = [&](RfPolicy policy, double pivot, double hit) {
    for (const CellRates& c : cell_rates(rows, policy, TxnRole::LongRw))
      if (c.pivot_prob == pivot && c.short_hit_prob == hit) return c;
    return CellRates{};
  };
  const double slack = 0.06;  // repeats=50 sampling noise
  for (double pivot : probs) {
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
      double lo = cell(RfPolicy::AsOfReadCommit, pivot, probs[i]).ssn;
      double hi = cell(RfPolicy::AsOfReadCommit, pivot, probs[i + 1]).ssn;
      EXPECT_GE(hi + slack, lo) << "pivot=" << pivot << " hit step " << i;
    }
  }
  auto mean_gain = [&](double pivot) {
    double sum = 0;
    for (double hit : probs)
      sum += cell(RfPolicy::SnapshotAtBegin, pivot, hit).gain();
    return sum / static_cast<double>(probs.size());
  };
  EXPECT_GT(mean_gain(1.0), mean_gain(0.0));
  EXPECT_GT(mean_gain(0.8), mean_gain(0.2));
}

TEST(Experiment, R3MechanismXiStaysBelowEta) {
  // Where ESSN saves t2 but SSN would not, the saving bound is xi(t2) <
  // eta(t2) with xi fed by pi(t1) over the forward edge t1 -> t2.
  SplitMix64 rng(19);
  int witnessed = 0;
  for (int i = 0; i < 200 && witnessed < 10; ++i) {
    WorkloadParams p = small_params(rng.next());
    p.pivot_prob = 1.0;
    p.short_hit_prob = 0.5;
    MVSchedule s =
        resolve_reads(generate_mixed(p), RfPolicy::SnapshotAtBegin);
    Kto kto = make_kto(s, KtoFlavor::Commit);
    VersionOrder vo = build_version_order(s, KtoFlavor::Commit);
    Mvsg g = build_mvsg(s, vo, kto);
    CertResult ssn = certify(g, Protocol::SSN).at(kLongRwTxn);
    CertResult essn = certify(g, Protocol::ESSN).at(kLongRwTxn);
    if (ssn.verdict != Verdict::Abort || essn.verdict != Verdict::Commit)
      continue;
    ++witnessed;
    EXPECT_LT(essn.xi, ssn.eta);
    ASSERT_TRUE(essn.xi_from.has_value());
    EXPECT_EQ(*essn.xi_from, kLongRoTxn) << format_trace(s);
  }
  EXPECT_GE(witnessed, 10);
}

TEST(Experiment, PerScheduleDominanceOnEveryGeneratedSchedule) {
  // Lemma xi <= eta gives per-schedule abort-set inclusion under commit KTO.
  SplitMix64 rng(17);
  for (int i = 0; i < 40; ++i) {
    WorkloadParams p = small_params(rng.next());
    p.pivot_prob = 0.8;
    p.short_hit_prob = 0.5;
    for (RfPolicy policy :
         {RfPolicy::AsOfReadCommit, RfPolicy::SnapshotAtBegin}) {
      p.rf_policy = policy;
      MVSchedule s = resolve_reads(generate_mixed(p), policy);
      Kto kto = make_kto(s, KtoFlavor::Commit);
      auto ssn = run_checker(s, kto, Protocol::SSN);
      auto essn = run_checker(s, kto, Protocol::ESSN);
      for (auto& [t, r] : essn) {
        if (r.verdict == Verdict::Abort) {
          EXPECT_EQ(ssn.at(t).verdict, Verdict::Abort)
              << "t" << t << " " << to_string(policy);
        }
      }
    }
  }
}

}  // namespace
}  // namespace essn
