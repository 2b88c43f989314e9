#include "essn/engine.hpp"

#include <gtest/gtest.h>

#include "essn/certify.hpp"
#include "essn/generate.hpp"
#include "essn/history.hpp"
#include "essn/replay.hpp"
#include "oracles.hpp"

namespace essn {
namespace {

const char* kM1 =
    "b1 w1(x1) b2 w2(y2) b3 r3(x0) c1 b4 r4(y0) c2 r3(z0) c3 w4(z4) c4";
const char* kM2 =
    "b1 w1(x1) b2 w2(y2) b3 r3(x0) c1 b4 r4(y0) w4(x4) c2 c3 c4";
const char* kReadOnlyAnomalyTrace =
    "b1 b2 b4 r1(x?) w2(x2) c2 r4(x?) r4(y?) c4 w1(y1) c1";

EngineConfig commit_cfg() {
  return {KtoFlavor::Commit, RfPolicy::AsOfReadCommit, false, false};
}

TEST(EngineBegin, BeginKtoAssignsSequentialSigma) {
  Engine eng({KtoFlavor::Begin, RfPolicy::SnapshotAtBegin, false, false});
  TxnId a = eng.begin(), b = eng.begin(), c = eng.begin();
  EXPECT_EQ(eng.txn(a).sigma, Sigma::of(1, a));
  EXPECT_EQ(eng.txn(b).sigma, Sigma::of(2, b));
  EXPECT_EQ(eng.txn(c).sigma, Sigma::of(3, c));
}

TEST(EngineBegin, CommitKtoDefersSigma) {
  Engine eng(commit_cfg());
  TxnId a = eng.begin();
  EXPECT_FALSE(eng.txn(a).sigma_assigned);
  eng.commit(a);
  EXPECT_TRUE(eng.txn(a).sigma_assigned);
}

TEST(EngineBegin, LongPriorityRestartsActiveShorts) {
  Engine eng({KtoFlavor::Begin, RfPolicy::SnapshotAtBegin, false, false});
  TxnId done = eng.begin();
  ASSERT_TRUE(std::holds_alternative<Committed>(eng.commit(done)));
  TxnId s1 = eng.begin();
  TxnId s2 = eng.begin();
  eng.write(s2, "ka");
  TxnId lng = eng.begin(true);
  EXPECT_TRUE(eng.was_restarted(s1));
  EXPECT_TRUE(eng.was_restarted(s2));
  EXPECT_FALSE(eng.was_restarted(done));
  EXPECT_EQ(eng.status(s1), TxnStatus::Aborted);
  // The restarted short's staged write vanished.
  EXPECT_TRUE(eng.chain("ka").size() == 1);
  TxnId fresh = eng.begin();
  EXPECT_TRUE(eng.txn(lng).sigma < eng.txn(fresh).sigma);
}

TEST(EngineWrite, StagePointsAtCommittedTail) {
  Engine eng(commit_cfg());
  TxnId a = eng.begin();
  eng.write(a, "x");
  ASSERT_TRUE(std::holds_alternative<Committed>(eng.commit(a)));
  TxnId b = eng.begin();
  const auto* staged = eng.write(b, "x");
  ASSERT_NE(staged->prev, nullptr);
  EXPECT_EQ(staged->prev->writer, a);
}

TEST(EngineWrite, FreshKeyPrevIsBase) {
  Engine eng(commit_cfg());
  TxnId a = eng.begin();
  const auto* staged = eng.write(a, "x");
  ASSERT_NE(staged->prev, nullptr);
  EXPECT_EQ(staged->prev->writer, kInitialTxn);
}

TEST(EngineWrite, RestageReplacesFirstStage) {
  Engine eng(commit_cfg());
  TxnId a = eng.begin();
  eng.write(a, "x");
  eng.write(a, "x");
  ASSERT_TRUE(std::holds_alternative<Committed>(eng.commit(a)));
  EXPECT_EQ(eng.chain("x").size(), 2u);  // base + one version
}

TEST(EngineRead, RecordsVersionAndGrowsReadSet) {
  Engine eng(commit_cfg());
  TxnId a = eng.begin();
  eng.write(a, "x");
  eng.commit(a);
  TxnId b = eng.begin();
  auto res = eng.read(b, "x");
  ASSERT_TRUE(std::holds_alternative<const Engine::VersionObject*>(res));
  EXPECT_EQ(std::get<const Engine::VersionObject*>(res)->writer, a);
  EXPECT_EQ(eng.txn(b).reads.size(), 1u);
}

TEST(EngineRead, OwnStagedWriteExcludedFromReadSet) {
  Engine eng(commit_cfg());
  TxnId a = eng.begin();
  eng.write(a, "x");
  auto res = eng.read(a, "x");
  EXPECT_EQ(std::get<const Engine::VersionObject*>(res)->writer, a);
  EXPECT_TRUE(eng.txn(a).reads.empty());
}

TEST(EngineRead, ShortcutFoldsCommittedOverwriter) {
  // t3's begin-snapshot read of x1 has a committed overwriter x2: the entry
  // folds into the accumulators instead of the read set, and the verdict
  // matches the unshortcut run.
  const char* trace =
      "b1 w1(x1) c1 b3 b2 w2(x2) c2 r3(x?) c3";
  for (bool shortcut : {false, true}) {
    EngineConfig cfg{KtoFlavor::Commit, RfPolicy::SnapshotAtBegin, shortcut,
                     false};
    ReplayResult r = replay_trace(parse_trace(trace), cfg);
    EXPECT_EQ(r.verdicts.at(3), Verdict::Commit);
  }
  Engine eng({KtoFlavor::Commit, RfPolicy::SnapshotAtBegin, true, false});
  TxnId w1 = eng.begin();
  eng.write(w1, "x");
  eng.commit(w1);
  TxnId r3 = eng.begin();
  TxnId w2 = eng.begin();
  eng.write(w2, "x");
  eng.commit(w2);
  eng.read(r3, "x");
  EXPECT_TRUE(eng.txn(r3).reads.empty()) << "entry should be dropped";
  EXPECT_EQ(eng.txn(r3).sstamp, eng.txn(w2).last_pi);
}

TEST(EngineCommit, M1AllCommitUnderEssnButSsnDiagnosticFires) {
  ReplayResult r = replay_trace(parse_trace(kM1), commit_cfg());
  ASSERT_TRUE(r.complete);
  for (auto& [t, v] : r.verdicts) EXPECT_EQ(v, Verdict::Commit) << "t" << t;
  EXPECT_EQ(format_trace(r.realized), kM1);
}

TEST(EngineCommit, SsnStyleCheckWouldAbortM1T4) {
  TraceReplayer replayer(commit_cfg());
  ReplayResult r = replayer.run(parse_trace(kM1));
  ASSERT_EQ(r.verdicts.at(4), Verdict::Commit);
  const auto& t4 = replayer.engine().txn(4);
  // pi(t4) = sigma(t2) = 2, eta(t4) = sigma(t3) = 3: pi <= eta.
  EXPECT_EQ(t4.last_pi, Sigma::of(2, 2));
  EXPECT_EQ(t4.eta, Sigma::of(3, 3));
  EXPECT_LE(*t4.last_pi, t4.eta);
}

TEST(EngineCommit, M2AntiPivotCommitsT4) {
  ReplayResult r = replay_trace(parse_trace(kM2), commit_cfg());
  for (auto& [t, v] : r.verdicts) EXPECT_EQ(v, Verdict::Commit) << "t" << t;
}

TEST(EngineCommit, AbortReportsOperandsAndRollsBack) {
  // Write skew under snapshot reads: the second committer must abort, its
  // staged version never installs, and shared metadata stays untouched.
  EngineConfig cfg{KtoFlavor::Commit, RfPolicy::SnapshotAtBegin, false, false};
  ReplayResult r = replay_trace(
      parse_trace("b1 b2 r1(a?) r2(b?) w1(b1) w2(a2) c1 c2"), cfg);
  EXPECT_EQ(r.verdicts.at(1), Verdict::Commit);
  EXPECT_EQ(r.verdicts.at(2), Verdict::Abort);
}

TEST(EngineCommit, StalledSurfacesWaitHandle) {
  Engine eng({KtoFlavor::Begin, RfPolicy::SnapshotAtBegin, false, false});
  TxnId t1 = eng.begin();
  TxnId t2 = eng.begin();
  eng.write(t2, "x");
  auto outcome = eng.commit(t2);
  ASSERT_TRUE(std::holds_alternative<Stalled>(outcome));
  EXPECT_EQ(std::get<Stalled>(outcome).waiting_for, t1);
  // After the blocker terminates the commit goes through.
  eng.commit(t1);
  EXPECT_TRUE(std::holds_alternative<Committed>(eng.commit(t2)));
}

TEST(StallBypass, ReadOnlyBaseSnapshotBypasses) {
  // b1 b2 r2(x0) c2 w1(x1) c1: t2 commits before the earlier-begun t1.
  Engine eng({KtoFlavor::Begin, RfPolicy::SnapshotAtBegin, false, false});
  TxnId t1 = eng.begin();
  TxnId t2 = eng.begin();
  eng.read(t2, "x");
  ASSERT_TRUE(std::holds_alternative<Stalled>(eng.commit(t2)));
  EXPECT_TRUE(eng.stall_bypass_allowed(t2));
  EXPECT_TRUE(std::holds_alternative<Committed>(eng.stall_bypass(t2)));
  eng.write(t1, "x");
  EXPECT_TRUE(std::holds_alternative<Committed>(eng.commit(t1)));
}

TEST(StallBypass, WriterNeverBypasses) {
  Engine eng({KtoFlavor::Begin, RfPolicy::SnapshotAtBegin, false, false});
  eng.begin();  // earlier in-flight txn keeps t2 stalled
  TxnId t2 = eng.begin();
  eng.write(t2, "y");
  EXPECT_FALSE(eng.stall_bypass_allowed(t2));
  EXPECT_TRUE(std::holds_alternative<Stalled>(eng.stall_bypass(t2)));
}

TEST(StallBypass, ReaderOfRealVersionDoesNotBypass) {
  // A forward bound above -inf could still rise above a future pi.
  Engine eng({KtoFlavor::Begin, RfPolicy::SnapshotAtBegin, false, false});
  TxnId w = eng.begin();
  eng.write(w, "x");
  eng.commit(w);
  eng.begin();  // in-flight blocker
  TxnId r = eng.begin();
  eng.read(r, "x");  // reads w's version: crepi is finite
  EXPECT_FALSE(eng.stall_bypass_allowed(r));
}

TEST(StallBypass, ReadOnlyAnomalySuppressed) {
  EngineConfig cfg{KtoFlavor::Begin, RfPolicy::SnapshotAtBegin, false, true};
  ReplayResult r = replay_trace(parse_trace(kReadOnlyAnomalyTrace), cfg);
  ASSERT_TRUE(r.complete);
  for (auto& [t, v] : r.verdicts) EXPECT_EQ(v, Verdict::Commit) << "t" << t;
  EXPECT_EQ(format_trace(r.realized),
            "b1 b2 b4 r1(x0) w2(x2) r4(x0) r4(y0) c4 w1(y1) c1 c2");
  // The realized schedule is serializable.
  EXPECT_TRUE(testing::oracle_serializable(
      r.realized, KtoFlavor::Begin, testing::committed_txns(r.realized)));
}

TEST(ReadStall, NearestBeginWaitsForInFlightEarlierWriter) {
  EngineConfig cfg{KtoFlavor::Begin, RfPolicy::NearestBeginKto, false, false};
  ReplayResult r =
      replay_trace(parse_trace("b1 b2 w1(x1) r2(x?) c1 c2"), cfg);
  ASSERT_TRUE(r.complete);
  EXPECT_EQ(format_trace(r.realized), "b1 b2 w1(x1) c1 r2(x1) c2");
  EXPECT_EQ(r.verdicts.at(2), Verdict::Commit);
}

TEST(EngineInvariant, PiStrictlyIncreasesAlongChains) {
  SplitMix64 rng(71);
  for (int i = 0; i < 50; ++i) {
    WorkloadParams p;
    p.n_keys = 12;
    p.read_size = 4;
    p.n_shorts = 10;
    p.seed = rng.next();
    p.pivot_prob = 0.5;
    p.short_hit_prob = 0.5;
    InputTrace trace = generate_mixed(p);
    EngineConfig cfg{KtoFlavor::Commit, RfPolicy::SnapshotAtBegin, false,
                     false};
    TraceReplayer replayer(cfg);
    ReplayResult r = replayer.run(trace);
    ASSERT_TRUE(r.complete);
    for (const std::string& key : replayer.engine().keys()) {
      Sigma prev_pi = Sigma::neg_inf();
      for (const auto* v : replayer.engine().chain(key)) {
        if (v->writer == kInitialTxn) continue;
        EXPECT_LT(prev_pi, v->crepi) << "pi not strictly increasing on "
                                     << key;
        prev_pi = v->crepi;
      }
    }
  }
}

TEST(EngineInvariant, AppendOnlyChainsUnderBeginStall) {
  SplitMix64 rng(73);
  for (int i = 0; i < 50; ++i) {
    WorkloadParams p;
    p.n_keys = 10;
    p.read_size = 3;
    p.n_shorts = 8;
    p.seed = rng.next();
    InputTrace trace = generate_mixed(p);
    EngineConfig cfg{KtoFlavor::Begin, RfPolicy::SnapshotAtBegin, false,
                     false};
    TraceReplayer replayer(cfg);
    ReplayResult r = replayer.run(trace);
    ASSERT_TRUE(r.complete);
    for (const std::string& key : replayer.engine().keys()) {
      Sigma prev_sigma = Sigma::neg_inf();
      for (const auto* v : replayer.engine().chain(key)) {
        Sigma s = v->writer == kInitialTxn
                      ? Sigma::neg_inf()
                      : replayer.engine().txn(v->writer).sigma;
        EXPECT_LE(prev_sigma, s) << "chain for " << key
                                 << " not in kto order";
        prev_sigma = s;
      }
    }
  }
}

TEST(EngineInvariant, SerializabilityOracleOnRealizedSchedules) {
  SplitMix64 rng(79);
  for (int i = 0; i < 100; ++i) {
    InputTrace skeleton = random_trace_skeleton(rng);
    EngineConfig cfg{KtoFlavor::Commit,
                     i % 2 == 0 ? RfPolicy::AsOfReadCommit
                                : RfPolicy::SnapshotAtBegin,
                     false, false};
    ReplayResult r = replay_trace(skeleton, cfg);
    ASSERT_TRUE(r.complete);
    EXPECT_TRUE(testing::oracle_serializable(
        r.realized, KtoFlavor::Commit, testing::committed_txns(r.realized)))
        << format_trace(r.realized);
  }
}

TEST(EngineComplexity, CommitTouchesOnlyImmediateMetadata) {
  SplitMix64 rng(83);
  for (int i = 0; i < 20; ++i) {
    WorkloadParams p;
    p.n_keys = 20;
    p.read_size = 6;
    p.n_shorts = 12;
    p.seed = rng.next();
    InputTrace trace = generate_mixed(p);
    EngineConfig cfg{KtoFlavor::Commit, RfPolicy::SnapshotAtBegin, false,
                     false};
    ReplayResult r = replay_trace(trace, cfg);
    for (const CommitStats& st : r.commit_stats) {
      EXPECT_LE(st.version_accesses, 3 * (st.reads + st.writes) + 2);
      EXPECT_EQ(st.chain_hops_past_prev, 0u);
    }
  }
}

}  // namespace
}  // namespace essn
