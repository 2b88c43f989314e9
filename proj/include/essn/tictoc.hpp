#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "essn/certify.hpp"
#include "essn/history.hpp"
#include "essn/kto.hpp"
#include "essn/mvsg.hpp"
#include "essn/resolve.hpp"

namespace essn {

using Timestamp = std::int64_t;
inline constexpr Timestamp kTsMin = INT64_MIN / 4;
inline constexpr Timestamp kTsMax = INT64_MAX / 4;

/// Single-version timestamped version state: writes set wts = rts = C of the
/// writer; committed readers raise rts.
struct TsVersion {
  std::string key;
  TxnId writer = kInitialTxn;
  Timestamp wts = 0;
  Timestamp rts = 0;
};

/// Half-open integer interval [lo, hi); empty iff lo >= hi.
struct Interval {
  Timestamp lo = kTsMin;
  Timestamp hi = kTsMax;
  bool empty() const { return lo >= hi; }

  std::string str() const {
    if (empty()) return "empty";
    std::string l = lo == kTsMin ? "-inf" : std::to_string(lo);
    std::string h = hi == kTsMax ? "+inf" : std::to_string(hi);
    return "[" + l + ", " + h + ")";
  }
};

enum class TicTocErrorCode {
  UnknownVersion,
  EqualTimestamps,
  TooManyTxns,
  MultipleOverwriters,
};

class TicTocError : public std::runtime_error {
 public:
  TicTocError(TicTocErrorCode code, std::string msg)
      : std::runtime_error(std::move(msg)), code_(code) {}
  TicTocErrorCode code() const { return code_; }

 private:
  TicTocErrorCode code_;
};

struct TicTocInit {
  std::map<std::string, Timestamp> base_wts;  // default 0
  std::map<std::string, Timestamp> base_rts;  // default base_wts
};

/// Feasible commit-timestamp interval for `t` in a single-version schedule
/// with every other commit timestamp fixed:
///   - each read of v contributes the lower bound wts(v); if another
///     transaction u later overwrites that same version and commits, the
///     write lower bound at u forces C_t < C_u (the reader may have raised
///     rts(v) up to C_t);
///   - each key t overwrites contributes C_t > rts of the version current at
///     t's commit, where committed readers have raised rts to their own C.
/// Versions read by t may be overwritten by at most one other transaction.
inline Interval feasible_interval(const InputTrace& schedule, TxnId t,
                                  const std::map<TxnId, Timestamp>& committed_cts,
                                  const TicTocInit& init = {}) {
  struct Cur {
    TxnId writer = kInitialTxn;
    Timestamp wts = 0;
    Timestamp rts = 0;
  };
  std::map<std::string, Cur> current;
  auto key_state = [&](const std::string& key) -> Cur& {
    auto it = current.find(key);
    if (it != current.end()) return it->second;
    Cur c;
    auto w = init.base_wts.find(key);
    c.wts = w == init.base_wts.end() ? 0 : w->second;
    auto r = init.base_rts.find(key);
    c.rts = r == init.base_rts.end() ? c.wts : std::max(c.wts, r->second);
    return current.emplace(key, c).first->second;
  };
  auto ct_of = [&](TxnId u) {
    auto it = committed_cts.find(u);
    if (it == committed_cts.end())
      throw TicTocError(TicTocErrorCode::UnknownVersion,
                        "no commit timestamp for t" + std::to_string(u));
    return it->second;
  };

  Interval bound;
  // Versions t has read, by key: the version identity is the writer current
  // at read time.
  std::map<std::string, TxnId> read_version;
  std::map<std::string, std::set<TxnId>> other_writers_of_read;
  std::map<TxnId, std::vector<std::string>> reads_of, writes_of;

  for (const Event& e : schedule.events()) {
    switch (e.kind) {
      case EventKind::Read: {
        Cur& c = key_state(e.key);
        if (e.txn == t) {
          bound.lo = std::max(bound.lo, c.wts);
          read_version[e.key] = c.writer;
        } else {
          reads_of[e.txn].push_back(e.key);
        }
        break;
      }
      case EventKind::Write:
        writes_of[e.txn].push_back(e.key);
        break;
      case EventKind::Commit: {
        if (e.txn == t) {
          // Write lower bounds evaluate against the state at t's commit.
          for (const std::string& key : writes_of[t]) {
            Cur& c = key_state(key);
            bound.lo = std::max(bound.lo, c.rts + 1);
          }
          return bound;
        }
        Timestamp ct = ct_of(e.txn);
        for (const std::string& key : reads_of[e.txn]) {
          Cur& c = key_state(key);
          c.rts = std::max(c.rts, ct);
        }
        for (const std::string& key : writes_of[e.txn]) {
          Cur& c = key_state(key);
          auto rv = read_version.find(key);
          if (rv != read_version.end()) {
            // Keys t read may carry at most one other writer; the bound
            // chains are derived for that shape only.
            auto& others = other_writers_of_read[key];
            others.insert(e.txn);
            if (others.size() > 1)
              throw TicTocError(TicTocErrorCode::MultipleOverwriters,
                                "key " + key + " read by t" +
                                    std::to_string(t) +
                                    " has multiple overwriters");
            if (rv->second == c.writer) {
              // Overwrites the version t read: rts may be raised to C_t, so
              // the overwriter's write bound forces C_t < C_u.
              bound.hi = std::min(bound.hi, ct);
            }
          }
          c.writer = e.txn;
          c.wts = ct;
          c.rts = ct;
        }
        break;
      }
      case EventKind::Begin:
      case EventKind::Abort:
        break;
    }
  }
  return bound;
}

struct CaseFeasibility {
  bool a_feasible = false;
  bool b_feasible = false;
};

/// Cases (a) and (b) share the bound structure [C3, C2) and [C2, C3); with
/// distinct integer timestamps exactly one is nonempty.
inline CaseFeasibility check_mutual_incompatibility(Timestamp c2,
                                                    Timestamp c3) {
  if (c2 == c3)
    throw TicTocError(TicTocErrorCode::EqualTimestamps,
                      "C2 and C3 must differ");
  return {c3 < c2, c2 < c3};
}

/// View-serializability by serial-order enumeration (<= 8 transactions):
/// returns an order in which every read observes the last preceding write of
/// its key and each key's final writer matches the schedule's, with the
/// initial transaction implicitly first. Reads bind to the latest committed
/// write as of the read (single-version committed-read).
inline std::optional<std::vector<TxnId>> vsr_check(const InputTrace& trace) {
  MVSchedule resolved = resolve_reads(trace, RfPolicy::AsOfReadCommit);
  std::vector<TxnId> txns;
  for (TxnId t : resolved.txns())
    if (resolved.commits(t)) txns.push_back(t);
  if (txns.size() > 8)
    throw TicTocError(TicTocErrorCode::TooManyTxns,
                      "serial-order enumeration is limited to 8 transactions");

  struct ReadFrom {
    TxnId reader;
    std::string key;
    TxnId writer;
  };
  std::vector<ReadFrom> reads;
  std::map<std::string, std::set<TxnId>> writers;
  std::map<std::string, TxnId> final_writer;  // installs happen at commit
  for (const Event& e : resolved.events()) {
    if (!resolved.commits(e.txn)) continue;
    if (e.kind == EventKind::Write) writers[e.key].insert(e.txn);
    if (e.kind == EventKind::Read && *e.version != e.txn)
      reads.push_back({e.txn, e.key, *e.version});
  }
  for (auto& [key, ws] : writers) {
    TxnId last = kInitialTxn;
    std::size_t last_commit = 0;
    for (TxnId w : ws)
      if (resolved.terminal_pos(w) >= last_commit) {
        last_commit = resolved.terminal_pos(w);
        last = w;
      }
    final_writer[key] = last;
  }

  std::sort(txns.begin(), txns.end());
  std::vector<TxnId> order = txns;
  do {
    std::map<TxnId, std::size_t> pos;
    pos[kInitialTxn] = 0;
    for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i + 1;
    bool ok = true;
    for (const ReadFrom& rf : reads) {
      std::size_t reader = pos.at(rf.reader);
      std::size_t writer = pos.at(rf.writer);
      if (writer >= reader) {
        ok = false;
        break;
      }
      // No other writer of the key may sit between writer and reader.
      if (auto it = writers.find(rf.key); it != writers.end()) {
        for (TxnId w : it->second) {
          if (w == rf.writer || w == rf.reader) continue;
          std::size_t p = pos.at(w);
          if (p > writer && p < reader) {
            ok = false;
            break;
          }
        }
      }
      if (!ok) break;
    }
    if (ok) {
      for (auto& [key, ws] : writers) {
        TxnId serial_last = kInitialTxn;
        std::size_t best = 0;
        for (TxnId w : ws)
          if (pos.at(w) >= best) {
            best = pos.at(w);
            serial_last = w;
          }
        if (serial_last != final_writer.at(key)) {
          ok = false;
          break;
        }
      }
    }
    if (ok) return order;
  } while (std::next_permutation(order.begin(), order.end()));
  return std::nullopt;
}

struct GapReport {
  std::optional<std::vector<TxnId>> vsr_order;
  bool essn_admits_all = false;
  RfPolicy policy = RfPolicy::SnapshotAtBegin;

  bool gap() const { return !vsr_order && essn_admits_all; }
};

/// Contrast single-version view-serializability with multiversion admission:
/// the same trace resolved with a begin-aligned snapshot version function is
/// certified by ESSN under a begin-ordered KTO.
inline GapReport mvsr_vs_vsr_gap(const InputTrace& trace,
                                 RfPolicy policy = RfPolicy::SnapshotAtBegin) {
  GapReport report;
  report.policy = policy;
  report.vsr_order = vsr_check(trace);
  MVSchedule schedule = resolve_reads(trace, policy);
  Kto kto = make_kto(schedule, KtoFlavor::Begin);
  VersionOrder vo = build_version_order(schedule, KtoFlavor::Begin);
  Mvsg g = build_mvsg(schedule, vo, kto);
  report.essn_admits_all = abort_set(certify(g, Protocol::ESSN)).empty();
  return report;
}

/// The appendix's fixed schedules.
inline InputTrace tictoc_case(const std::string& name) {
  if (name == "war") return parse_trace("r1(x?) w2(x) c2 w1(x) c1");
  if (name == "skew") return parse_trace("r1(x?) w2(x) w2(y) c2 r1(y?) c1");
  if (name == "a") return parse_trace("r1(x?) w2(x) c2 w3(y) c3 r1(y?) c1");
  if (name == "b") return parse_trace("r1(y?) w2(x) c2 w3(y) c3 r1(x?) c1");
  throw TicTocError(TicTocErrorCode::UnknownVersion,
                    "unknown case '" + name + "'");
}

}  // namespace essn
