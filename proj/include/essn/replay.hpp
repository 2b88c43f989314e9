#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "essn/certify.hpp"
#include "essn/engine.hpp"
#include "essn/history.hpp"

namespace essn {

/// Outcome of replaying an input trace through the engine.
struct ReplayResult {
  /// Per-transaction verdict for every transaction whose trace terminal is a
  /// commit request (trace ids, not engine ids).
  std::map<TxnId, Verdict> verdicts;
  /// Events in the order the engine actually executed them, with reads
  /// resolved and stalled commits at their finalization points. Restarted
  /// incarnations and their events are dropped.
  MVSchedule realized;
  std::vector<CommitStats> commit_stats;
  std::vector<std::string> log;
  bool complete = true;  // false if a stall could never clear
};

/// Drives a trace through the engine single-threaded. Stalled commits and
/// reads park the transaction's remaining events; parked transactions retry
/// in sigma order whenever some transaction terminates. Transactions in
/// `longs` begin with long priority (restarting in-flight shorts under a
/// begin-ordered KTO); restarted shorts replay their recorded operations
/// under a fresh engine transaction.
class TraceReplayer {
 public:
  TraceReplayer(EngineConfig cfg, std::set<TxnId> longs = {})
      : engine_(cfg), longs_(std::move(longs)) {}

  ReplayResult run(const InputTrace& trace) {
    for (const Event& e : trace.events()) {
      auto it = state_.find(e.txn);
      bool terminated;
      if (it != state_.end() && !it->second.parked.empty()) {
        it->second.parked.push_back(e);
        terminated = false;
      } else {
        terminated = step(e);
      }
      // A termination can clear stalls; let parked transactions catch up so
      // the realized order matches the stall discipline.
      if (terminated)
        while (retry_parked()) {
        }
    }
    // Drain parked transactions until quiescent.
    while (retry_parked()) {
    }
    ReplayResult out;
    out.complete = true;
    for (auto& [t, st] : state_) {
      if (!st.parked.empty()) out.complete = false;
      if (st.requested_commit)
        out.verdicts[t] =
            engine_.status(st.engine_id) == TxnStatus::Committed
                ? Verdict::Commit
                : Verdict::Abort;
    }
    out.realized = realize();
    out.commit_stats = stats_;
    out.log = engine_.event_log();
    return out;
  }

  const Engine& engine() const { return engine_; }

 private:
  struct TxnState {
    TxnId engine_id = 0;
    std::vector<Event> issued;        // ops to replay after a restart
    std::deque<Event> parked;         // deferred events, stalled op first
    std::vector<std::pair<std::size_t, Event>> realized;  // (seq, event)
    bool requested_commit = false;
    bool done = false;
  };

  /// Returns true iff the event terminated a transaction.
  bool step(const Event& e) {
    switch (e.kind) {
      case EventKind::Begin:
        do_begin(e.txn);
        return false;
      case EventKind::Read:
      case EventKind::Write:
      case EventKind::Commit:
      case EventKind::Abort: {
        if (!state_.count(e.txn)) do_begin(e.txn);  // implicit begin
        if (!try_op(e)) {
          state_.at(e.txn).parked.push_back(e);
          return false;
        }
        return e.kind == EventKind::Commit || e.kind == EventKind::Abort;
      }
    }
    return false;
  }

  void do_begin(TxnId t) {
    bool is_long = longs_.count(t) != 0;
    TxnId engine_id = engine_.begin(is_long);
    TxnState& st = state_[t];
    st.engine_id = engine_id;
    st.realized.push_back({next_seq(), Event::begin(t)});
    engine_to_trace_[engine_id] = t;
    if (is_long) handle_restarts();
  }

  void handle_restarts() {
    // Re-run every short the engine restarted, in original begin order.
    std::vector<TxnId> victims;
    for (auto& [t, st] : state_)
      if (engine_.was_restarted(st.engine_id)) victims.push_back(t);
    std::sort(victims.begin(), victims.end(), [&](TxnId a, TxnId b) {
      return state_.at(a).engine_id < state_.at(b).engine_id;
    });
    for (TxnId t : victims) {
      TxnState& st = state_.at(t);
      engine_.clear_restart(st.engine_id);
      engine_to_trace_.erase(st.engine_id);
      st.realized.clear();
      TxnId fresh = engine_.begin(false);
      st.engine_id = fresh;
      engine_to_trace_[fresh] = t;
      st.realized.push_back({next_seq(), Event::begin(t)});
      // Re-run recorded operations ahead of any events parked earlier (a
      // stalled commit, say), stopping at the first op that stalls again.
      std::vector<Event> ops = std::move(st.issued);
      st.issued.clear();
      for (auto it = ops.rbegin(); it != ops.rend(); ++it)
        st.parked.push_front(*it);
      while (!st.parked.empty()) {
        Event e = st.parked.front();
        st.parked.pop_front();
        if (!try_op(e)) {
          st.parked.push_front(e);
          break;
        }
      }
    }
  }

  /// Execute one read/write/terminal. Returns false if the op stalled.
  bool try_op(const Event& e) {
    TxnState& st = state_.at(e.txn);
    switch (e.kind) {
      case EventKind::Read: {
        auto res = engine_.read(st.engine_id, e.key);
        if (std::holds_alternative<StallRequired>(res)) return false;
        const auto* v = std::get<const Engine::VersionObject*>(res);
        st.issued.push_back(e);
        st.realized.push_back(
            {next_seq(), Event::read(e.txn, e.key, trace_id(v->writer))});
        return true;
      }
      case EventKind::Write:
        engine_.write(st.engine_id, e.key);
        st.issued.push_back(e);
        st.realized.push_back({next_seq(), Event::write(e.txn, e.key)});
        return true;
      case EventKind::Commit: {
        st.requested_commit = true;
        CommitOutcome res = engine_.commit(st.engine_id);
        if (std::holds_alternative<Stalled>(res)) return false;
        stats_.push_back(engine_.last_commit_stats());
        st.done = true;
        st.realized.push_back(
            {next_seq(), std::holds_alternative<Committed>(res)
                             ? Event::commit(e.txn)
                             : Event::abort(e.txn)});
        return true;
      }
      case EventKind::Abort:
        engine_.abort(st.engine_id);
        st.done = true;
        st.realized.push_back({next_seq(), Event::abort(e.txn)});
        return true;
      case EventKind::Begin:
        return true;
    }
    return true;
  }

  /// One pass over parked transactions in sigma order; true if any progressed.
  bool retry_parked() {
    std::vector<TxnId> parked;
    for (auto& [t, st] : state_)
      if (!st.parked.empty()) parked.push_back(t);
    std::sort(parked.begin(), parked.end(), [&](TxnId a, TxnId b) {
      const auto& ta = engine_.txn(state_.at(a).engine_id);
      const auto& tb = engine_.txn(state_.at(b).engine_id);
      if (ta.sigma_assigned && tb.sigma_assigned && ta.sigma != tb.sigma)
        return ta.sigma < tb.sigma;
      return ta.begin_seq < tb.begin_seq;
    });
    bool progressed = false;
    for (TxnId t : parked) {
      TxnState& st = state_.at(t);
      while (!st.parked.empty()) {
        Event e = st.parked.front();
        st.parked.pop_front();
        if (try_op(e)) {
          progressed = true;
        } else {
          st.parked.push_front(e);
          break;
        }
      }
    }
    return progressed;
  }

  std::optional<TxnId> trace_id(TxnId engine_id) const {
    if (engine_id == kInitialTxn) return kInitialTxn;
    return engine_to_trace_.at(engine_id);
  }

  std::size_t next_seq() { return seq_++; }

  MVSchedule realize() const {
    std::vector<std::pair<std::size_t, Event>> all;
    for (auto& [t, st] : state_)
      for (auto& entry : st.realized) all.push_back(entry);
    std::sort(all.begin(), all.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Event> events;
    events.reserve(all.size());
    for (auto& [seq, e] : all) events.push_back(e);
    return MVSchedule(std::move(events));
  }

  Engine engine_;
  std::set<TxnId> longs_;
  std::map<TxnId, TxnState> state_;
  std::map<TxnId, TxnId> engine_to_trace_;
  std::vector<CommitStats> stats_;
  std::size_t seq_ = 0;
};

inline ReplayResult replay_trace(const InputTrace& trace, EngineConfig cfg,
                                 std::set<TxnId> longs = {}) {
  return TraceReplayer(cfg, std::move(longs)).run(trace);
}

}  // namespace essn
