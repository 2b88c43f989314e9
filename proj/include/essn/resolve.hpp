#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "essn/history.hpp"

namespace essn {

/// Read-from policy: which version a read observes.
///
///   AsOfReadCommit:  latest committed version at the read event.
///                    Aligns with a commit-ordered KTO.
///   NearestBeginKto: version by the begin-order-greatest writer that began
///                    before the reader (MVTO-like). Aligns with begin KTO.
///   SnapshotAtBegin: latest version committed before the reader's begin.
///                    Aligns with both KTO flavors.
enum class RfPolicy { AsOfReadCommit, NearestBeginKto, SnapshotAtBegin };

inline const char* to_string(RfPolicy p) {
  switch (p) {
    case RfPolicy::AsOfReadCommit: return "as_of_read_commit";
    case RfPolicy::NearestBeginKto: return "nearest_begin_kto";
    case RfPolicy::SnapshotAtBegin: return "snapshot_at_begin";
  }
  return "?";
}

struct ResolveOptions {
  /// Commit-stall discipline for begin-aligned policies: a snapshot admits
  /// only versions whose writers had committed by the reader's begin. When
  /// false, versions by earlier-begun writers that commit later in the trace
  /// are optimistically included (the variant that produces the classic
  /// read-only anomaly).
  bool commit_stall = true;
};

/// Bind every unresolved read per the policy, in place. Already-resolved
/// reads are kept as written; the base version is used when no writer
/// qualifies.
///
/// NearestBeginKto binds among versions physically written before the read.
/// Under the live engine a read can instead stall until an earlier-begun
/// writer terminates and then observe its version; replaying the trace
/// (essn/replay.hpp) produces that stall-realized schedule.
inline MVSchedule resolve_reads(const InputTrace& trace, RfPolicy policy,
                                ResolveOptions opts = {}) {
  const auto& events = trace.events();

  struct WriteRec {
    TxnId writer;
    std::size_t write_pos;
    std::size_t writer_begin;
    std::size_t commit_pos;  // events.size()+1 if never commits
    bool committed;
  };
  std::map<std::string, std::vector<WriteRec>> writes;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    if (e.kind != EventKind::Write) continue;
    writes[e.key].push_back({e.txn, i, trace.begin_pos(e.txn),
                             trace.commits(e.txn) ? trace.terminal_pos(e.txn)
                                                  : events.size() + 1,
                             trace.commits(e.txn)});
  }

  std::vector<Event> out = events;
  for (std::size_t i = 0; i < out.size(); ++i) {
    Event& e = out[i];
    if (e.kind != EventKind::Read || e.version) continue;
    const TxnId reader = e.txn;
    const std::size_t reader_begin = trace.begin_pos(reader);

    // A transaction reading a key it already wrote sees its own write.
    TxnId chosen = kInitialTxn;
    bool own = false;
    if (auto it = writes.find(e.key); it != writes.end()) {
      for (const WriteRec& w : it->second) {
        if (w.writer == reader && w.write_pos < i) {
          chosen = reader;
          own = true;
          break;
        }
      }
      if (!own) {
        switch (policy) {
          case RfPolicy::AsOfReadCommit: {
            std::size_t best_commit = 0;
            for (const WriteRec& w : it->second)
              if (w.committed && w.commit_pos < i &&
                  w.commit_pos >= best_commit) {
                best_commit = w.commit_pos + 1;
                chosen = w.writer;
              }
            break;
          }
          case RfPolicy::SnapshotAtBegin: {
            std::size_t best_commit = 0;
            for (const WriteRec& w : it->second)
              if (w.committed && w.commit_pos < reader_begin &&
                  w.commit_pos >= best_commit) {
                best_commit = w.commit_pos + 1;
                chosen = w.writer;
              }
            if (!opts.commit_stall) {
              // Optimistic begin-order snapshot: admit versions by writers
              // that began earlier and eventually commit, even if their
              // commit lands after the reader's begin.
              std::size_t best_begin = 0;
              std::optional<TxnId> opt;
              for (const WriteRec& w : it->second)
                if (w.committed && w.writer_begin < reader_begin &&
                    w.write_pos < i && w.writer_begin >= best_begin) {
                  best_begin = w.writer_begin + 1;
                  opt = w.writer;
                }
              if (opt) chosen = *opt;
            }
            break;
          }
          case RfPolicy::NearestBeginKto: {
            // Begin-order-greatest writer begun before the reader whose
            // version physically exists at the read. Writers that never
            // commit fall through to the prior qualifying version.
            std::size_t best_begin = 0;
            for (const WriteRec& w : it->second)
              if (w.committed && w.writer_begin < reader_begin &&
                  w.write_pos < i && w.writer_begin >= best_begin) {
                best_begin = w.writer_begin + 1;
                chosen = w.writer;
              }
            break;
          }
        }
      }
    }
    e.version = chosen;
  }
  return MVSchedule(std::move(out));
}

}  // namespace essn
