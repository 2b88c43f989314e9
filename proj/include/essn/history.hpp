#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "essn/sigma.hpp"

namespace essn {

enum class EventKind { Begin, Read, Write, Commit, Abort };

/// One schedule event. Reads carry the writer id of the observed version once
/// resolved (0 = base version); unresolved reads ("x?") carry none. A write
/// always creates the version subscripted with its own transaction id.
struct Event {
  EventKind kind = EventKind::Begin;
  TxnId txn = 0;
  std::string key;                  // Read/Write only
  std::optional<TxnId> version;     // Read only; nullopt = unresolved

  static Event begin(TxnId t) { return {EventKind::Begin, t, {}, {}}; }
  static Event read(TxnId t, std::string key,
                    std::optional<TxnId> ver = std::nullopt) {
    return {EventKind::Read, t, std::move(key), ver};
  }
  static Event write(TxnId t, std::string key) {
    return {EventKind::Write, t, std::move(key), {}};
  }
  static Event commit(TxnId t) { return {EventKind::Commit, t, {}, {}}; }
  static Event abort(TxnId t) { return {EventKind::Abort, t, {}, {}}; }

  bool operator==(const Event&) const = default;
};

enum class HistoryErrorCode {
  SyntaxError,
  DuplicateBegin,
  BeginNotFirst,
  DuplicateTerminal,
  EventAfterTerminal,
  DuplicateWrite,
  ReservedTxnId,
  UnresolvedRead,
  UnknownVersion,
  ReadBeforeWrite,
  ReadFromAborted,
  OwnReadBeforeWrite,
  MissingTerminal,
};

class HistoryError : public std::runtime_error {
 public:
  HistoryError(HistoryErrorCode code, std::string msg)
      : std::runtime_error(std::move(msg)), code_(code) {}
  HistoryErrorCode code() const { return code_; }

 private:
  HistoryErrorCode code_;
};

namespace detail {

[[noreturn]] inline void fail(HistoryErrorCode code, const std::string& msg) {
  throw HistoryError(code, msg);
}

inline bool is_key_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

}  // namespace detail

/// Shared event-sequence facts used by both traces and schedules.
///
/// A transaction's begin position defaults to its first event when no explicit
/// Begin token is present, matching the compact schedules where begins are
/// elided.
class EventSequence {
 public:
  EventSequence() = default;
  explicit EventSequence(std::vector<Event> events)
      : events_(std::move(events)) {
    index();
  }

  const std::vector<Event>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  const Event& operator[](std::size_t i) const { return events_[i]; }

  const std::vector<TxnId>& txns() const { return txns_; }
  const std::set<std::string>& keys() const { return keys_; }

  bool has_txn(TxnId t) const { return info_.count(t) != 0; }

  /// Position of the explicit Begin event, or of the first event otherwise.
  std::size_t begin_pos(TxnId t) const { return info_.at(t).begin_pos; }

  /// Position of the terminal event; size() when the txn is still in flight.
  std::size_t terminal_pos(TxnId t) const { return info_.at(t).terminal_pos; }

  bool commits(TxnId t) const {
    return info_.at(t).terminal == EventKind::Commit;
  }
  bool aborts(TxnId t) const {
    return info_.at(t).terminal == EventKind::Abort;
  }
  bool in_flight(TxnId t) const { return !commits(t) && !aborts(t); }

  /// Committed transactions in commit-event order.
  std::vector<TxnId> committed_in_commit_order() const {
    std::vector<std::pair<std::size_t, TxnId>> order;
    for (TxnId t : txns_)
      if (commits(t)) order.emplace_back(terminal_pos(t), t);
    std::sort(order.begin(), order.end());
    std::vector<TxnId> out;
    out.reserve(order.size());
    for (auto& [pos, t] : order) out.push_back(t);
    return out;
  }

  /// All transactions in begin order (explicit or implicit begin position).
  std::vector<TxnId> txns_in_begin_order() const {
    std::vector<std::pair<std::size_t, TxnId>> order;
    for (TxnId t : txns_) order.emplace_back(begin_pos(t), t);
    std::sort(order.begin(), order.end());
    std::vector<TxnId> out;
    out.reserve(order.size());
    for (auto& [pos, t] : order) out.push_back(t);
    return out;
  }

 protected:
  struct TxnInfo {
    std::size_t begin_pos = 0;
    std::size_t terminal_pos = 0;
    EventKind terminal = EventKind::Begin;  // Begin = still in flight
  };

  void index() {
    txns_.clear();
    keys_.clear();
    info_.clear();
    for (std::size_t i = 0; i < events_.size(); ++i) {
      const Event& e = events_[i];
      if (e.txn == kInitialTxn)
        detail::fail(HistoryErrorCode::ReservedTxnId,
                     "txn id 0 is reserved for the initial transaction");
      auto [it, fresh] = info_.try_emplace(e.txn);
      if (fresh) {
        txns_.push_back(e.txn);
        it->second.begin_pos = i;
        it->second.terminal_pos = events_.size();
      }
      if (e.kind == EventKind::Read || e.kind == EventKind::Write)
        keys_.insert(e.key);
    }
    for (std::size_t i = 0; i < events_.size(); ++i) {
      const Event& e = events_[i];
      TxnInfo& info = info_.at(e.txn);
      if (e.kind == EventKind::Commit || e.kind == EventKind::Abort) {
        info.terminal_pos = i;
        info.terminal = e.kind;
      }
    }
  }

  /// Structural invariants shared by traces and schedules.
  void validate_structure() const {
    std::map<TxnId, bool> saw_begin;
    std::map<TxnId, bool> saw_terminal;
    std::set<std::pair<TxnId, std::string>> writes;
    for (std::size_t i = 0; i < events_.size(); ++i) {
      const Event& e = events_[i];
      if (saw_terminal.count(e.txn) && saw_terminal.at(e.txn)) {
        bool term = e.kind == EventKind::Commit || e.kind == EventKind::Abort;
        detail::fail(term ? HistoryErrorCode::DuplicateTerminal
                          : HistoryErrorCode::EventAfterTerminal,
                     "t" + std::to_string(e.txn) +
                         (term ? ": duplicate terminal at position "
                               : ": event at position ") +
                         std::to_string(i) + (term ? "" : " after terminal"));
      }
      switch (e.kind) {
        case EventKind::Begin:
          if (saw_begin[e.txn])
            detail::fail(HistoryErrorCode::DuplicateBegin,
                         "t" + std::to_string(e.txn) + ": duplicate begin");
          if (i != begin_pos(e.txn))
            detail::fail(HistoryErrorCode::BeginNotFirst,
                         "t" + std::to_string(e.txn) +
                             ": begin does not precede other events");
          saw_begin[e.txn] = true;
          break;
        case EventKind::Write:
          if (!writes.insert({e.txn, e.key}).second)
            detail::fail(HistoryErrorCode::DuplicateWrite,
                         "t" + std::to_string(e.txn) + ": duplicate write to " +
                             e.key);
          break;
        case EventKind::Commit:
        case EventKind::Abort:
          saw_terminal[e.txn] = true;
          break;
        case EventKind::Read:
          break;
      }
    }
  }

  std::vector<Event> events_;
  std::vector<TxnId> txns_;  // in first-appearance order
  std::set<std::string> keys_;
  std::map<TxnId, TxnInfo> info_;
};

/// A pre-resolution history: reads may be unresolved ("x?"). Resolved reads
/// are allowed so that golden schedules can be written down as text.
class InputTrace : public EventSequence {
 public:
  InputTrace() = default;
  explicit InputTrace(std::vector<Event> events)
      : EventSequence(std::move(events)) {
    validate_structure();
  }
};

/// A multiversion schedule: every read is bound to a version that physically
/// exists (written earlier, or the base version) by a writer that never
/// aborts.
class MVSchedule : public EventSequence {
 public:
  MVSchedule() = default;
  explicit MVSchedule(std::vector<Event> events)
      : EventSequence(std::move(events)) {
    validate_structure();
    validate_reads();
  }

  /// Writer of the version a read observes, given its event position.
  TxnId read_version(std::size_t pos) const {
    return *events_[pos].version;
  }

 private:
  void validate_reads() const {
    std::set<std::pair<std::string, TxnId>> written;
    for (std::size_t i = 0; i < events_.size(); ++i) {
      const Event& e = events_[i];
      if (e.kind == EventKind::Write) {
        written.insert({e.key, e.txn});
        continue;
      }
      if (e.kind != EventKind::Read) continue;
      if (!e.version)
        detail::fail(HistoryErrorCode::UnresolvedRead,
                     "t" + std::to_string(e.txn) + ": unresolved read of " +
                         e.key + " at position " + std::to_string(i));
      TxnId writer = *e.version;
      if (writer == kInitialTxn) continue;  // base version always exists
      if (!written.count({e.key, writer}))
        detail::fail(HistoryErrorCode::ReadBeforeWrite,
                     "t" + std::to_string(e.txn) + " reads " + e.key +
                         std::to_string(writer) + " before it is written");
      if (!has_txn(writer))
        detail::fail(HistoryErrorCode::UnknownVersion,
                     "unknown version writer t" + std::to_string(writer));
      if (aborts(writer) && writer != e.txn)
        detail::fail(HistoryErrorCode::ReadFromAborted,
                     "t" + std::to_string(e.txn) + " reads " + e.key +
                         std::to_string(writer) + " from aborted writer");
    }
  }
};

// ---------------------------------------------------------------------------
// Trace grammar
//
//   token := "b"ID | "c"ID | "a"ID
//          | "r"ID "(" KEY ["?" | WID] ")"
//          | "w"ID "(" KEY [WID] ")"
//
// KEY is a run of letters/underscores; WID a run of digits. A write's
// subscript, when present, must equal the writing transaction's id. A read
// with no subscript (or "?") is unresolved.
// ---------------------------------------------------------------------------

inline InputTrace parse_trace(std::string_view text) {
  std::vector<Event> events;
  std::size_t i = 0;
  auto syntax = [&](const std::string& what) {
    detail::fail(HistoryErrorCode::SyntaxError,
                 what + " at offset " + std::to_string(i));
  };
  auto parse_id = [&]() -> TxnId {
    if (i >= text.size() || !detail::is_digit(text[i]))
      syntax("expected transaction id");
    std::uint64_t v = 0;
    while (i < text.size() && detail::is_digit(text[i]))
      v = v * 10 + static_cast<std::uint64_t>(text[i++] - '0');
    return static_cast<TxnId>(v);
  };
  while (i < text.size()) {
    if (text[i] == ' ' || text[i] == '\t' || text[i] == '\n' ||
        text[i] == '\r') {
      ++i;
      continue;
    }
    char op = text[i++];
    if (op == 'b' || op == 'c' || op == 'a') {
      TxnId t = parse_id();
      events.push_back(op == 'b'   ? Event::begin(t)
                       : op == 'c' ? Event::commit(t)
                                   : Event::abort(t));
      continue;
    }
    if (op != 'r' && op != 'w') syntax(std::string("unknown token '") + op + "'");
    TxnId t = parse_id();
    if (i >= text.size() || text[i] != '(') syntax("expected '('");
    ++i;
    std::string key;
    while (i < text.size() && detail::is_key_char(text[i])) key += text[i++];
    if (key.empty()) syntax("expected key name");
    std::optional<TxnId> ver;
    if (i < text.size() && text[i] == '?') {
      if (op == 'w') syntax("'?' not allowed on writes");
      ++i;
    } else if (i < text.size() && detail::is_digit(text[i])) {
      ver = parse_id();
    }
    if (i >= text.size() || text[i] != ')') syntax("expected ')'");
    ++i;
    if (op == 'w') {
      if (ver && *ver != t)
        syntax("write subscript must match writer id t" + std::to_string(t));
      events.push_back(Event::write(t, std::move(key)));
    } else {
      events.push_back(Event::read(t, std::move(key), ver));
    }
  }
  return InputTrace(std::move(events));
}

inline std::string format_event(const Event& e) {
  switch (e.kind) {
    case EventKind::Begin:
      return "b" + std::to_string(e.txn);
    case EventKind::Commit:
      return "c" + std::to_string(e.txn);
    case EventKind::Abort:
      return "a" + std::to_string(e.txn);
    case EventKind::Write:
      return "w" + std::to_string(e.txn) + "(" + e.key +
             std::to_string(e.txn) + ")";
    case EventKind::Read:
      return "r" + std::to_string(e.txn) + "(" + e.key +
             (e.version ? std::to_string(*e.version) : "?") + ")";
  }
  return {};
}

/// Canonical rendering: single-space-separated tokens, explicit write
/// subscripts, '?' on unresolved reads. Bit-exact for golden-file tests.
inline std::string format_trace(const EventSequence& seq) {
  std::string out;
  for (const Event& e : seq.events()) {
    if (!out.empty()) out += ' ';
    out += format_event(e);
  }
  return out;
}

inline std::string canonical_trace(std::string_view text) {
  return format_trace(parse_trace(text));
}

/// One schedule per nonempty line.
inline std::vector<InputTrace> parse_trace_lines(std::string_view text) {
  std::vector<InputTrace> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    bool blank = true;
    for (char c : line)
      if (c != ' ' && c != '\t' && c != '\r') blank = false;
    if (!blank) out.push_back(parse_trace(line));
    if (end == text.size()) break;
    start = end + 1;
  }
  return out;
}

/// Reinterpret a fully resolved trace as a multiversion schedule.
inline MVSchedule to_schedule(const InputTrace& trace) {
  return MVSchedule(trace.events());
}

inline MVSchedule parse_schedule(std::string_view text) {
  return to_schedule(parse_trace(text));
}

}  // namespace essn
