#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "essn/history.hpp"
#include "essn/kto.hpp"
#include "essn/resolve.hpp"

namespace essn {

/// Deterministic 64-bit splittable generator. Substreams are derived from
/// (seed, index) so grid cells can be generated independently.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static SplitMix64 stream(std::uint64_t seed, std::uint64_t index) {
    SplitMix64 mixer(seed ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
    mixer.next();
    return mixer;
  }

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }

  std::int64_t range(std::int64_t lo, std::int64_t hi_exclusive) {
    return lo + static_cast<std::int64_t>(
                    below(static_cast<std::uint64_t>(hi_exclusive - lo)));
  }

  bool bernoulli(double p) {
    return static_cast<double>(next() >> 11) * 0x1.0p-53 < p;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[below(i)]);
  }

  /// k distinct elements sampled from pool, order randomized.
  template <typename T>
  std::vector<T> sample(std::vector<T> pool, std::size_t k) {
    shuffle(pool);
    pool.resize(std::min(k, pool.size()));
    return pool;
  }

 private:
  std::uint64_t state_;
};

enum class GenErrorCode { InfeasibleParams };

class GenError : public std::runtime_error {
 public:
  GenError(GenErrorCode code, std::string msg)
      : std::runtime_error(std::move(msg)), code_(code) {}
  GenErrorCode code() const { return code_; }

 private:
  GenErrorCode code_;
};

struct WorkloadParams {
  int n_keys = 200;
  int read_size = 40;
  int n_shorts = 60;
  int repeats = 50;
  double pivot_prob = 0.5;
  double short_hit_prob = 0.5;
  std::uint64_t seed = 1;
  RfPolicy rf_policy = RfPolicy::SnapshotAtBegin;
  KtoFlavor kto_flavor = KtoFlavor::Commit;
};

inline constexpr TxnId kLongRoTxn = 1;   // t1: read-only long
inline constexpr TxnId kLongRwTxn = 2;   // t2: long with one final write
inline constexpr TxnId kFirstShort = 3;

/// Key 0 is the special item "z" (read by t1, written only by t2); the rest
/// are digit-free identifiers so writer subscripts parse unambiguously.
inline std::string key_name(int index) {
  if (index == 0) return "z";
  std::string suffix;
  int n = index - 1;
  do {
    suffix += static_cast<char>('a' + n % 26);
    n = n / 26 - 1;
  } while (n >= 0);
  std::reverse(suffix.begin(), suffix.end());
  return "k" + suffix;
}

namespace detail {

struct TimedEvent {
  std::int64_t time;
  std::size_t order;  // generation order; total tie-break
  Event event;
};

}  // namespace detail

/// Mixed workload: a read-only long t1 (reads `read_size` keys plus z), a
/// long t2 (same read volume, one final write), and `n_shorts` write-only
/// shorts. Each short's write hits a key read by a long with probability
/// short_hit_prob; t2's final write overwrites a version t1 read (the key z)
/// with probability pivot_prob and otherwise lands on a key neither long
/// reads. Longs begin inside the first quartile of the short phase, strictly
/// contain at least one complete short, and commit only after the last short
/// that wrote any key in their read set; t2 commits last. Deterministic in
/// the seed.
inline InputTrace generate_mixed(const WorkloadParams& p) {
  if (p.n_keys < 3 || p.read_size < 1 || p.n_shorts < 2 ||
      p.read_size > p.n_keys - 2 || p.pivot_prob < 0 || p.pivot_prob > 1 ||
      p.short_hit_prob < 0 || p.short_hit_prob > 1)
    throw GenError(GenErrorCode::InfeasibleParams,
                   "workload parameters are infeasible");

  SplitMix64 rng(p.seed);
  std::vector<std::string> non_z;
  for (int i = 1; i < p.n_keys; ++i) non_z.push_back(key_name(i));

  auto t1_reads = rng.sample(non_z, static_cast<std::size_t>(p.read_size));
  auto t2_reads = rng.sample(non_z, static_cast<std::size_t>(p.read_size));
  std::set<std::string> long_read_set(t1_reads.begin(), t1_reads.end());
  long_read_set.insert(t2_reads.begin(), t2_reads.end());

  bool pivot = rng.bernoulli(p.pivot_prob);
  std::string final_key = "z";
  if (!pivot) {
    std::vector<std::string> outside;
    for (const auto& k : non_z)
      if (!long_read_set.count(k)) outside.push_back(k);
    if (outside.empty())
      throw GenError(GenErrorCode::InfeasibleParams,
                     "no key outside the longs' read sets for the non-pivot "
                     "final write");
    final_key = outside[rng.below(outside.size())];
  }

  std::vector<std::string> hit_pool(long_read_set.begin(),
                                    long_read_set.end());
  std::vector<std::string> miss_pool;
  for (const auto& k : non_z)
    if (!long_read_set.count(k)) miss_pool.push_back(k);
  if (miss_pool.empty()) miss_pool = non_z;  // everything is long-read

  // Short phase: short i occupies the time block [B*i, B*(i+1)), with its
  // commit occasionally stretched into the next block so shorts overlap.
  constexpr std::int64_t kBlock = 1000;
  std::vector<detail::TimedEvent> timeline;
  std::size_t order = 0;
  auto emit = [&](std::int64_t time, Event e) {
    timeline.push_back({time, order++, std::move(e)});
  };

  struct ShortInfo {
    TxnId id;
    std::string key;
    std::int64_t begin_time;
    std::int64_t commit_time;
  };
  std::vector<ShortInfo> shorts;
  for (int i = 0; i < p.n_shorts; ++i) {
    TxnId id = kFirstShort + static_cast<TxnId>(i);
    bool hit = rng.bernoulli(p.short_hit_prob);
    const auto& pool = hit ? hit_pool : miss_pool;
    std::string key = pool[rng.below(pool.size())];
    std::int64_t base = kBlock * i;
    std::int64_t tb = base + rng.range(0, kBlock / 4);
    std::int64_t tw = tb + 1 + rng.range(0, kBlock / 4);
    std::int64_t overlap = rng.bernoulli(0.5) ? kBlock : 0;
    std::int64_t tc = tw + 1 + rng.range(0, kBlock / 2) + overlap;
    emit(tb, Event::begin(id));
    emit(tw, Event::write(id, key));
    emit(tc, Event::commit(id));
    shorts.push_back({id, key, tb, tc});
  }

  // Longs begin inside the first quartile of short begins.
  std::size_t quartile = std::max<std::size_t>(1, shorts.size() / 4);
  std::int64_t quartile_end = shorts[quartile - 1].begin_time;
  std::int64_t tb1 = rng.range(0, quartile_end + 1);
  std::int64_t tb2 = rng.range(0, quartile_end + 1);
  if (tb2 < tb1) std::swap(tb1, tb2);
  if (tb2 == tb1) ++tb2;

  auto last_hitter_commit = [&](const std::vector<std::string>& read_keys,
                                std::int64_t begin_time) {
    std::set<std::string> keys(read_keys.begin(), read_keys.end());
    std::int64_t last = begin_time;
    for (const ShortInfo& s : shorts)
      if (keys.count(s.key)) last = std::max(last, s.commit_time);
    return last;
  };
  auto containment_commit = [&](std::int64_t begin_time) {
    for (const ShortInfo& s : shorts)
      if (s.begin_time > begin_time) return s.commit_time;
    return shorts.back().commit_time;
  };

  std::int64_t tc1 = std::max(last_hitter_commit(t1_reads, tb1),
                              containment_commit(tb1)) +
                     1;
  std::int64_t tc2 =
      std::max({last_hitter_commit(t2_reads, tb2), containment_commit(tb2),
                tc1}) +
      2;

  emit(tb1, Event::begin(kLongRoTxn));
  emit(tb2, Event::begin(kLongRwTxn));
  // t1 reads z plus its sampled keys, spread across its lifetime.
  emit(rng.range(tb1 + 1, tc1), Event::read(kLongRoTxn, "z"));
  for (const auto& k : t1_reads)
    emit(rng.range(tb1 + 1, tc1), Event::read(kLongRoTxn, k));
  emit(tc1, Event::commit(kLongRoTxn));
  for (const auto& k : t2_reads)
    emit(rng.range(tb2 + 1, tc2 - 1), Event::read(kLongRwTxn, k));
  emit(tc2 - 1, Event::write(kLongRwTxn, final_key));
  emit(tc2, Event::commit(kLongRwTxn));

  std::sort(timeline.begin(), timeline.end(),
            [](const detail::TimedEvent& a, const detail::TimedEvent& b) {
              return std::tie(a.time, a.order) < std::tie(b.time, b.order);
            });
  std::vector<Event> events;
  events.reserve(timeline.size());
  for (auto& te : timeline) events.push_back(std::move(te.event));
  return InputTrace(std::move(events));
}

// ---------------------------------------------------------------------------
// Randomized histories for property tests and the acceptance corpus.
// ---------------------------------------------------------------------------

struct RandomHistoryOptions {
  int max_txns = 8;
  int max_keys = 6;
  int max_ops_per_txn = 4;
};

/// Random interleaved skeleton with unresolved reads; every transaction
/// commits.
inline InputTrace random_trace_skeleton(SplitMix64& rng,
                                        const RandomHistoryOptions& opt = {}) {
  int n_txns = static_cast<int>(rng.range(2, opt.max_txns + 1));
  int n_keys = static_cast<int>(rng.range(1, opt.max_keys + 1));
  std::vector<std::vector<Event>> streams;
  for (int i = 0; i < n_txns; ++i) {
    TxnId id = static_cast<TxnId>(i + 1);
    std::vector<Event> ops;
    ops.push_back(Event::begin(id));
    int n_ops = static_cast<int>(rng.range(1, opt.max_ops_per_txn + 1));
    std::set<std::string> written;
    for (int k = 0; k < n_ops; ++k) {
      std::string key = key_name(static_cast<int>(rng.below(n_keys)) + 1);
      if (rng.bernoulli(0.5)) {
        ops.push_back(Event::read(id, key));
      } else if (!written.count(key)) {
        written.insert(key);
        ops.push_back(Event::write(id, key));
      } else {
        ops.push_back(Event::read(id, key));
      }
    }
    ops.push_back(Event::commit(id));
    streams.push_back(std::move(ops));
  }
  std::vector<Event> events;
  std::vector<std::size_t> cursor(streams.size(), 0);
  std::size_t remaining = 0;
  for (auto& s : streams) remaining += s.size();
  while (remaining > 0) {
    std::size_t pick = rng.below(streams.size());
    if (cursor[pick] < streams[pick].size()) {
      events.push_back(streams[pick][cursor[pick]++]);
      --remaining;
    }
  }
  return InputTrace(std::move(events));
}

/// Random SI history: snapshot reads and first-committer-wins. Committed
/// writers of a key are never concurrent; losers of a write-write conflict
/// abort.
inline MVSchedule random_si_history(SplitMix64& rng,
                                    const RandomHistoryOptions& opt = {}) {
  InputTrace skeleton = random_trace_skeleton(rng, opt);
  std::vector<Event> events = skeleton.events();

  // First-committer-wins per key over committed writers.
  std::set<TxnId> losers;
  bool changed = true;
  while (changed) {
    changed = false;
    InputTrace trace(events);
    std::map<std::string, std::vector<TxnId>> writers;
    for (const Event& e : trace.events())
      if (e.kind == EventKind::Write && trace.commits(e.txn))
        writers[e.key].push_back(e.txn);
    for (auto& [key, ws] : writers) {
      std::sort(ws.begin(), ws.end(), [&](TxnId a, TxnId b) {
        return trace.terminal_pos(a) < trace.terminal_pos(b);
      });
      std::vector<TxnId> kept;
      for (TxnId w : ws) {
        bool conflict = false;
        for (TxnId k : kept) {
          if (trace.begin_pos(w) < trace.terminal_pos(k) &&
              trace.begin_pos(k) < trace.terminal_pos(w)) {
            conflict = true;
            break;
          }
        }
        if (conflict) {
          losers.insert(w);
          changed = true;
        } else {
          kept.push_back(w);
        }
      }
    }
    if (changed)
      for (Event& e : events)
        if (e.kind == EventKind::Commit && losers.count(e.txn))
          e.kind = EventKind::Abort;
  }

  return resolve_reads(InputTrace(std::move(events)),
                       RfPolicy::SnapshotAtBegin);
}

}  // namespace essn
