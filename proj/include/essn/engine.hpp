#pragma once

#include <cstddef>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "essn/history.hpp"
#include "essn/kto.hpp"
#include "essn/resolve.hpp"
#include "essn/sigma.hpp"

namespace essn {

enum class TxnStatus { InFlight, Committed, Aborted };

struct EngineConfig {
  KtoFlavor kto_flavor = KtoFlavor::Commit;
  RfPolicy rf_policy = RfPolicy::AsOfReadCommit;
  bool shortcut = false;       // read-time shortcut: fold committed
                               // overwriter stamps at read
  bool stall_bypass = false;   // early commit for provably safe stalled txns
};

/// Read could not pick a version yet: an earlier-in-KTO writer of the key is
/// still in flight and its outcome decides the binding.
struct StallRequired {
  TxnId waiting_for = 0;
};

struct Committed {};
struct Stalled {
  TxnId waiting_for = 0;  // wait handle: smallest-sigma in-flight predecessor
};
struct Aborted {
  Sigma pi;  // t.sstamp at the failed check
  Sigma xi;  // t.psstamp at the failed check
};
using CommitOutcome = std::variant<Committed, Stalled, Aborted>;

/// Single commit's instrumentation: version objects touched during the
/// evaluation + finalization phases, and how many prev hops were taken past
/// the immediate predecessor (always 0 by construction; asserted in tests).
struct CommitStats {
  std::size_t version_accesses = 0;
  std::size_t chain_hops_past_prev = 0;
  std::size_t reads = 0;
  std::size_t writes = 0;
};

/// Online commit protocol: reads and writes only record set membership; a
/// single exclusion check runs at commit, touching each read version and
/// each staged write's immediate predecessor once. No early aborts.
class Engine {
 public:
  struct VersionObject {
    std::string key;
    TxnId writer = kInitialTxn;
    Sigma sstamp = Sigma::pos_inf();    // next committed writer's pi
    Sigma psstamp = Sigma::neg_inf();   // prefix max of readers' pi
    Sigma crepi = Sigma::neg_inf();     // creator's pi
    Sigma creator_sigma = Sigma::neg_inf();
    Sigma reader_sigma_hwm = Sigma::neg_inf();  // SSN diagnostic counterpart
    VersionObject* prev = nullptr;
    std::size_t commit_seq = 0;  // global sequence at install
  };

  struct TxnObject {
    TxnId id = 0;
    TxnStatus status = TxnStatus::InFlight;
    bool long_priority = false;
    bool bypassed = false;
    Sigma sigma;                 // begin flavor: set at begin; commit: at commit
    bool sigma_assigned = false;
    std::size_t begin_seq = 0;
    Sigma sstamp = Sigma::pos_inf();
    Sigma psstamp = Sigma::neg_inf();
    // Diagnostic forward bound for the SSN-style check (pi <= eta). Tracked
    // with the same previous-edge-only scheme, so unlike xi it can miss a
    // forward rw that skips chain positions; the per-key checker sees those.
    Sigma eta = Sigma::neg_inf();
    std::vector<VersionObject*> reads;
    std::map<std::string, std::unique_ptr<VersionObject>> writes;  // staged
    std::optional<Sigma> last_pi;  // finalized pi after commit
  };

  explicit Engine(EngineConfig cfg = {}) : cfg_(cfg) {}

  const EngineConfig& config() const { return cfg_; }

  /// Start a transaction. With a begin-ordered KTO, sigma is drawn now; long
  /// transactions restart every in-flight non-long transaction so the long
  /// precedes them in the order.
  TxnId begin(bool long_priority = false) {
    TxnId id = next_txn_id_++;
    if (long_priority && cfg_.kto_flavor == KtoFlavor::Begin) {
      for (auto& [other_id, other] : txns_) {
        if (other.status == TxnStatus::InFlight && !other.long_priority) {
          rollback(other);
          restarted_.insert(other_id);
          log("restart t" + std::to_string(other_id) +
              " -> aborted (long t" + std::to_string(id) + " begins)");
        }
      }
    }
    TxnObject& t = txns_[id];
    t.id = id;
    t.long_priority = long_priority;
    t.begin_seq = ++seq_;
    if (cfg_.kto_flavor == KtoFlavor::Begin) {
      t.sigma = Sigma::of(next_rank_++, id);
      t.sigma_assigned = true;
    }
    log("begin t" + std::to_string(id) + " -> ok");
    return id;
  }

  bool was_restarted(TxnId id) const { return restarted_.count(id) != 0; }
  void clear_restart(TxnId id) { restarted_.erase(id); }

  const TxnObject& txn(TxnId id) const { return txns_.at(id); }
  TxnStatus status(TxnId id) const { return txns_.at(id).status; }

  /// Record a read. Returns the observed version, or StallRequired when the
  /// begin-ordered policy needs an in-flight earlier writer's outcome first.
  std::variant<const VersionObject*, StallRequired> read(TxnId id,
                                                         const std::string& key) {
    TxnObject& t = txns_.at(id);
    require_in_flight(t);
    if (auto it = t.writes.find(key); it != t.writes.end()) {
      // Own staged write: resolved locally, excluded from the read set.
      log("read t" + std::to_string(id) + " " + key + " " + key +
          std::to_string(id) + " -> ok (own)");
      return static_cast<const VersionObject*>(it->second.get());
    }
    Chain& chain = chain_for(key);
    VersionObject* v = nullptr;
    switch (cfg_.rf_policy) {
      case RfPolicy::AsOfReadCommit:
        v = chain.versions.back().get();
        break;
      case RfPolicy::SnapshotAtBegin: {
        for (auto it = chain.versions.rbegin(); it != chain.versions.rend();
             ++it) {
          if ((*it)->commit_seq < t.begin_seq) {
            v = it->get();
            break;
          }
        }
        break;
      }
      case RfPolicy::NearestBeginKto: {
        // An in-flight earlier-begun writer staging this key decides the
        // binding; the reader waits for its outcome.
        for (auto& [oid, other] : txns_) {
          if (other.status != TxnStatus::InFlight || oid == id) continue;
          if (other.begin_seq < t.begin_seq && other.writes.count(key)) {
            log("read t" + std::to_string(id) + " " + key + " -> stall t" +
                std::to_string(oid));
            return StallRequired{oid};
          }
        }
        for (auto it = chain.versions.rbegin(); it != chain.versions.rend();
             ++it) {
          TxnId w = (*it)->writer;
          std::size_t wseq = w == kInitialTxn ? 0 : txns_.at(w).begin_seq;
          if (wseq < t.begin_seq) {
            v = it->get();
            break;
          }
        }
        break;
      }
    }
    if (!v) v = chain.versions.front().get();  // base version

    if (cfg_.shortcut && !v->sstamp.is_pos_inf()) {
      // Overwriter already committed: fold its pi (and the creator's pi on
      // the wr side) into the accumulators and drop the entry.
      t.sstamp = min(t.sstamp, v->sstamp);
      t.psstamp = max(t.psstamp, v->crepi);
      t.eta = max(t.eta, v->creator_sigma);
      log("read t" + std::to_string(id) + " " + key + " " + key +
          std::to_string(v->writer) + " -> ok (shortcut)");
      return static_cast<const VersionObject*>(v);
    }
    t.reads.push_back(v);
    log("read t" + std::to_string(id) + " " + key + " " + key +
        std::to_string(v->writer) + " -> ok");
    return static_cast<const VersionObject*>(v);
  }

  /// Stage a write; nothing is installed until commit. Restaging the same key
  /// replaces the previous stage.
  const VersionObject* write(TxnId id, const std::string& key) {
    TxnObject& t = txns_.at(id);
    require_in_flight(t);
    auto v = std::make_unique<VersionObject>();
    v->key = key;
    v->writer = id;
    v->prev = chain_for(key).versions.back().get();
    const VersionObject* out = v.get();
    t.writes[key] = std::move(v);
    log("write t" + std::to_string(id) + " " + key + " -> staged");
    return out;
  }

  /// True iff the stalled transaction may finalize now with a verdict that no
  /// pending earlier transaction can change: it is read-only and every
  /// forward bound is still -inf, so future edges can only be back-edges out
  /// of it and the exclusion can never fire.
  bool stall_bypass_allowed(TxnId id) const {
    const TxnObject& t = txns_.at(id);
    if (t.status != TxnStatus::InFlight) return false;
    if (!t.writes.empty()) return false;
    Sigma xi = t.psstamp;
    Sigma eta = t.eta;
    for (const VersionObject* u : t.reads) {
      xi = max(xi, u->crepi);
      eta = max(eta, u->creator_sigma);
    }
    return xi.is_neg_inf() && eta.is_neg_inf();
  }

  CommitOutcome commit(TxnId id) { return commit_impl(id, false); }

  /// Commit a stalled transaction early via the bypass predicate.
  CommitOutcome stall_bypass(TxnId id) {
    if (!stall_bypass_allowed(id)) return Stalled{stall_blocker(id).value_or(0)};
    return commit_impl(id, true);
  }

  void abort(TxnId id) {
    TxnObject& t = txns_.at(id);
    require_in_flight(t);
    rollback(t);
    log("abort t" + std::to_string(id) + " -> aborted");
  }

  const CommitStats& last_commit_stats() const { return last_stats_; }
  const std::vector<std::string>& event_log() const { return log_; }

  /// Committed versions of a key, base first (append-only chain).
  std::vector<const VersionObject*> chain(const std::string& key) const {
    std::vector<const VersionObject*> out;
    auto it = chains_.find(key);
    if (it == chains_.end()) return out;
    for (auto& v : it->second.versions) out.push_back(v.get());
    return out;
  }

  std::vector<std::string> keys() const {
    std::vector<std::string> out;
    for (auto& [k, c] : chains_) out.push_back(k);
    return out;
  }

  std::vector<TxnId> transactions() const {
    std::vector<TxnId> out;
    for (auto& [id, t] : txns_) out.push_back(id);
    return out;
  }

  /// Smallest-sigma in-flight transaction ordered before `id`, if any.
  std::optional<TxnId> stall_blocker(TxnId id) const {
    const TxnObject& t = txns_.at(id);
    std::optional<TxnId> blocker;
    Sigma best = Sigma::pos_inf();
    for (auto& [oid, other] : txns_) {
      if (oid == id || other.status != TxnStatus::InFlight) continue;
      if (!other.sigma_assigned) continue;
      if (other.sigma < t.sigma && other.sigma < best) {
        best = other.sigma;
        blocker = oid;
      }
    }
    return blocker;
  }

 private:
  struct Chain {
    std::vector<std::unique_ptr<VersionObject>> versions;  // [0] = base
  };

  Chain& chain_for(const std::string& key) {
    auto it = chains_.find(key);
    if (it != chains_.end()) return it->second;
    Chain& c = chains_[key];
    auto base = std::make_unique<VersionObject>();
    base->key = key;
    base->writer = kInitialTxn;
    c.versions.push_back(std::move(base));
    return c;
  }

  void require_in_flight(const TxnObject& t) const {
    if (t.status != TxnStatus::InFlight)
      throw std::logic_error("t" + std::to_string(t.id) +
                             " is not in flight");
  }

  void rollback(TxnObject& t) {
    // Staged versions vanish; no shared metadata was touched before commit.
    t.writes.clear();
    t.reads.clear();
    t.status = TxnStatus::Aborted;
  }

  CommitOutcome commit_impl(TxnId id, bool bypassing) {
    TxnObject& t = txns_.at(id);
    require_in_flight(t);

    if (cfg_.kto_flavor == KtoFlavor::Begin && !bypassing) {
      if (auto blocker = stall_blocker(id)) {
        if (cfg_.stall_bypass && stall_bypass_allowed(id))
          return commit_impl(id, true);
        log("commit t" + std::to_string(id) + " -> stalled t" +
            std::to_string(*blocker));
        return Stalled{*blocker};
      }
    }
    if (!t.sigma_assigned) {
      t.sigma = Sigma::of(next_rank_++, id);  // inside the commit section
      t.sigma_assigned = true;
    }

    CommitStats stats;
    stats.reads = t.reads.size();
    stats.writes = t.writes.size();

    // Evaluation phase: finalize pi and xi from immediate metadata only.
    Sigma pi = min(t.sstamp, t.sigma);
    Sigma xi = t.psstamp;
    Sigma eta = t.eta;
    for (const VersionObject* u : t.reads) {
      ++stats.version_accesses;
      pi = min(pi, u->sstamp);
      xi = max(xi, u->crepi);
      eta = max(eta, u->creator_sigma);
    }
    for (auto& [key, v] : t.writes) {
      // The effective predecessor is the chain tail inside this commit
      // section, which can be newer than the tail seen when the write staged.
      VersionObject* p = chain_for(key).versions.back().get();
      v->prev = p;
      ++stats.version_accesses;
      xi = max(xi, p->crepi);
      xi = max(xi, p->psstamp);
      eta = max(eta, p->creator_sigma);
      eta = max(eta, p->reader_sigma_hwm);
    }
    t.sstamp = pi;
    t.psstamp = xi;
    t.eta = eta;

    if (pi <= xi) {
      rollback(t);
      last_stats_ = stats;
      log("commit t" + std::to_string(id) + " -> aborted pi=" + pi.str() +
          " xi=" + xi.str());
      return Aborted{pi, xi};
    }

    // Finalization phase: install staged versions at their chain tails and
    // propagate stamps to immediate neighbors.
    t.status = TxnStatus::Committed;
    t.last_pi = pi;
    t.bypassed = bypassing;
    std::size_t install_seq = ++seq_;
    for (auto& [key, v] : t.writes) {
      Chain& c = chain_for(key);
      VersionObject* p = v->prev;  // resolved during evaluation
      ++stats.version_accesses;
      p->sstamp = pi;
      ++stats.version_accesses;
      v->crepi = pi;
      v->creator_sigma = t.sigma;
      v->psstamp = p->psstamp;
      v->reader_sigma_hwm = p->reader_sigma_hwm;
      v->commit_seq = install_seq;
      c.versions.push_back(std::move(v));
    }
    t.writes.clear();
    if (!bypassing) {
      for (VersionObject* u : t.reads) {
        ++stats.version_accesses;
        u->psstamp = max(u->psstamp, pi);
        u->reader_sigma_hwm = max(u->reader_sigma_hwm, t.sigma);
      }
    }
    // A bypassed read-only transaction read base versions only; it cannot sit
    // on any cycle, so registering its pi would only inflate later xi values.

    last_stats_ = stats;
    log("commit t" + std::to_string(id) + " -> committed pi=" + pi.str() +
        (bypassing ? " (bypass)" : ""));
    return Committed{};
  }

  void log(std::string line) { log_.push_back(std::move(line)); }

  EngineConfig cfg_;
  std::map<TxnId, TxnObject> txns_;
  std::map<std::string, Chain> chains_;
  std::set<TxnId> restarted_;
  TxnId next_txn_id_ = 1;
  std::int64_t next_rank_ = 1;
  std::size_t seq_ = 0;
  CommitStats last_stats_;
  std::vector<std::string> log_;
};

}  // namespace essn
