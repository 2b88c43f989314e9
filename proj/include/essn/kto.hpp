#pragma once

#include <map>
#include <string>

#include "essn/history.hpp"
#include "essn/sigma.hpp"

namespace essn {

enum class KtoFlavor { Begin, Commit, External };

inline const char* to_string(KtoFlavor f) {
  switch (f) {
    case KtoFlavor::Begin: return "begin";
    case KtoFlavor::Commit: return "commit";
    case KtoFlavor::External: return "external";
  }
  return "?";
}

/// A known total order over transactions, realized as an injective scalar map
/// sigma. t0 always maps to -inf.
class Kto {
 public:
  Kto() = default;
  Kto(std::map<TxnId, Sigma> sigma, KtoFlavor flavor)
      : sigma_(std::move(sigma)), flavor_(flavor) {}

  static Kto external(const std::map<TxnId, std::int64_t>& ranks) {
    std::map<TxnId, Sigma> sigma;
    for (auto& [t, rank] : ranks) sigma[t] = Sigma::of(rank, t);
    return Kto(std::move(sigma), KtoFlavor::External);
  }

  KtoFlavor flavor() const { return flavor_; }

  bool contains(TxnId t) const {
    return t == kInitialTxn || sigma_.count(t) != 0;
  }

  Sigma sigma(TxnId t) const {
    if (t == kInitialTxn) return Sigma::neg_inf();
    return sigma_.at(t);
  }

  /// ti precedes tj in the order.
  bool precedes(TxnId ti, TxnId tj) const { return sigma(ti) < sigma(tj); }

  const std::map<TxnId, Sigma>& entries() const { return sigma_; }

 private:
  std::map<TxnId, Sigma> sigma_;
  KtoFlavor flavor_ = KtoFlavor::Commit;
};

/// Assign sigma by the event order of Begin or Commit events. Commit flavor
/// covers committed transactions only (aborted ones are excluded from the
/// order) and rejects in-flight transactions.
inline Kto make_kto(const EventSequence& schedule, KtoFlavor flavor) {
  std::map<TxnId, Sigma> sigma;
  if (flavor == KtoFlavor::Commit) {
    for (TxnId t : schedule.txns()) {
      if (schedule.in_flight(t))
        detail::fail(HistoryErrorCode::MissingTerminal,
                     "t" + std::to_string(t) +
                         " has no terminal; commit order undefined");
    }
    std::int64_t rank = 0;
    for (TxnId t : schedule.committed_in_commit_order())
      sigma[t] = Sigma::of(++rank, t);
  } else {
    std::int64_t rank = 0;
    for (TxnId t : schedule.txns_in_begin_order())
      sigma[t] = Sigma::of(++rank, t);
  }
  return Kto(std::move(sigma), flavor);
}

}  // namespace essn
