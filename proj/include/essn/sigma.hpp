#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace essn {

/// Transaction identifier. Id 0 is reserved for the initial transaction t0,
/// which implicitly writes the base version of every key.
using TxnId = std::uint32_t;

inline constexpr TxnId kInitialTxn = 0;

/// A point in the totally ordered KTO domain.
///
/// Finite values are (rank, txn) pairs compared lexicographically, so ranks
/// produced from distinct event positions stay injective even if an external
/// ordering assigns duplicate ranks. -inf/+inf are explicit sentinels:
/// sigma(t0) = -inf, and +inf seeds the engine's pi accumulator.
class Sigma {
 public:
  constexpr Sigma() = default;

  static constexpr Sigma neg_inf() { return Sigma(Kind::NegInf, 0, 0); }
  static constexpr Sigma pos_inf() { return Sigma(Kind::PosInf, 0, 0); }
  static constexpr Sigma of(std::int64_t rank, TxnId txn = 0) {
    return Sigma(Kind::Finite, rank, txn);
  }

  constexpr bool is_neg_inf() const { return kind_ == Kind::NegInf; }
  constexpr bool is_pos_inf() const { return kind_ == Kind::PosInf; }
  constexpr bool is_finite() const { return kind_ == Kind::Finite; }

  constexpr std::int64_t rank() const { return rank_; }
  constexpr TxnId txn() const { return txn_; }

  friend constexpr auto operator<=>(const Sigma&, const Sigma&) = default;

  std::string str() const {
    if (kind_ == Kind::NegInf) return "-inf";
    if (kind_ == Kind::PosInf) return "+inf";
    return std::to_string(rank_);
  }

 private:
  enum class Kind : std::uint8_t { NegInf = 0, Finite = 1, PosInf = 2 };

  constexpr Sigma(Kind kind, std::int64_t rank, TxnId txn)
      : kind_(kind), rank_(rank), txn_(txn) {}

  Kind kind_ = Kind::Finite;
  std::int64_t rank_ = 0;
  TxnId txn_ = 0;
};

inline Sigma min(Sigma a, Sigma b) { return a < b ? a : b; }
inline Sigma max(Sigma a, Sigma b) { return a < b ? b : a; }

}  // namespace essn
