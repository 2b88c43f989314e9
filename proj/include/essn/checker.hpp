#pragma once

#include <algorithm>
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

namespace essn {

enum class CheckerErrorCode { AlignmentViolation, UnsupportedProtocol };

class CheckerError : public std::runtime_error {
 public:
  CheckerError(CheckerErrorCode code, std::string msg)
      : std::runtime_error(std::move(msg)), code_(code) {}
  CheckerErrorCode code() const { return code_; }

 private:
  CheckerErrorCode code_;
};

/// Commit-time SSN/ESSN evaluation over per-key high-water marks instead of
/// per-version previous-edge state. Commits are deferred until every
/// earlier-in-KTO transaction has terminated, so marks accumulate in sigma
/// order and agree with the previous-edge-only design. Aborted transactions
/// install nothing; reads of their versions rebind to the surviving chain
/// predecessor.
inline CertResults run_checker(const MVSchedule& schedule, const Kto& kto,
                               Protocol protocol) {
  if (protocol == Protocol::SSI)
    throw CheckerError(CheckerErrorCode::UnsupportedProtocol,
                       "the high-water-mark checker evaluates ssn/essn only");
  if (kto.flavor() == KtoFlavor::External)
    throw CheckerError(CheckerErrorCode::UnsupportedProtocol,
                       "the checker needs a begin- or commit-ordered kto to "
                       "derive an aligned version order");
  KtoFlavor alignment = kto.flavor();
  VersionOrder vo = build_version_order(schedule, alignment);
  AlignmentReport alignment_report = check_alignment(schedule, vo, kto);
  if (!alignment_report.vf_aligned || !alignment_report.vo_aligned) {
    std::string what = "schedule is not aligned with the declared order:";
    for (const auto& v : alignment_report.violations)
      what += " [" + v.str() + "]";
    throw CheckerError(CheckerErrorCode::AlignmentViolation, what);
  }

  // Per-committed-writer pi, per-key reader marks, and install bookkeeping.
  struct KeyMarks {
    Sigma reader_pi_hwm = Sigma::neg_inf();
    Sigma reader_sigma_hwm = Sigma::neg_inf();
    std::vector<TxnId> installed;  // committed writers, install order
  };
  std::map<std::string, KeyMarks> marks;
  for (const std::string& key : schedule.keys()) marks[key];
  std::map<TxnId, Sigma> committed_pi;
  std::set<TxnId> checker_aborted;

  std::map<std::string, std::map<TxnId, std::size_t>> write_pos;
  for (std::size_t i = 0; i < schedule.size(); ++i)
    if (schedule[i].kind == EventKind::Write)
      write_pos[schedule[i].key][schedule[i].txn] = i;

  // Reads/writes per transaction, in trace order.
  struct ReadRec {
    std::string key;
    TxnId version;
    std::size_t pos;
  };
  std::map<TxnId, std::vector<ReadRec>> reads;
  std::map<TxnId, std::vector<std::string>> writes;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const Event& e = schedule[i];
    if (!schedule.commits(e.txn)) continue;  // expunged
    if (e.kind == EventKind::Read && *e.version != e.txn)
      reads[e.txn].push_back({e.key, *e.version, i});
    else if (e.kind == EventKind::Write)
      writes[e.txn].push_back(e.key);
  }

  // Effective read target once aborts are known: nearest surviving chain
  // predecessor whose write physically precedes the read.
  auto effective_version = [&](const ReadRec& r) -> TxnId {
    TxnId v = r.version;
    if (v == kInitialTxn || !checker_aborted.count(v)) return v;
    auto pos = vo.position(r.key, v);
    if (!pos) return kInitialTxn;
    const auto& chain = vo.chain(r.key);
    for (std::size_t j = *pos; j-- > 0;) {
      TxnId cand = chain[j];
      if (cand == kInitialTxn) return kInitialTxn;
      if (checker_aborted.count(cand)) continue;
      auto wp = write_pos[r.key].find(cand);
      if (wp != write_pos[r.key].end() && wp->second < r.pos) return cand;
    }
    return kInitialTxn;
  };

  // Metadata of an installed version: creator's pi / sigma, and the pi of the
  // next committed writer on the chain (if any).
  auto version_crepi = [&](TxnId writer) {
    return writer == kInitialTxn ? Sigma::neg_inf() : committed_pi.at(writer);
  };
  auto version_creator_sigma = [&](TxnId writer) {
    return writer == kInitialTxn ? Sigma::neg_inf() : kto.sigma(writer);
  };
  auto next_writer_pi = [&](const std::string& key, TxnId writer) {
    const auto& installed = marks.at(key).installed;
    bool passed = writer == kInitialTxn;  // base precedes everything
    for (TxnId w : installed) {
      if (passed) return committed_pi.at(w);
      if (w == writer) passed = true;
    }
    return Sigma::pos_inf();
  };

  CertResults out;
  auto evaluate = [&](TxnId t) {
    CertResult r;
    r.txn = t;
    r.sigma = kto.sigma(t);
    r.pi = r.sigma;
    r.eta = Sigma::neg_inf();
    r.xi = Sigma::neg_inf();
    for (const ReadRec& rec : reads[t]) {
      TxnId v = effective_version(rec);
      r.pi = min(r.pi, next_writer_pi(rec.key, v));
      r.xi = max(r.xi, version_crepi(v));
      r.eta = max(r.eta, version_creator_sigma(v));
    }
    for (const std::string& key : writes[t]) {
      const auto& installed = marks.at(key).installed;
      TxnId prev = installed.empty() ? kInitialTxn : installed.back();
      r.xi = max(r.xi, version_crepi(prev));
      r.eta = max(r.eta, version_creator_sigma(prev));
      r.xi = max(r.xi, marks.at(key).reader_pi_hwm);
      r.eta = max(r.eta, marks.at(key).reader_sigma_hwm);
    }
    Sigma bound = protocol == Protocol::SSN ? r.eta : r.xi;
    r.verdict = r.pi <= bound ? Verdict::Abort : Verdict::Commit;
    if (r.verdict == Verdict::Abort) {
      checker_aborted.insert(t);
    } else {
      committed_pi[t] = r.pi;
      for (const std::string& key : writes[t])
        marks.at(key).installed.push_back(t);
      for (const ReadRec& rec : reads[t]) {
        KeyMarks& m = marks.at(rec.key);
        m.reader_pi_hwm = max(m.reader_pi_hwm, r.pi);
        m.reader_sigma_hwm = max(m.reader_sigma_hwm, r.sigma);
      }
    }
    out[t] = r;
  };

  // Deferral: evaluating in sigma order realizes "wait until dependent
  // transactions have committed" for both KTO flavors.
  std::vector<TxnId> candidates;
  for (TxnId t : schedule.txns())
    if (schedule.commits(t)) candidates.push_back(t);
  std::sort(candidates.begin(), candidates.end(),
            [&](TxnId a, TxnId b) { return kto.sigma(a) < kto.sigma(b); });
  for (TxnId t : candidates) evaluate(t);
  return out;
}

}  // namespace essn
