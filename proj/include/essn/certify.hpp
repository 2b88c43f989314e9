#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "essn/history.hpp"
#include "essn/kto.hpp"
#include "essn/mvsg.hpp"

namespace essn {

enum class Protocol { SSI, SSN, ESSN };

inline const char* to_string(Protocol p) {
  switch (p) {
    case Protocol::SSI: return "ssi";
    case Protocol::SSN: return "ssn";
    case Protocol::ESSN: return "essn";
  }
  return "?";
}

enum class Verdict { Commit, Abort };

enum class CertifyErrorCode { ProtocolPrecondition, NotSiHistory };

class CertifyError : public std::runtime_error {
 public:
  CertifyError(CertifyErrorCode code, std::string msg)
      : std::runtime_error(std::move(msg)), code_(code) {}
  CertifyErrorCode code() const { return code_; }

 private:
  CertifyErrorCode code_;
};

/// Per-transaction certification outcome. pi is the minimum sigma over the
/// back-edge closure (seeded with the transaction's own sigma); eta the max
/// sigma over single-hop forward predecessors; xi the max of their pi values.
/// On abort, the witness pair names the back edge starting a pi-minimizing
/// chain and the forward edge attaining the bound that fired.
struct CertResult {
  TxnId txn = 0;
  Sigma sigma;
  Sigma pi;
  Sigma eta;
  Sigma xi;
  Verdict verdict = Verdict::Commit;
  TxnId pi_argmin = 0;                 // txn whose sigma equals pi
  std::optional<TxnId> eta_from;
  std::optional<TxnId> xi_from;
  std::optional<Edge> back_witness;
  std::optional<Edge> fwd_witness;
};

using CertResults = std::map<TxnId, CertResult>;

namespace detail {

struct PiEntry {
  Sigma pi;
  TxnId argmin = 0;
  std::optional<Edge> first_back;  // first edge of a minimizing back chain
};

/// Fixpoint of pi over back-edges. Back-edges strictly decrease sigma, so a
/// single pass in ascending sigma order suffices.
inline std::map<TxnId, PiEntry> pi_fixpoint(const Mvsg& g) {
  std::vector<TxnId> order;
  for (const auto& n : g.nodes()) order.push_back(n.txn);
  std::sort(order.begin(), order.end(),
            [&](TxnId a, TxnId b) { return g.sigma(a) < g.sigma(b); });

  std::map<TxnId, std::vector<const Edge*>> back_out;
  for (const Edge& e : g.edges())
    if (e.label == EdgeLabel::back) back_out[e.src].push_back(&e);

  std::map<TxnId, PiEntry> pi;
  for (TxnId t : order) {
    PiEntry entry{g.sigma(t), t, std::nullopt};
    auto it = back_out.find(t);
    if (it != back_out.end()) {
      for (const Edge* e : it->second) {
        const PiEntry& succ = pi.at(e->dst);
        if (succ.pi < entry.pi) {
          entry.pi = succ.pi;
          entry.argmin = succ.argmin;
          entry.first_back = *e;
        }
      }
    }
    pi[t] = entry;
  }
  return pi;
}

}  // namespace detail

inline Sigma compute_pi(const Mvsg& g, TxnId t) {
  return detail::pi_fixpoint(g).at(t).pi;
}

inline Sigma compute_eta(const Mvsg& g, TxnId t) {
  Sigma eta = Sigma::neg_inf();
  for (const Edge& e : g.edges())
    if (e.dst == t && e.label == EdgeLabel::forward)
      eta = max(eta, g.sigma(e.src));
  return eta;
}

inline Sigma compute_xi(const Mvsg& g, TxnId t) {
  auto pi = detail::pi_fixpoint(g);
  Sigma xi = Sigma::neg_inf();
  for (const Edge& e : g.edges())
    if (e.dst == t && e.label == EdgeLabel::forward)
      xi = max(xi, pi.at(e.src).pi);
  return xi;
}

/// SI producibility: reads observe the latest version committed before the
/// reader's begin (or the reader's own write), and no two committed writers
/// of the same key are concurrent.
inline bool is_si_history(const MVSchedule& schedule) {
  // Snapshot reads.
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const Event& e = schedule[i];
    if (e.kind != EventKind::Read || !schedule.commits(e.txn)) continue;
    if (*e.version == e.txn) continue;
    std::size_t reader_begin = schedule.begin_pos(e.txn);
    TxnId expect = kInitialTxn;
    std::size_t best = 0;
    for (std::size_t j = 0; j < schedule.size(); ++j) {
      const Event& w = schedule[j];
      if (w.kind != EventKind::Write || w.key != e.key ||
          !schedule.commits(w.txn))
        continue;
      std::size_t cpos = schedule.terminal_pos(w.txn);
      if (cpos < reader_begin && cpos >= best) {
        best = cpos + 1;
        expect = w.txn;
      }
    }
    if (*e.version != expect) return false;
  }
  // First-committer-wins: no concurrent committed writers per key.
  std::map<std::string, std::vector<TxnId>> writers;
  for (const Event& e : schedule.events())
    if (e.kind == EventKind::Write && schedule.commits(e.txn))
      writers[e.key].push_back(e.txn);
  for (auto& [key, ws] : writers) {
    for (std::size_t i = 0; i < ws.size(); ++i)
      for (std::size_t j = i + 1; j < ws.size(); ++j) {
        if (ws[i] == ws[j]) continue;
        std::size_t bi = schedule.begin_pos(ws[i]);
        std::size_t ci = schedule.terminal_pos(ws[i]);
        std::size_t bj = schedule.begin_pos(ws[j]);
        std::size_t cj = schedule.terminal_pos(ws[j]);
        if (bi < cj && bj < ci) return false;
      }
  }
  return true;
}

namespace detail {

inline bool ssi_pivot(const Mvsg& g, TxnId t,
                      std::optional<Edge>* in_rw = nullptr,
                      std::optional<Edge>* out_rw = nullptr) {
  // Dangerous structure t1 ->rw t ->rw t3 where t3 commits before both. In a
  // two-transaction cycle the endpoints coincide and only t3-before-t is
  // meaningful.
  for (const Edge& out : g.edges()) {
    if (out.src != t || out.kind != DepKind::rw) continue;
    if (out.dst == kInitialTxn) continue;
    std::size_t c3 = g.node(out.dst).commit_pos;
    if (c3 >= g.node(t).commit_pos) continue;
    for (const Edge& in : g.edges()) {
      if (in.dst != t || in.kind != DepKind::rw) continue;
      if (in.src == kInitialTxn) continue;
      if (in.src == out.dst || c3 < g.node(in.src).commit_pos) {
        if (in_rw) *in_rw = in;
        if (out_rw) *out_rw = out;
        return true;
      }
    }
  }
  return false;
}

inline CertResult evaluate_node(const Mvsg& g,
                                const std::map<TxnId, PiEntry>& pi,
                                TxnId t, Protocol protocol) {
  CertResult r;
  r.txn = t;
  r.sigma = g.sigma(t);
  const PiEntry& entry = pi.at(t);
  r.pi = entry.pi;
  r.pi_argmin = entry.argmin;
  r.back_witness = entry.first_back;
  r.eta = Sigma::neg_inf();
  r.xi = Sigma::neg_inf();
  std::optional<Edge> eta_edge, xi_edge;
  for (const Edge& e : g.edges()) {
    if (e.dst != t || e.label != EdgeLabel::forward) continue;
    Sigma src_sigma = g.sigma(e.src);
    if (!eta_edge || src_sigma > r.eta) {
      r.eta = src_sigma;
      eta_edge = e;
      r.eta_from = e.src;
    }
    Sigma src_pi = pi.at(e.src).pi;
    if (!xi_edge || src_pi > r.xi) {
      r.xi = src_pi;
      xi_edge = e;
      r.xi_from = e.src;
    }
  }
  switch (protocol) {
    case Protocol::SSN:
      r.verdict = r.pi <= r.eta ? Verdict::Abort : Verdict::Commit;
      if (r.verdict == Verdict::Abort) r.fwd_witness = eta_edge;
      break;
    case Protocol::ESSN:
      r.verdict = r.pi <= r.xi ? Verdict::Abort : Verdict::Commit;
      if (r.verdict == Verdict::Abort) r.fwd_witness = xi_edge;
      break;
    case Protocol::SSI: {
      std::optional<Edge> in_rw, out_rw;
      if (ssi_pivot(g, t, &in_rw, &out_rw)) {
        r.verdict = Verdict::Abort;
        r.back_witness = out_rw;
        r.fwd_witness = in_rw;
      }
      break;
    }
  }
  return r;
}

}  // namespace detail

/// Static abort targets: every transaction for which the protocol's exclusion
/// condition holds on the graph as given. This is the criterion itself; the
/// commit-order simulation with excision lives in certify_sequential.
///
/// SSI is only meaningful over SI histories; callers assert that via
/// si_history (see is_si_history).
inline CertResults certify(const Mvsg& g, Protocol protocol,
                           bool si_history = false) {
  if (protocol == Protocol::SSI && !si_history)
    throw CertifyError(CertifyErrorCode::ProtocolPrecondition,
                       "ssi requires an SI-generated history");
  auto pi = detail::pi_fixpoint(g);
  CertResults out;
  for (const auto& n : g.nodes()) {
    if (n.txn == kInitialTxn) continue;
    out[n.txn] = detail::evaluate_node(g, pi, n.txn, protocol);
  }
  return out;
}

inline std::set<TxnId> abort_set(const CertResults& results) {
  std::set<TxnId> out;
  for (auto& [t, r] : results)
    if (r.verdict == Verdict::Abort) out.insert(t);
  return out;
}

/// Commit-order evaluation with excision: candidates are processed in sigma
/// order; an aborted transaction installs nothing, so its versions leave the
/// version order and reads of them rebind to the surviving chain predecessor
/// before later transactions are evaluated. Matches the online engine under
/// the stall rule.
inline CertResults certify_sequential(const MVSchedule& schedule,
                                      const Kto& kto, Protocol protocol,
                                      KtoFlavor vo_alignment,
                                      bool si_history = false,
                                      MVSchedule* effective = nullptr) {
  if (protocol == Protocol::SSI && !si_history)
    throw CertifyError(CertifyErrorCode::ProtocolPrecondition,
                       "ssi requires an SI-generated history");

  std::vector<TxnId> candidates;
  for (TxnId t : schedule.txns())
    if (schedule.commits(t)) candidates.push_back(t);
  std::sort(candidates.begin(), candidates.end(),
            [&](TxnId a, TxnId b) { return kto.sigma(a) < kto.sigma(b); });

  std::vector<Event> events = schedule.events();
  CertResults out;
  for (TxnId t : candidates) {
    MVSchedule working(events);
    VersionOrder vo = build_version_order(working, vo_alignment);
    Mvsg g = build_mvsg(working, vo, kto);
    auto pi = detail::pi_fixpoint(g);
    CertResult r = detail::evaluate_node(g, pi, t, protocol);
    out[t] = r;
    if (r.verdict != Verdict::Abort) continue;

    // Excise: rebind reads of t's versions to the nearest surviving chain
    // predecessor that was physically written before the read, then flip the
    // terminal so t's versions vanish from subsequent version orders.
    std::map<std::string, std::size_t> write_pos;
    for (std::size_t i = 0; i < events.size(); ++i)
      if (events[i].kind == EventKind::Write) write_pos[events[i].key + "#" +
          std::to_string(events[i].txn)] = i;
    for (std::size_t i = 0; i < events.size(); ++i) {
      Event& e = events[i];
      if (e.kind != EventKind::Read || !e.version || *e.version != t ||
          e.txn == t)
        continue;
      const auto& chain = vo.chain(e.key);
      auto pos = vo.position(e.key, t);
      TxnId rebound = kInitialTxn;
      if (pos) {
        for (std::size_t j = *pos; j-- > 0;) {
          TxnId cand = chain[j];
          if (cand == kInitialTxn) break;
          auto wp = write_pos.find(e.key + "#" + std::to_string(cand));
          if (wp != write_pos.end() && wp->second < i) {
            rebound = cand;
            break;
          }
        }
      }
      e.version = rebound;
    }
    for (Event& e : events)
      if (e.kind == EventKind::Commit && e.txn == t) e.kind = EventKind::Abort;
  }
  if (effective) *effective = MVSchedule(events);
  return out;
}

/// Per-transaction verdict under the dual-KTO rule for SI histories: commit
/// iff the ESSN exclusion admits the transaction under at least one of the
/// begin- and commit-ordered KTOs.
inline std::map<TxnId, Verdict> dual_kto_certify(const MVSchedule& schedule) {
  if (!is_si_history(schedule))
    throw CertifyError(CertifyErrorCode::NotSiHistory,
                       "dual-KTO certification requires an SI history");
  auto run = [&](KtoFlavor flavor) {
    Kto kto = make_kto(schedule, flavor);
    return certify_sequential(schedule, kto, Protocol::ESSN, flavor);
  };
  CertResults by_begin = run(KtoFlavor::Begin);
  CertResults by_commit = run(KtoFlavor::Commit);
  std::map<TxnId, Verdict> out;
  for (auto& [t, r] : by_commit) {
    bool commit = r.verdict == Verdict::Commit ||
                  by_begin.at(t).verdict == Verdict::Commit;
    out[t] = commit ? Verdict::Commit : Verdict::Abort;
  }
  return out;
}

/// Combined per-transaction summary line:
///   "t<i> <pi> <eta> <xi> ssn=<C|A> essn=<C|A> [ssi=<C|A>]"
/// sorted by sigma.
inline std::string format_verdict_report(const Mvsg& g,
                                         bool with_ssi = false,
                                         bool si_history = false) {
  CertResults ssn = certify(g, Protocol::SSN);
  CertResults essn = certify(g, Protocol::ESSN);
  CertResults ssi;
  if (with_ssi) ssi = certify(g, Protocol::SSI, si_history);

  std::vector<TxnId> order;
  for (auto& [t, r] : ssn) order.push_back(t);
  std::sort(order.begin(), order.end(),
            [&](TxnId a, TxnId b) { return g.sigma(a) < g.sigma(b); });

  std::string out;
  for (TxnId t : order) {
    const CertResult& r = ssn.at(t);
    out += "t" + std::to_string(t) + " " + r.pi.str() + " " + r.eta.str() +
           " " + r.xi.str() +
           " ssn=" + (r.verdict == Verdict::Abort ? "A" : "C") +
           " essn=" + (essn.at(t).verdict == Verdict::Abort ? "A" : "C");
    if (with_ssi)
      out += std::string(" ssi=") +
             (ssi.at(t).verdict == Verdict::Abort ? "A" : "C");
    out += "\n";
  }
  return out;
}

}  // namespace essn
