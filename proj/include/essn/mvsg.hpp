#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "essn/history.hpp"
#include "essn/kto.hpp"

namespace essn {

/// Per-key total order over versions, writer ids listed base-first.
/// Versions by aborted or in-flight writers never appear.
class VersionOrder {
 public:
  VersionOrder() = default;
  explicit VersionOrder(std::map<std::string, std::vector<TxnId>> chains)
      : chains_(std::move(chains)) {}

  const std::vector<TxnId>& chain(const std::string& key) const {
    static const std::vector<TxnId> base{kInitialTxn};
    auto it = chains_.find(key);
    return it == chains_.end() ? base : it->second;
  }

  const std::map<std::string, std::vector<TxnId>>& chains() const {
    return chains_;
  }

  /// Index of a version in its key's chain.
  std::optional<std::size_t> position(const std::string& key,
                                      TxnId writer) const {
    const auto& c = chain(key);
    for (std::size_t i = 0; i < c.size(); ++i)
      if (c[i] == writer) return i;
    return std::nullopt;
  }

 private:
  std::map<std::string, std::vector<TxnId>> chains_;
};

/// Version lists ordered by the writers' begin or commit event order, base
/// version first. Only committed writers contribute versions.
inline VersionOrder build_version_order(const MVSchedule& schedule,
                                        KtoFlavor alignment) {
  std::map<std::string, std::vector<std::pair<std::size_t, TxnId>>> tmp;
  for (const Event& e : schedule.events()) {
    if (e.kind != EventKind::Write || !schedule.commits(e.txn)) continue;
    std::size_t pos = alignment == KtoFlavor::Commit
                          ? schedule.terminal_pos(e.txn)
                          : schedule.begin_pos(e.txn);
    tmp[e.key].emplace_back(pos, e.txn);
  }
  std::map<std::string, std::vector<TxnId>> chains;
  for (const std::string& key : schedule.keys()) {
    auto& out = chains[key];
    out.push_back(kInitialTxn);
    auto it = tmp.find(key);
    if (it == tmp.end()) continue;
    std::sort(it->second.begin(), it->second.end());
    for (auto& [pos, t] : it->second) out.push_back(t);
  }
  return VersionOrder(std::move(chains));
}

enum class DepKind { wr, ww, rw };
enum class EdgeLabel { forward, back };

inline const char* to_string(DepKind k) {
  switch (k) {
    case DepKind::wr: return "wr";
    case DepKind::ww: return "ww";
    case DepKind::rw: return "rw";
  }
  return "?";
}

struct Edge {
  TxnId src = 0;
  TxnId dst = 0;
  DepKind kind = DepKind::wr;
  std::string key;
  EdgeLabel label = EdgeLabel::forward;

  bool operator==(const Edge&) const = default;
};

/// Transaction-node dependency graph labeled against a KTO. Nodes carry the
/// begin/commit event positions needed by the SSI dangerous-structure test.
class Mvsg {
 public:
  struct Node {
    TxnId txn = 0;
    Sigma sigma;
    std::size_t begin_pos = 0;
    std::size_t commit_pos = 0;
  };

  Mvsg() = default;
  Mvsg(std::vector<Node> nodes, std::vector<Edge> edges, Kto kto)
      : nodes_(std::move(nodes)), edges_(std::move(edges)),
        kto_(std::move(kto)) {
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      node_index_[nodes_[i].txn] = i;
  }

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Kto& kto() const { return kto_; }

  bool has_node(TxnId t) const { return node_index_.count(t) != 0; }
  const Node& node(TxnId t) const { return nodes_[node_index_.at(t)]; }
  Sigma sigma(TxnId t) const { return kto_.sigma(t); }

  std::vector<Edge> edges_from(TxnId t) const {
    std::vector<Edge> out;
    for (const Edge& e : edges_)
      if (e.src == t) out.push_back(e);
    return out;
  }
  std::vector<Edge> edges_to(TxnId t) const {
    std::vector<Edge> out;
    for (const Edge& e : edges_)
      if (e.dst == t) out.push_back(e);
    return out;
  }

  /// One edge per line "src kind(label) dst key", deterministically sorted.
  std::string dump() const {
    std::vector<Edge> sorted = edges_;
    std::sort(sorted.begin(), sorted.end(), [](const Edge& a, const Edge& b) {
      return std::tie(a.src, a.dst, a.kind, a.key) <
             std::tie(b.src, b.dst, b.kind, b.key);
    });
    std::string out;
    for (const Edge& e : sorted) {
      out += "t" + std::to_string(e.src) + " " + to_string(e.kind) + "(" +
             (e.label == EdgeLabel::forward ? "f" : "b") + ") t" +
             std::to_string(e.dst) + " " + e.key + "\n";
    }
    return out;
  }

 private:
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  Kto kto_;
  std::map<TxnId, std::size_t> node_index_;
};

/// Full (non-reduced) dependency graph over the committed transactions of a
/// schedule:
///   wr: version writer -> reader, for every read;
///   ww: ti -> tj for every pair xi before xj in the version order;
///   rw: reader of xj -> every writer of a later version of the same key.
/// Self-edges are skipped; reads of a transaction's own write contribute no
/// edges. Labels: forward iff sigma(src) < sigma(dst).
inline Mvsg build_mvsg(const MVSchedule& schedule, const VersionOrder& vo,
                       const Kto& kto) {
  std::set<TxnId> committed;
  for (TxnId t : schedule.txns())
    if (schedule.commits(t)) committed.insert(t);

  std::vector<Mvsg::Node> nodes;
  nodes.push_back({kInitialTxn, Sigma::neg_inf(), 0, 0});
  for (TxnId t : committed)
    nodes.push_back({t, kto.sigma(t), schedule.begin_pos(t),
                     schedule.terminal_pos(t)});

  auto label = [&](TxnId src, TxnId dst) {
    return kto.sigma(src) < kto.sigma(dst) ? EdgeLabel::forward
                                           : EdgeLabel::back;
  };

  std::set<std::tuple<TxnId, TxnId, DepKind, std::string>> seen;
  std::vector<Edge> edges;
  auto add = [&](TxnId src, TxnId dst, DepKind kind, const std::string& key) {
    if (src == dst) return;
    if (!seen.insert({src, dst, kind, key}).second) return;
    edges.push_back({src, dst, kind, key, label(src, dst)});
  };

  // ww over every ordered pair on each chain.
  for (auto& [key, chain] : vo.chains()) {
    for (std::size_t i = 0; i < chain.size(); ++i)
      for (std::size_t j = i + 1; j < chain.size(); ++j)
        add(chain[i], chain[j], DepKind::ww, key);
  }

  // wr and rw per read.
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const Event& e = schedule[i];
    if (e.kind != EventKind::Read || !committed.count(e.txn)) continue;
    TxnId writer = *e.version;
    if (writer == e.txn) continue;  // own-read: excluded from the read set
    auto pos = vo.position(e.key, writer);
    if (!pos)
      detail::fail(HistoryErrorCode::UnknownVersion,
                   "read version " + e.key + std::to_string(writer) +
                       " absent from the version order");
    add(writer, e.txn, DepKind::wr, e.key);
    const auto& chain = vo.chain(e.key);
    for (std::size_t j = *pos + 1; j < chain.size(); ++j)
      add(e.txn, chain[j], DepKind::rw, e.key);
  }

  return Mvsg(std::move(nodes), std::move(edges), kto);
}

/// Direct-dependency reduction: keep all wr edges, ww only between adjacent
/// writers, and a single rw from each reader to the next writer of the read
/// version. Reachability (and thus cycle existence) is preserved by the ww
/// chain.
inline Mvsg adjacent_reduce(const Mvsg& g, const VersionOrder& vo) {
  std::map<std::string, std::map<TxnId, std::size_t>> pos;
  for (auto& [key, chain] : vo.chains())
    for (std::size_t i = 0; i < chain.size(); ++i) pos[key][chain[i]] = i;

  std::vector<Edge> kept;
  for (const Edge& e : g.edges()) {
    switch (e.kind) {
      case DepKind::wr:
        kept.push_back(e);
        break;
      case DepKind::ww: {
        auto& p = pos.at(e.key);
        if (p.at(e.dst) == p.at(e.src) + 1) kept.push_back(e);
        break;
      }
      case DepKind::rw: {
        // Each read of x_j keeps a single rw edge to the writer of x_{j+1}:
        // the target's chain predecessor must be a version this reader
        // actually read (witnessed by its wr edge, or by t0 for x_0).
        auto& p = pos.at(e.key);
        std::size_t dst_pos = p.at(e.dst);
        if (dst_pos == 0) break;  // base version is never an rw target
        TxnId read_writer = vo.chain(e.key)[dst_pos - 1];
        for (const Edge& other : g.edges()) {
          if (other.kind == DepKind::wr && other.key == e.key &&
              other.src == read_writer && other.dst == e.src) {
            kept.push_back(e);
            break;
          }
        }
        break;
      }
    }
  }
  return Mvsg(g.nodes(), std::move(kept), g.kto());
}

/// Shortest cycle as a node list in cycle order, rotated so the smallest id
/// leads; ties broken toward smaller node ids. Empty optional iff acyclic.
inline std::optional<std::vector<TxnId>> has_cycle(const Mvsg& g) {
  std::vector<TxnId> ids;
  for (const auto& n : g.nodes()) ids.push_back(n.txn);
  std::sort(ids.begin(), ids.end());
  std::map<TxnId, std::vector<TxnId>> adj;
  for (const Edge& e : g.edges()) adj[e.src].push_back(e.dst);
  for (auto& [t, next] : adj) {
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end()), next.end());
  }

  std::optional<std::vector<TxnId>> best;
  for (TxnId start : ids) {
    // BFS for the shortest path start -> ... -> start.
    std::map<TxnId, TxnId> parent;
    std::vector<TxnId> frontier{start};
    std::set<TxnId> visited{start};
    std::optional<TxnId> closer;
    while (!frontier.empty() && !closer) {
      std::vector<TxnId> next_frontier;
      for (TxnId u : frontier) {
        auto it = adj.find(u);
        if (it == adj.end()) continue;
        for (TxnId v : it->second) {
          if (v == start) {
            closer = u;
            break;
          }
          if (visited.insert(v).second) {
            parent[v] = u;
            next_frontier.push_back(v);
          }
        }
        if (closer) break;
      }
      frontier = std::move(next_frontier);
    }
    if (!closer) continue;
    std::vector<TxnId> cycle;
    for (TxnId u = *closer; u != start; u = parent.at(u)) cycle.push_back(u);
    cycle.push_back(start);
    std::reverse(cycle.begin(), cycle.end());  // starts at `start`
    auto smallest = std::min_element(cycle.begin(), cycle.end());
    std::rotate(cycle.begin(), smallest, cycle.end());
    if (!best || cycle.size() < best->size() ||
        (cycle.size() == best->size() && cycle < *best))
      best = std::move(cycle);
  }
  return best;
}

struct AlignmentViolation {
  enum class Kind { Vf, Vo } kind;
  std::string key;
  TxnId first = 0;   // Vf: version writer;  Vo: earlier-in-VO writer
  TxnId second = 0;  // Vf: reader;          Vo: later-in-VO writer

  std::string str() const {
    if (kind == Kind::Vf)
      return "vf: wr t" + std::to_string(first) + " -> t" +
             std::to_string(second) + " on " + key +
             " runs against the order";
    return "vo: " + key + std::to_string(first) + " before " + key +
           std::to_string(second) + " runs against the order";
  }
};

struct AlignmentReport {
  bool vf_aligned = true;
  bool vo_aligned = true;
  std::vector<AlignmentViolation> violations;
};

/// VF aligned: every read's version writer precedes the reader in sigma.
/// VO aligned: per-key version order matches the writers' sigma order.
inline AlignmentReport check_alignment(const MVSchedule& schedule,
                                       const VersionOrder& vo,
                                       const Kto& kto) {
  AlignmentReport report;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const Event& e = schedule[i];
    if (e.kind != EventKind::Read || !schedule.commits(e.txn)) continue;
    TxnId writer = *e.version;
    if (writer == e.txn) continue;
    if (!(kto.sigma(writer) < kto.sigma(e.txn))) {
      report.vf_aligned = false;
      report.violations.push_back(
          {AlignmentViolation::Kind::Vf, e.key, writer, e.txn});
    }
  }
  for (auto& [key, chain] : vo.chains()) {
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
      if (!(kto.sigma(chain[i]) < kto.sigma(chain[i + 1]))) {
        report.vo_aligned = false;
        report.violations.push_back(
            {AlignmentViolation::Kind::Vo, key, chain[i], chain[i + 1]});
      }
    }
  }
  return report;
}

}  // namespace essn
