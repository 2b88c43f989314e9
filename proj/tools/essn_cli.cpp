// Command-line front end: generate workloads, resolve reads, certify
// schedules, replay them through the online engine, sweep the experiment
// grid, and run the TicToc feasibility analyzer.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "essn/certify.hpp"
#include "essn/checker.hpp"
#include "essn/engine.hpp"
#include "essn/experiment.hpp"
#include "essn/generate.hpp"
#include "essn/history.hpp"
#include "essn/kto.hpp"
#include "essn/mvsg.hpp"
#include "essn/replay.hpp"
#include "essn/resolve.hpp"
#include "essn/tictoc.hpp"

namespace {

std::string read_input(const std::string& path) {
  if (path == "-") {
    std::ostringstream buf;
    buf << std::cin.rdbuf();
    return buf.str();
  }
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << text;
}

essn::RfPolicy parse_policy(const std::string& s) {
  if (s == "as-of-read-commit" || s == "as_of_read_commit")
    return essn::RfPolicy::AsOfReadCommit;
  if (s == "nearest-begin" || s == "nearest_begin_kto")
    return essn::RfPolicy::NearestBeginKto;
  if (s == "snapshot-at-begin" || s == "snapshot_at_begin")
    return essn::RfPolicy::SnapshotAtBegin;
  throw CLI::ValidationError("unknown policy '" + s + "'");
}

essn::KtoFlavor parse_kto(const std::string& s) {
  if (s == "begin") return essn::KtoFlavor::Begin;
  if (s == "commit") return essn::KtoFlavor::Commit;
  throw CLI::ValidationError("unknown kto flavor '" + s + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multiversion serializability toolkit (SSN / ESSN / SSI)"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string out_path;
  app.add_option("--out", out_path, "output path ('-' = stdout)")
      ->capture_default_str();

  // generate ---------------------------------------------------------------
  auto* gen = app.add_subcommand("generate", "emit a mixed-workload trace");
  essn::WorkloadParams params;
  std::uint64_t seed = 1;
  double pivot = 0.5, hit = 0.5;
  gen->add_option("--seed", seed);
  gen->add_option("--n-keys", params.n_keys);
  gen->add_option("--read-size", params.read_size);
  gen->add_option("--n-shorts", params.n_shorts);
  gen->add_option("--pivot-prob", pivot);
  gen->add_option("--short-hit-prob", hit);

  // resolve ----------------------------------------------------------------
  auto* res = app.add_subcommand("resolve", "bind reads per an RF policy");
  std::string res_policy = "snapshot-at-begin";
  std::string res_file = "-";
  bool no_stall = false;
  res->add_option("--policy", res_policy, "RF policy");
  res->add_flag("--no-stall", no_stall,
                "optimistic begin-order snapshot (no commit-stall)");
  res->add_option("file", res_file, "trace file ('-' = stdin)");

  // certify ----------------------------------------------------------------
  auto* cert = app.add_subcommand("certify", "verdict report for a schedule");
  std::string cert_kto = "commit";
  std::string cert_protocol = "all";
  std::string cert_file = "-";
  bool cert_sequential = false;
  cert->add_option("--kto", cert_kto, "kto flavor: begin|commit");
  cert->add_option("--protocol", cert_protocol, "ssn|essn|ssi|all");
  cert->add_flag("--sequential", cert_sequential,
                 "commit-order evaluation with excision instead of static "
                 "abort targets");
  cert->add_option("file", cert_file, "schedule file ('-' = stdin)");

  // replay -----------------------------------------------------------------
  auto* rep = app.add_subcommand("replay", "drive a trace through the engine");
  std::string rep_kto = "commit";
  std::string rep_policy = "as-of-read-commit";
  std::string rep_file = "-";
  std::string rep_longs;
  bool rep_shortcut = false, rep_bypass = false;
  rep->add_option("--kto", rep_kto);
  rep->add_option("--policy", rep_policy);
  rep->add_flag("--shortcut", rep_shortcut, "read-time shortcut");
  rep->add_flag("--bypass", rep_bypass, "stall-bypass for safe transactions");
  rep->add_option("--longs", rep_longs,
                  "comma-separated txn ids begun with long priority");
  rep->add_option("file", rep_file, "trace file ('-' = stdin)");

  // experiment ---------------------------------------------------------------
  auto* exp = app.add_subcommand("experiment", "sweep the abort-rate grid");
  essn::WorkloadParams exp_params;
  std::uint64_t exp_seed = 1;
  exp->add_option("--seed", exp_seed);
  exp->add_option("--repeats", exp_params.repeats);
  exp->add_option("--n-keys", exp_params.n_keys);
  exp->add_option("--read-size", exp_params.read_size);
  exp->add_option("--n-shorts", exp_params.n_shorts);
  std::string grid_name = "default";
  exp->add_option("--grid", grid_name, "grid preset (default)");

  // tictoc -------------------------------------------------------------------
  auto* tt = app.add_subcommand("tictoc", "timestamp feasibility analyzer");
  std::string tt_case = "a";
  essn::Timestamp c2 = 2, c3 = 3;
  tt->add_option("--case", tt_case, "war|skew|a|b");
  tt->add_option("--c2", c2, "commit timestamp of t2");
  tt->add_option("--c3", c3, "commit timestamp of t3");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) {
      params.seed = seed;
      params.pivot_prob = pivot;
      params.short_hit_prob = hit;
      essn::InputTrace trace = essn::generate_mixed(params);
      write_output(out_path, essn::format_trace(trace) + "\n");
      return 0;
    }
    if (*res) {
      essn::InputTrace trace = essn::parse_trace(read_input(res_file));
      essn::MVSchedule schedule = essn::resolve_reads(
          trace, parse_policy(res_policy), {.commit_stall = !no_stall});
      write_output(out_path, essn::format_trace(schedule) + "\n");
      return 0;
    }
    if (*cert) {
      essn::MVSchedule schedule =
          essn::parse_schedule(read_input(cert_file));
      essn::KtoFlavor flavor = parse_kto(cert_kto);
      essn::Kto kto = essn::make_kto(schedule, flavor);
      essn::VersionOrder vo = essn::build_version_order(schedule, flavor);
      essn::Mvsg g = essn::build_mvsg(schedule, vo, kto);
      bool si = essn::is_si_history(schedule);
      if (cert_protocol == "all") {
        write_output(out_path, essn::format_verdict_report(g, si, si));
        return 0;
      }
      essn::Protocol proto = cert_protocol == "ssn"   ? essn::Protocol::SSN
                             : cert_protocol == "essn" ? essn::Protocol::ESSN
                             : cert_protocol == "ssi"
                                 ? essn::Protocol::SSI
                                 : throw CLI::ValidationError(
                                       "unknown protocol " + cert_protocol);
      essn::CertResults results =
          cert_sequential
              ? essn::certify_sequential(schedule, kto, proto, flavor, si)
              : essn::certify(g, proto, si);
      std::string text;
      for (auto& [t, r] : results) {
        text += "t" + std::to_string(t) + " pi=" + r.pi.str() +
                " eta=" + r.eta.str() + " xi=" + r.xi.str() + " " +
                essn::to_string(proto) +
                (r.verdict == essn::Verdict::Abort ? "=A" : "=C") + "\n";
      }
      write_output(out_path, text);
      return 0;
    }
    if (*rep) {
      essn::InputTrace trace = essn::parse_trace(read_input(rep_file));
      essn::EngineConfig cfg;
      cfg.kto_flavor = parse_kto(rep_kto);
      cfg.rf_policy = parse_policy(rep_policy);
      cfg.shortcut = rep_shortcut;
      cfg.stall_bypass = rep_bypass;
      std::set<essn::TxnId> longs;
      std::stringstream ss(rep_longs);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!item.empty())
          longs.insert(static_cast<essn::TxnId>(std::stoul(item)));
      essn::ReplayResult result = essn::replay_trace(trace, cfg, longs);
      std::string text;
      for (const std::string& line : result.log) text += line + "\n";
      text += "realized: " + essn::format_trace(result.realized) + "\n";
      for (auto& [t, v] : result.verdicts)
        text += "t" + std::to_string(t) +
                (v == essn::Verdict::Commit ? " committed" : " aborted") +
                "\n";
      write_output(out_path, text);
      return result.complete ? 0 : 1;
    }
    if (*exp) {
      if (grid_name != "default")
        throw CLI::ValidationError("unknown grid '" + grid_name + "'");
      exp_params.seed = exp_seed;
      auto rows = essn::run_experiment(essn::ExperimentGrid{}, exp_params);
      write_output(out_path, essn::experiment_csv(rows));
      return 0;
    }
    if (*tt) {
      essn::InputTrace schedule = essn::tictoc_case(tt_case);
      std::map<essn::TxnId, essn::Timestamp> cts{{2, c2}, {3, c3}};
      essn::Interval iv = essn::feasible_interval(schedule, 1, cts);
      std::string text = "case " + tt_case + ": C1 interval " + iv.str() +
                         (iv.empty() ? " -> infeasible" : " -> feasible") +
                         "\n";
      if (tt_case == "a" || tt_case == "b") {
        auto compat = essn::check_mutual_incompatibility(c2, c3);
        text += std::string("a_feasible=") +
                (compat.a_feasible ? "yes" : "no") +
                " b_feasible=" + (compat.b_feasible ? "yes" : "no") + "\n";
      }
      auto order = essn::vsr_check(schedule);
      if (order) {
        text += "vsr order:";
        for (essn::TxnId t : *order) text += " t" + std::to_string(t);
        text += "\n";
      } else {
        text += "vsr order: none\n";
      }
      write_output(out_path, text);
      return 0;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
