#pragma once

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "memoplan/memoplan.hpp"

namespace memoplan::cli {

enum ExitCode : int {
  kOk = 0,
  kInputError = 2,
  kTimeout = 3,
  kInvalidPlan = 4,
  kReconstructionError = 5,
};

inline int exit_code_for(Errc code) {
  switch (code) {
  case Errc::timeout: return kTimeout;
  case Errc::invalid_plan: return kInvalidPlan;
  case Errc::non_canonical_input:
  case Errc::unmatched_free:
  case Errc::double_free:
  case Errc::tag_exhausted:
  case Errc::tag_mismatch:
  case Errc::unordered_events: return kReconstructionError;
  default: return kInputError;
  }
}

struct ComparisonRow {
  std::string strategy;
  Bytes total_size = 0;
  Bytes peak_live = 0;
  double fragmentation = 0.0;
  double planning_time_ms = 0.0;
  std::string status = "ok";
};

namespace detail {

inline std::ifstream open_in(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw Error(Errc::io, "cannot open '" + path + "' for reading");
  return in;
}

/// Writes `body` to `path`, or to `fallback` when the path is empty.
template <typename Body>
void write_to(const std::string &path, std::ostream &fallback, Body &&body) {
  if (path.empty()) {
    body(fallback);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(Errc::io, "cannot open '" + path + "' for writing");
  body(out);
  if (!out)
    throw Error(Errc::io, "failed writing '" + path + "'");
}

inline Trace load_trace(const std::string &path) {
  auto in = open_in(path);
  return read_trace_jsonl(in, path);
}

inline Plan load_plan(const std::string &path) {
  auto in = open_in(path);
  return read_plan_json(in);
}

inline std::vector<std::string> split_list(const std::string &text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty())
      out.push_back(item);
  return out;
}

inline Strategy strategy_or_throw(const std::string &name) {
  auto s = parse_strategy(name);
  if (!s)
    throw Error(Errc::invalid_config, "unknown strategy '" + name + "'");
  return *s;
}

inline std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

} // namespace detail

inline std::vector<ComparisonRow> compare_strategies(const Trace &trace,
                                                     const std::vector<Strategy> &strategies,
                                                     StrategyConfig base) {
  std::vector<ComparisonRow> rows;
  for (auto s : strategies) {
    ComparisonRow row;
    row.strategy = std::string(strategy_name(s));
    StrategyConfig config = base;
    config.strategy = s;
    const auto begin = std::chrono::steady_clock::now();
    try {
      const auto p = plan(trace, config);
      const auto report = check_plan(trace, p);
      row.total_size = p.total_size;
      row.peak_live = report.peak_live;
      row.fragmentation = report.fragmentation;
      row.planning_time_ms = p.planning_time_ms;
      if (!report.valid)
        row.status = "invalid";
    } catch (const Error &e) {
      if (e.code() != Errc::timeout)
        throw;
      row.status = "timeout";
      row.peak_live = peak_live_bytes(trace);
      row.planning_time_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - begin).count();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Runs the command line. Data goes to `out`, diagnostics to `err`.
inline int run(std::vector<std::string> args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Static memory planning for tensor allocation traces", "memoplan"};
  app.require_subcommand(1);

  // gen
  GeneratorProfile profile;
  std::string gen_out;
  auto *gen = app.add_subcommand("gen", "Write a seeded synthetic trace as JSON Lines");
  gen->add_option("--n", profile.num_records, "Number of records")->check(CLI::Range(0, 65536));
  gen->add_option("--seed", profile.rng_seed, "RNG seed");
  gen->add_option("--median", profile.median_bytes, "Median allocation size in bytes")
      ->check(CLI::PositiveNumber);
  gen->add_option("--log-std", profile.log_std, "Log-space standard deviation of sizes")
      ->check(CLI::NonNegativeNumber);
  gen->add_option("--span", profile.mean_lifetime_span, "Mean lifetime span in timesteps")
      ->check(CLI::Range(1.0, 1e9));
  gen->add_option("--advance", profile.advance_probability,
                  "Probability that a record starts a new operator")
      ->check(CLI::Range(0.0, 1.0));
  gen->add_option("--out", gen_out, "Output file (default: stdout)");

  // shared planning options
  std::string trace_path, plan_path, out_path, strategy_name_opt;
  Bytes alignment = 64;
  std::int64_t timeout_ms = -1;
  bool exclude_escaped = false;

  auto *plan_cmd = app.add_subcommand("plan", "Compute an offset plan for a trace");
  plan_cmd->add_option("--in", trace_path, "Trace file (JSON Lines)")->required();
  plan_cmd->add_option("--out", out_path, "Plan file (default: stdout)");
  plan_cmd->add_option("--strategy", strategy_name_opt,
                       "bump_allocation | greedy_by_size | mincost_flow | gergov | mip");
  plan_cmd->add_option("--alignment", alignment, "Offset alignment in bytes (power of two)");
  plan_cmd->add_option("--timeout-ms", timeout_ms, "Time budget for mip and mincost_flow");
  plan_cmd->add_flag("--exclude-escaped", exclude_escaped, "Leave escaped records out of the slab");

  auto *check_cmd = app.add_subcommand("check", "Verify a plan against its trace");
  check_cmd->add_option("--trace", trace_path, "Trace file")->required();
  check_cmd->add_option("--plan", plan_path, "Plan file")->required();

  auto *render_cmd = app.add_subcommand("render", "Draw the heap map of a plan as SVG");
  render_cmd->add_option("--trace", trace_path, "Trace file")->required();
  render_cmd->add_option("--plan", plan_path, "Plan file")->required();
  render_cmd->add_option("--out", out_path, "SVG file (default: stdout)");

  std::string strategy_list = "bump_allocation,greedy_by_size,mincost_flow,gergov,mip";
  std::string json_path, csv_path;
  std::int64_t compare_timeout_ms = 10000;
  auto *compare_cmd = app.add_subcommand("compare", "Plan a trace with several strategies");
  compare_cmd->add_option("--in", trace_path, "Trace file")->required();
  compare_cmd->add_option("--strategies", strategy_list, "Comma-separated strategy names");
  compare_cmd->add_option("--timeout-ms", compare_timeout_ms, "Per-strategy time budget");
  compare_cmd->add_option("--alignment", alignment, "Offset alignment in bytes");
  compare_cmd->add_flag("--exclude-escaped", exclude_escaped, "Leave escaped records out");
  compare_cmd->add_option("--json", json_path, "Also write rows as JSON to this file");
  compare_cmd->add_option("--csv", csv_path, "Also write rows as CSV to this file");

  auto *bracket_cmd = app.add_subcommand("bracket", "Rebuild a trace from malloc/free events");
  bracket_cmd->add_option("--in", trace_path, "Event file (JSON Lines)")->required();
  bracket_cmd->add_option("--out", out_path, "Trace file (default: stdout)");

  std::string graph_path, schedule_text;
  bool order_based = false;
  auto *sim_cmd = app.add_subcommand("simulate", "Replay a scoped plan over an operator graph");
  sim_cmd->add_option("--graph", graph_path, "Graph fixture (JSON)")->required();
  sim_cmd->add_option("--schedule", schedule_text, "Comma-separated node order to execute");
  sim_cmd->add_option("--strategy", strategy_name_opt, "Planning strategy");
  sim_cmd->add_option("--alignment", alignment, "Offset alignment in bytes");
  sim_cmd->add_flag("--order-based", order_based,
                    "Replay the fixture's plan by request order instead of replanning");

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kOk : kInputError;
  }

  auto make_config = [&](std::optional<std::int64_t> timeout) {
    StrategyConfig config;
    if (!strategy_name_opt.empty())
      config.strategy = detail::strategy_or_throw(strategy_name_opt);
    config.alignment = alignment;
    if (timeout && *timeout >= 0)
      config.timeout = std::chrono::milliseconds(*timeout);
    config.exclude_escaped = exclude_escaped;
    validate_config(config);
    return config;
  };

  try {
    if (*gen) {
      const auto trace = generate_trace(profile);
      detail::write_to(gen_out, out, [&](std::ostream &os) { write_trace_jsonl(trace, os); });
      return kOk;
    }
    if (*plan_cmd) {
      const auto trace = detail::load_trace(trace_path);
      const auto p = plan(trace, make_config(timeout_ms));
      detail::write_to(out_path, out, [&](std::ostream &os) { write_plan_json(p, os); });
      std::ostream &summary = out_path.empty() ? err : out;
      summary << "strategy=" << p.strategy << " total_size=" << p.total_size
              << " planning_time_ms=" << detail::fixed(p.planning_time_ms, 3) << '\n';
      return kOk;
    }
    if (*check_cmd) {
      const auto trace = detail::load_trace(trace_path);
      const auto report = check_plan(trace, detail::load_plan(plan_path));
      out << report_to_json(report).dump(2) << '\n';
      return report.valid ? kOk : kInvalidPlan;
    }
    if (*render_cmd) {
      const auto trace = detail::load_trace(trace_path);
      const auto map = build_heap_map(trace, detail::load_plan(plan_path));
      detail::write_to(out_path, out, [&](std::ostream &os) { render_heap_map_svg(map, os); });
      return kOk;
    }
    if (*compare_cmd) {
      const auto trace = detail::load_trace(trace_path);
      std::vector<Strategy> strategies;
      for (const auto &name : detail::split_list(strategy_list))
        strategies.push_back(detail::strategy_or_throw(name));
      if (strategies.empty())
        throw Error(Errc::invalid_config, "no strategies requested");
      const auto rows = compare_strategies(trace, strategies, make_config(compare_timeout_ms));

      out << std::left << std::setw(16) << "strategy" << std::setw(9) << "status" << std::right
          << std::setw(14) << "total_size" << std::setw(14) << "peak_live" << std::setw(15)
          << "fragmentation" << std::setw(18) << "planning_time_ms" << '\n';
      for (const auto &r : rows)
        out << std::left << std::setw(16) << r.strategy << std::setw(9) << r.status << std::right
            << std::setw(14) << (r.status == "timeout" ? "-" : std::to_string(r.total_size))
            << std::setw(14) << r.peak_live << std::setw(15)
            << (r.status == "timeout" ? "-" : detail::fixed(r.fragmentation, 4)) << std::setw(18)
            << detail::fixed(r.planning_time_ms, 3) << '\n';

      if (!json_path.empty()) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto &r : rows)
          arr.push_back({{"strategy", r.strategy},
                         {"status", r.status},
                         {"total_size", r.total_size},
                         {"peak_live", r.peak_live},
                         {"fragmentation", r.fragmentation},
                         {"planning_time_ms", r.planning_time_ms}});
        detail::write_to(json_path, out, [&](std::ostream &os) { os << arr.dump(2) << '\n'; });
      }
      if (!csv_path.empty()) {
        detail::write_to(csv_path, out, [&](std::ostream &os) {
          os << "strategy,status,total_size,peak_live,fragmentation,planning_time_ms\n";
          for (const auto &r : rows)
            os << r.strategy << ',' << r.status << ',' << r.total_size << ',' << r.peak_live << ','
               << detail::fixed(r.fragmentation, 6) << ',' << detail::fixed(r.planning_time_ms, 3)
               << '\n';
        });
      }
      return kOk;
    }
    if (*bracket_cmd) {
      auto in = detail::open_in(trace_path);
      const auto events = read_events_jsonl(in);
      const auto trace = bracket_lifetimes(events);
      detail::write_to(out_path, out, [&](std::ostream &os) { write_trace_jsonl(trace, os); });
      return kOk;
    }
    if (*sim_cmd) {
      auto in = detail::open_in(graph_path);
      const auto fixture = read_graph_json(in);
      const auto config = make_config(std::nullopt);
      OpGraph run_graph = fixture.graph;
      if (!schedule_text.empty()) {
        std::vector<NodeId> schedule;
        for (const auto &item : detail::split_list(schedule_text)) {
          try {
            schedule.push_back(std::stoll(item));
          } catch (const std::logic_error &) {
            throw Error(Errc::parse, "bad node id '" + item + "' in --schedule");
          }
        }
        run_graph = reorder(fixture.graph, std::move(schedule));
      }
      ScopedPlan scoped;
      if (order_based) {
        const auto p = plan(fixture.trace, config);
        scoped = order_based_replay(fixture.graph, run_graph, fixture.trace, p);
      } else {
        const auto trace = replan_lifetimes(run_graph, fixture.trace);
        scoped = scope_plan(run_graph, trace, plan(trace, config));
      }
      const auto log = simulate(run_graph, scoped);
      nlohmann::ordered_json j;
      j["slab_size"] = scoped.slab_size;
      j["accesses"] = log.events.size();
      j["illegal"] = log.illegal_count();
      auto events = nlohmann::ordered_json::array();
      for (const auto &e : log.events) {
        if (e.verdict != Verdict::illegal)
          continue;
        events.push_back({{"time", e.time}, {"node", e.node}, {"record", e.record},
                          {"address", {e.address_begin, e.address_end}}});
      }
      j["illegal_accesses"] = std::move(events);
      out << j.dump(2) << '\n';
      return log.illegal_count() == 0 ? kOk : kInvalidPlan;
    }
  } catch (const Error &e) {
    err << "memoplan: " << e.what() << '\n';
    return exit_code_for(e.code());
  }
  return kInputError;
}

inline int run(int argc, char **argv, std::ostream &out = std::cout, std::ostream &err = std::cerr) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i)
    args.emplace_back(argv[i]);
  return run(std::move(args), out, err);
}

} // namespace memoplan::cli
