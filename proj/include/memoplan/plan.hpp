#pragma once

#include <algorithm>
#include <chrono>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "memoplan/error.hpp"
#include "memoplan/trace.hpp"

namespace memoplan {

enum class Strategy { bump_allocation, greedy_by_size, mincost_flow, gergov, mip };

inline constexpr Strategy kAllStrategies[] = {Strategy::bump_allocation, Strategy::greedy_by_size,
                                              Strategy::mincost_flow, Strategy::gergov,
                                              Strategy::mip};

inline std::string_view strategy_name(Strategy s) {
  switch (s) {
  case Strategy::bump_allocation: return "bump_allocation";
  case Strategy::greedy_by_size: return "greedy_by_size";
  case Strategy::mincost_flow: return "mincost_flow";
  case Strategy::gergov: return "gergov";
  case Strategy::mip: return "mip";
  }
  return "unknown";
}

inline std::optional<Strategy> parse_strategy(std::string_view name) {
  for (auto s : kAllStrategies)
    if (strategy_name(s) == name)
      return s;
  return std::nullopt;
}

struct StrategyConfig {
  /// Unset means the default planner (greedy_by_size).
  std::optional<Strategy> strategy;
  Bytes alignment = 64;
  /// Honored by mip and mincost_flow only.
  std::optional<std::chrono::milliseconds> timeout;
  /// Leave escaped records out of the slab.
  bool exclude_escaped = false;
};

inline bool is_power_of_two(Bytes v) { return v != 0 && (v & (v - 1)) == 0; }

inline void validate_config(const StrategyConfig &config) {
  if (!is_power_of_two(config.alignment))
    throw Error(Errc::invalid_config,
                "alignment " + std::to_string(config.alignment) + " is not a power of two");
  if (config.timeout && config.timeout->count() < 0)
    throw Error(Errc::invalid_config, "timeout must be non-negative");
}

inline Bytes align_up(Bytes value, Bytes alignment) {
  return (value + alignment - 1) & ~(alignment - 1);
}

/// A slab size plus one offset per managed record.
struct Plan {
  std::string strategy;
  Bytes alignment = 1;
  Bytes total_size = 0;
  std::map<RecordId, Bytes> offsets;
  /// Records deliberately left out of the slab (escaped outputs).
  std::vector<RecordId> unmanaged;
  double planning_time_ms = 0.0;

  /// Equality ignores planning time.
  friend bool operator==(const Plan &a, const Plan &b) {
    return a.strategy == b.strategy && a.alignment == b.alignment &&
           a.total_size == b.total_size && a.offsets == b.offsets && a.unmanaged == b.unmanaged;
  }
};

namespace detail {

class Deadline {
public:
  using Clock = std::chrono::steady_clock;

  explicit Deadline(std::optional<std::chrono::milliseconds> timeout) {
    if (timeout)
      at_ = Clock::now() + *timeout;
  }

  bool expired() const { return at_ && Clock::now() >= *at_; }

  void check(std::string_view what) const {
    if (expired())
      throw Error(Errc::timeout, std::string(what) + " exceeded its time budget");
  }

private:
  std::optional<Clock::time_point> at_;
};

/// The records a strategy must place, after escaped filtering.
struct Managed {
  std::vector<AllocationRecord> records;
  std::vector<RecordId> unmanaged;
};

inline Managed managed_records(const Trace &trace, const StrategyConfig &config) {
  Managed m;
  m.records.reserve(trace.records.size());
  for (const auto &r : trace.records) {
    if (config.exclude_escaped && r.escaped)
      m.unmanaged.push_back(r.id);
    else
      m.records.push_back(r);
  }
  std::sort(m.unmanaged.begin(), m.unmanaged.end());
  return m;
}

inline Plan make_plan(Strategy s, const StrategyConfig &config, const Managed &m,
                      std::span<const Bytes> offsets, std::span<const Bytes> extents) {
  Plan plan;
  plan.strategy = std::string(strategy_name(s));
  plan.alignment = config.alignment;
  plan.unmanaged = m.unmanaged;
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    plan.offsets.emplace(m.records[i].id, offsets[i]);
    plan.total_size = std::max(plan.total_size, offsets[i] + extents[i]);
  }
  return plan;
}

} // namespace detail

} // namespace memoplan
