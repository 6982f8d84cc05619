#pragma once

#include <chrono>

#include "memoplan/plan.hpp"
#include "memoplan/strategies/bump.hpp"
#include "memoplan/strategies/gergov.hpp"
#include "memoplan/strategies/greedy_by_size.hpp"
#include "memoplan/strategies/mincost_flow.hpp"
#include "memoplan/strategies/mip_exact.hpp"

namespace memoplan {

/// Runs the configured strategy (greedy_by_size when none is set) and stamps
/// the wall time spent planning.
inline Plan plan(const Trace &trace, const StrategyConfig &config = {}) {
  const auto begin = std::chrono::steady_clock::now();
  Plan result;
  switch (config.strategy.value_or(Strategy::greedy_by_size)) {
  case Strategy::bump_allocation: result = plan_bump(trace, config); break;
  case Strategy::greedy_by_size: result = plan_greedy_by_size(trace, config); break;
  case Strategy::mincost_flow: result = plan_mincost_flow(trace, config); break;
  case Strategy::gergov: result = plan_gergov(trace, config); break;
  case Strategy::mip: result = plan_mip_exact(trace, config); break;
  }
  const std::chrono::duration<double, std::milli> elapsed =
      std::chrono::steady_clock::now() - begin;
  result.planning_time_ms = elapsed.count();
  return result;
}

} // namespace memoplan
