#pragma once

#include <algorithm>
#include <numeric>

#include "memoplan/detail/intervals.hpp"
#include "memoplan/plan.hpp"

namespace memoplan {

/// Baseline: hand out offsets from a cursor in allocation order and never
/// reuse. The cursor advances by the aligned size, so total_size is the sum
/// of aligned sizes.
inline Plan plan_bump(const Trace &trace, const StrategyConfig &config) {
  validate_config(config);
  const auto m = detail::managed_records(trace, config);
  const auto &recs = m.records;
  const auto extents = detail::aligned_sizes(recs, config.alignment);

  std::vector<detail::Index> order(recs.size());
  std::iota(order.begin(), order.end(), detail::Index{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) {
    return std::pair(recs[a].lifetime.start, recs[a].id) <
           std::pair(recs[b].lifetime.start, recs[b].id);
  });

  std::vector<Bytes> offsets(recs.size());
  Bytes cursor = 0;
  for (auto i : order) {
    offsets[i] = cursor;
    cursor += extents[i];
  }
  return detail::make_plan(Strategy::bump_allocation, config, m, offsets, extents);
}

} // namespace memoplan
