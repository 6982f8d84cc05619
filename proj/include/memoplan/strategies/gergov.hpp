#pragma once

#include <algorithm>
#include <numeric>
#include <queue>
#include <tuple>

#include "memoplan/detail/intervals.hpp"
#include "memoplan/strategies/greedy_by_size.hpp"
#include "memoplan/plan.hpp"

namespace memoplan {

namespace detail {

/// First phase: a relaxed stacking that may overlap.
///
/// Keeps a skyline H(t). Repeatedly takes the unplaced record whose lifetime
/// reaches the lowest skyline point, fixes its tentative height there and
/// raises H over its whole lifetime. Where H was already higher than that
/// point the record overlaps what lies below, which the second phase repairs.
inline std::vector<Bytes> skyline_heights(std::span<const AllocationRecord> recs,
                                          std::span<const Bytes> extents) {
  std::vector<TimeIndex> cuts;
  cuts.reserve(recs.size() * 2);
  for (const auto &r : recs) {
    cuts.push_back(r.lifetime.start);
    cuts.push_back(r.lifetime.end);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  auto cell = [&](TimeIndex t) {
    return static_cast<std::size_t>(std::lower_bound(cuts.begin(), cuts.end(), t) - cuts.begin());
  };
  std::vector<std::pair<std::size_t, std::size_t>> span(recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i)
    span[i] = {cell(recs[i].lifetime.start), cell(recs[i].lifetime.end)};

  std::vector<Bytes> skyline(cuts.size(), 0);
  auto floor_of = [&](std::size_t i) {
    return *std::min_element(skyline.begin() + static_cast<std::ptrdiff_t>(span[i].first),
                             skyline.begin() + static_cast<std::ptrdiff_t>(span[i].second));
  };

  // (floor, larger first, earlier start, id)
  using Key = std::tuple<Bytes, std::int64_t, TimeIndex, RecordId, Index>;
  std::priority_queue<Key, std::vector<Key>, std::greater<>> heap;
  for (Index i = 0; i < recs.size(); ++i)
    heap.emplace(0, -static_cast<std::int64_t>(extents[i]), recs[i].lifetime.start, recs[i].id, i);

  std::vector<Bytes> height(recs.size(), 0);
  while (!heap.empty()) {
    auto key = heap.top();
    heap.pop();
    const Index i = std::get<4>(key);
    const Bytes floor = floor_of(i);
    if (floor != std::get<0>(key)) {
      std::get<0>(key) = floor;
      heap.push(key);
      continue;
    }
    height[i] = floor;
    for (auto c = span[i].first; c < span[i].second; ++c)
      skyline[c] = std::max(skyline[c], floor + extents[i]);
  }
  return height;
}

} // namespace detail

/// Two-phase planner after Gergov: build a relaxed, possibly overlapping
/// layout from the skyline, then make it feasible by best-fit placement in
/// order of tentative height.
inline Plan plan_gergov(const Trace &trace, const StrategyConfig &config) {
  validate_config(config);
  const auto m = detail::managed_records(trace, config);
  const auto &recs = m.records;
  const auto extents = detail::aligned_sizes(recs, config.alignment);

  const auto tentative = detail::skyline_heights(recs, extents);
  std::vector<detail::Index> order(recs.size());
  std::iota(order.begin(), order.end(), detail::Index{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) {
    return std::tuple(tentative[a], recs[a].lifetime.start, recs[a].id) <
           std::tuple(tentative[b], recs[b].lifetime.start, recs[b].id);
  });

  const auto adj = detail::overlap_graph(recs);
  const auto offsets = detail::best_fit_in_order(order, adj, extents);
  return detail::make_plan(Strategy::gergov, config, m, offsets, extents);
}

} // namespace memoplan
