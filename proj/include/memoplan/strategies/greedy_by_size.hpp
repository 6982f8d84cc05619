#pragma once

#include <algorithm>
#include <numeric>
#include <tuple>

#include "memoplan/detail/intervals.hpp"
#include "memoplan/plan.hpp"

namespace memoplan {

namespace detail {

/// Places records one at a time in `order`, each at the best-fit gap among
/// the already placed records whose lifetimes overlap it.
inline std::vector<Bytes> best_fit_in_order(std::span<const Index> order, const Adjacency &adj,
                                            std::span<const Bytes> extents) {
  std::vector<Bytes> offsets(extents.size(), 0);
  std::vector<char> placed(extents.size(), 0);
  std::vector<Extent> occupied;
  for (Index i : order) {
    occupied.clear();
    for (Index j : adj[i])
      if (placed[j])
        occupied.push_back({offsets[j], extents[j]});
    offsets[i] = best_fit_offset(occupied, extents[i]);
    placed[i] = 1;
  }
  return offsets;
}

} // namespace detail

/// Largest records first (ties: earlier start, then smaller id), each dropped
/// into the tightest gap left by lifetime-overlapping records already placed.
inline Plan plan_greedy_by_size(const Trace &trace, const StrategyConfig &config) {
  validate_config(config);
  const auto m = detail::managed_records(trace, config);
  const auto &recs = m.records;
  const auto extents = detail::aligned_sizes(recs, config.alignment);

  std::vector<detail::Index> order(recs.size());
  std::iota(order.begin(), order.end(), detail::Index{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) {
    return std::tuple(-static_cast<std::int64_t>(recs[a].size), recs[a].lifetime.start, recs[a].id) <
           std::tuple(-static_cast<std::int64_t>(recs[b].size), recs[b].lifetime.start, recs[b].id);
  });

  const auto adj = detail::overlap_graph(recs);
  const auto offsets = detail::best_fit_in_order(order, adj, extents);
  return detail::make_plan(Strategy::greedy_by_size, config, m, offsets, extents);
}

} // namespace memoplan
