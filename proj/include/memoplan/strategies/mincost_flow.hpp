#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <tuple>

#include "memoplan/detail/intervals.hpp"
#include "memoplan/plan.hpp"

namespace memoplan {

namespace detail {

/// Shared-object assignment as a min-cost flow.
///
/// Network: S -> L_i (cap 1, cost 0) releases record i's object once i dies;
/// L_i -> R_j (cap 1, cost 0) lets j take over that object when
/// end_i <= start_j and extent_j <= extent_i; S -> R_j (cap 1, cost extent_j)
/// opens a fresh object for j; R_j -> T (cap 1, cost 0). A flow of n units
/// serves every record, and its cost is the number of fresh bytes.
///
/// Reuse arcs are enumerated on the fly instead of stored, so memory stays
/// linear in the record count however dense the reuse relation is.
class ReuseFlow {
public:
  static constexpr std::int32_t kNone = -1;

  ReuseFlow(std::span<const AllocationRecord> records, std::span<const Bytes> extents,
            const Deadline &deadline)
      : recs_(records), extents_(extents), deadline_(deadline), n_(records.size()) {
    by_start_.resize(n_);
    std::iota(by_start_.begin(), by_start_.end(), Index{0});
    std::sort(by_start_.begin(), by_start_.end(), [&](Index a, Index b) {
      return std::pair(recs_[a].lifetime.start, a) < std::pair(recs_[b].lifetime.start, b);
    });
    starts_.resize(n_);
    for (std::size_t k = 0; k < n_; ++k)
      starts_[k] = recs_[by_start_[k]].lifetime.start;

    succ_.assign(n_, kNone);
    pred_.assign(n_, kNone);
    source_to_left_.assign(n_, 0);
    fresh_.assign(n_, 0);
    served_.assign(n_, 0);
    potential_.assign(node_count(), 0);
  }

  /// Runs successive shortest paths until every record is served.
  void solve() {
    for (std::size_t unit = 0; unit < n_; ++unit)
      augment_once();
  }

  /// Predecessor whose object record j reuses, or kNone for a fresh object.
  std::span<const std::int32_t> predecessors() const { return pred_; }
  std::span<const std::int32_t> successors() const { return succ_; }

  Bytes fresh_bytes() const {
    Bytes total = 0;
    for (std::size_t j = 0; j < n_; ++j)
      if (fresh_[j])
        total += extents_[j];
    return total;
  }

private:
  using Cost = std::int64_t;
  static constexpr Cost kInf = std::numeric_limits<Cost>::max() / 4;

  enum class Arc : std::uint8_t { none, source_left, source_right, left_right, right_sink,
                                  rev_left_right };

  std::size_t node_count() const { return 2 * n_ + 2; }
  std::size_t source() const { return 0; }
  std::size_t sink() const { return 1; }
  std::size_t left(std::size_t i) const { return 2 + i; }
  std::size_t right(std::size_t j) const { return 2 + n_ + j; }

  bool can_reuse(std::size_t i, std::size_t j) const {
    return i != j && recs_[i].lifetime.end <= recs_[j].lifetime.start &&
           extents_[j] <= extents_[i];
  }

  void augment_once() {
    const std::size_t V = node_count();
    dist_.assign(V, kInf);
    parent_.assign(V, 0);
    parent_arc_.assign(V, Arc::none);
    done_.assign(V, 0);

    using Item = std::pair<Cost, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    auto relax = [&](std::size_t u, std::size_t v, Cost cost, Arc arc) {
      const Cost reduced = cost + potential_[u] - potential_[v];
      const Cost cand = dist_[u] + reduced;
      if (cand < dist_[v]) {
        dist_[v] = cand;
        parent_[v] = u;
        parent_arc_[v] = arc;
        heap.emplace(cand, v);
      }
    };

    dist_[source()] = 0;
    heap.emplace(0, source());
    std::size_t work = 0;
    while (!heap.empty()) {
      const auto [d, u] = heap.top();
      heap.pop();
      if (done_[u] || d != dist_[u])
        continue;
      done_[u] = 1;
      if (u == sink())
        break;
      if (++work % 256 == 0)
        deadline_.check("mincost_flow");

      if (u == source()) {
        for (std::size_t i = 0; i < n_; ++i)
          if (!source_to_left_[i])
            relax(u, left(i), 0, Arc::source_left);
        for (std::size_t j = 0; j < n_; ++j)
          if (!fresh_[j])
            relax(u, right(j), static_cast<Cost>(extents_[j]), Arc::source_right);
      } else if (u < 2 + n_) {
        const std::size_t i = u - 2;
        const auto first = std::lower_bound(starts_.begin(), starts_.end(), recs_[i].lifetime.end);
        for (auto k = static_cast<std::size_t>(first - starts_.begin()); k < n_; ++k) {
          const std::size_t j = by_start_[k];
          if ((k & 4095) == 0)
            deadline_.check("mincost_flow");
          if (succ_[i] != static_cast<std::int32_t>(j) && can_reuse(i, j))
            relax(u, right(j), 0, Arc::left_right);
        }
        // Residual L_i -> S only leads back to the source; skipped.
      } else {
        const std::size_t j = u - 2 - n_;
        if (!served_[j])
          relax(u, sink(), 0, Arc::right_sink);
        if (pred_[j] != kNone)
          relax(u, left(static_cast<std::size_t>(pred_[j])), 0, Arc::rev_left_right);
      }
    }
    if (dist_[sink()] >= kInf)
      throw Error(Errc::invalid_plan, "reuse network has no augmenting path");

    const Cost to_sink = dist_[sink()];
    for (std::size_t v = 0; v < V; ++v)
      potential_[v] += done_[v] ? dist_[v] : to_sink;

    for (std::size_t v = sink(); v != source();) {
      const std::size_t u = parent_[v];
      switch (parent_arc_[v]) {
      case Arc::source_left: source_to_left_[v - 2] = 1; break;
      case Arc::source_right: fresh_[v - 2 - n_] = 1; break;
      case Arc::left_right: {
        const std::size_t i = u - 2, j = v - 2 - n_;
        succ_[i] = static_cast<std::int32_t>(j);
        pred_[j] = static_cast<std::int32_t>(i);
        break;
      }
      case Arc::rev_left_right: {
        const std::size_t j = u - 2 - n_, i = v - 2;
        // The path may already have given i a new successor; keep it.
        if (succ_[i] == static_cast<std::int32_t>(j))
          succ_[i] = kNone;
        pred_[j] = kNone;
        break;
      }
      case Arc::right_sink: served_[u - 2 - n_] = 1; break;
      case Arc::none: throw Error(Errc::invalid_plan, "broken augmenting path");
      }
      v = u;
    }
  }

  std::span<const AllocationRecord> recs_;
  std::span<const Bytes> extents_;
  const Deadline &deadline_;
  std::size_t n_;

  std::vector<Index> by_start_;
  std::vector<TimeIndex> starts_;
  std::vector<std::int32_t> succ_, pred_;
  std::vector<char> source_to_left_, fresh_, served_;
  std::vector<Cost> potential_, dist_;
  std::vector<std::size_t> parent_;
  std::vector<Arc> parent_arc_;
  std::vector<char> done_;
};

} // namespace detail

/// Reuse-network planner: each record either opens a fresh object or inherits
/// the object of a record that died before it started and is at least as
/// large. Objects are laid out back to back in order of their first user.
inline Plan plan_mincost_flow(const Trace &trace, const StrategyConfig &config) {
  validate_config(config);
  const detail::Deadline deadline(config.timeout);
  deadline.check("mincost_flow");

  const auto m = detail::managed_records(trace, config);
  const auto &recs = m.records;
  const auto extents = detail::aligned_sizes(recs, config.alignment);

  detail::ReuseFlow flow(recs, extents, deadline);
  flow.solve();
  const auto pred = flow.predecessors();
  const auto succ = flow.successors();

  std::vector<detail::Index> heads;
  for (std::size_t j = 0; j < recs.size(); ++j)
    if (pred[j] == detail::ReuseFlow::kNone)
      heads.push_back(static_cast<detail::Index>(j));
  std::sort(heads.begin(), heads.end(), [&](auto a, auto b) {
    return std::pair(recs[a].lifetime.start, recs[a].id) <
           std::pair(recs[b].lifetime.start, recs[b].id);
  });

  std::vector<Bytes> offsets(recs.size(), 0);
  Bytes cursor = 0;
  for (auto head : heads) {
    for (std::int32_t k = static_cast<std::int32_t>(head); k != detail::ReuseFlow::kNone;
         k = succ[static_cast<std::size_t>(k)])
      offsets[static_cast<std::size_t>(k)] = cursor;
    cursor += extents[head];
  }
  return detail::make_plan(Strategy::mincost_flow, config, m, offsets, extents);
}

} // namespace memoplan
