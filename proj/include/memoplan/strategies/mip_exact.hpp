#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <tuple>

#include "memoplan/detail/intervals.hpp"
#include "memoplan/strategies/greedy_by_size.hpp"
#include "memoplan/plan.hpp"

namespace memoplan {

namespace detail {

/// A node of the exact search. Records are placed one at a time; placing r
/// fixes r below every still-unplaced record whose lifetime overlaps it, so
/// the placement sequence determines the pairwise ordering of every
/// overlapping pair. Each offset is then the longest path through the
/// ordering constraints: the highest end among placed overlapping records.
struct SearchNode {
  std::vector<Index> order;
  std::vector<Bytes> offsets;
  std::vector<char> placed;
  Bytes lower_bound = 0;
};

class ExactSolver {
public:
  ExactSolver(std::span<const AllocationRecord> recs, std::span<const Bytes> extents,
              const Deadline &deadline)
      : recs_(recs), extents_(extents), deadline_(deadline), n_(recs.size()),
        adj_(overlap_graph(recs)) {
    std::vector<TimeIndex> cuts;
    for (const auto &r : recs) {
      cuts.push_back(r.lifetime.start);
      cuts.push_back(r.lifetime.end);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    auto cell = [&](TimeIndex t) {
      return static_cast<std::size_t>(std::lower_bound(cuts.begin(), cuts.end(), t) - cuts.begin());
    };
    cells_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i)
      cells_[i] = {cell(recs[i].lifetime.start), cell(recs[i].lifetime.end)};
    top_.assign(cuts.size(), 0);
    remaining_.assign(cuts.size(), 0);
    for (std::size_t i = 0; i < n_; ++i)
      for (auto c = cells_[i].first; c < cells_[i].second; ++c)
        remaining_[c] += extents_[i];
  }

  /// Seeds the incumbent, e.g. with a heuristic plan.
  void set_incumbent(std::vector<Bytes> offsets) {
    Bytes total = 0;
    for (std::size_t i = 0; i < n_; ++i)
      total = std::max(total, offsets[i] + extents_[i]);
    best_total_ = total;
    best_offsets_ = std::move(offsets);
  }

  void solve() {
    node_.offsets.assign(n_, 0);
    node_.placed.assign(n_, 0);
    node_.order.clear();
    node_.lower_bound = bound();
    if (n_ == 0 || node_.lower_bound >= best_total_)
      return;

    std::vector<Frame> stack;
    stack.push_back(expand());
    while (!stack.empty()) {
      Frame &frame = stack.back();
      if (frame.applied)
        undo(frame);
      if (frame.next == frame.candidates.size()) {
        stack.pop_back();
        continue;
      }
      const auto [offset, r] = frame.candidates[frame.next++];
      if (std::max(current_max_, offset + extents_[r]) >= best_total_)
        continue;
      apply(frame, r, offset);
      if (node_.order.size() == n_) {
        best_total_ = current_max_;
        best_offsets_ = node_.offsets;
        continue;
      }
      node_.lower_bound = bound();
      if (node_.lower_bound >= best_total_)
        continue;
      if (++nodes_ % 64 == 0)
        deadline_.check("mip");
      stack.push_back(expand());
    }
  }

  Bytes best_total() const { return best_total_; }
  const std::vector<Bytes> &best_offsets() const { return best_offsets_; }
  std::size_t nodes_explored() const { return nodes_; }

private:
  struct Frame {
    std::vector<std::pair<Bytes, Index>> candidates;
    std::size_t next = 0;
    bool applied = false;
    Index record = 0;
    Bytes prev_max = 0;
    std::vector<std::pair<std::size_t, Bytes>> saved_tops;
  };

  bool overlap(Index a, Index b) const {
    return std::binary_search(adj_[a].begin(), adj_[a].end(), b);
  }

  /// Every unplaced record live in a cell sits above everything placed there
  /// and the unplaced ones in that cell pairwise overlap, so they stack.
  Bytes bound() const {
    Bytes lb = current_max_;
    for (std::size_t c = 0; c < top_.size(); ++c)
      lb = std::max(lb, top_[c] + remaining_[c]);
    return lb;
  }

  Frame expand() const {
    Frame frame;
    const bool has_last = !node_.order.empty();
    const Index last = has_last ? node_.order.back() : 0;
    for (Index r = 0; r < n_; ++r) {
      if (node_.placed[r])
        continue;
      // Adjacent placements of non-overlapping records commute; keep one order.
      if (has_last && r < last && !overlap(last, r))
        continue;
      Bytes offset = 0;
      for (Index j : adj_[r])
        if (node_.placed[j])
          offset = std::max(offset, node_.offsets[j] + extents_[j]);
      if (std::max(current_max_, offset + extents_[r]) >= best_total_)
        continue;
      frame.candidates.emplace_back(offset, r);
    }
    std::sort(frame.candidates.begin(), frame.candidates.end(), [&](const auto &a, const auto &b) {
      return std::tuple(a.first, extents_[b.second], a.second) <
             std::tuple(b.first, extents_[a.second], b.second);
    });
    return frame;
  }

  void apply(Frame &frame, Index r, Bytes offset) {
    frame.applied = true;
    frame.record = r;
    frame.prev_max = current_max_;
    frame.saved_tops.clear();
    node_.placed[r] = 1;
    node_.offsets[r] = offset;
    node_.order.push_back(r);
    const Bytes end = offset + extents_[r];
    current_max_ = std::max(current_max_, end);
    for (auto c = cells_[r].first; c < cells_[r].second; ++c) {
      frame.saved_tops.emplace_back(c, top_[c]);
      top_[c] = std::max(top_[c], end);
      remaining_[c] -= extents_[r];
    }
  }

  void undo(Frame &frame) {
    const Index r = frame.record;
    for (const auto &[c, prev] : frame.saved_tops) {
      top_[c] = prev;
      remaining_[c] += extents_[r];
    }
    current_max_ = frame.prev_max;
    node_.placed[r] = 0;
    node_.order.pop_back();
    frame.applied = false;
  }

  std::span<const AllocationRecord> recs_;
  std::span<const Bytes> extents_;
  const Deadline &deadline_;
  std::size_t n_;
  Adjacency adj_;
  std::vector<std::pair<std::size_t, std::size_t>> cells_;
  std::vector<Bytes> top_, remaining_;

  SearchNode node_;
  Bytes current_max_ = 0;
  Bytes best_total_ = std::numeric_limits<Bytes>::max();
  std::vector<Bytes> best_offsets_;
  std::size_t nodes_ = 0;
};

} // namespace detail

/// Exact minimum slab size by branch and bound over the pairwise address
/// ordering of lifetime-overlapping records. Seeded with the greedy_by_size
/// plan; stops early when that already meets the peak-live bound. Exponential
/// in the worst case, so a timeout aborts with Errc::timeout.
inline Plan plan_mip_exact(const Trace &trace, const StrategyConfig &config) {
  validate_config(config);
  const detail::Deadline deadline(config.timeout);
  deadline.check("mip");

  const auto m = detail::managed_records(trace, config);
  const auto &recs = m.records;
  const auto extents = detail::aligned_sizes(recs, config.alignment);

  StrategyConfig seed_config = config;
  seed_config.exclude_escaped = false;
  Trace managed;
  managed.records = recs;
  const auto seed = plan_greedy_by_size(managed, seed_config);
  deadline.check("mip");

  detail::ExactSolver solver(recs, extents, deadline);
  std::vector<Bytes> seed_offsets(recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i)
    seed_offsets[i] = seed.offsets.at(recs[i].id);
  solver.set_incumbent(std::move(seed_offsets));
  solver.solve();
  return detail::make_plan(Strategy::mip, config, m, solver.best_offsets(), extents);
}

} // namespace memoplan
