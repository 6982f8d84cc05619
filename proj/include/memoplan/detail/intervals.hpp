#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "memoplan/plan.hpp"
#include "memoplan/trace.hpp"

namespace memoplan::detail {

using Index = std::uint32_t;
using Adjacency = std::vector<std::vector<Index>>;

inline std::vector<Bytes> aligned_sizes(std::span<const AllocationRecord> records, Bytes alignment) {
  std::vector<Bytes> out(records.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    out[i] = align_up(records[i].size, alignment);
  return out;
}

/// Lifetime-overlap graph over record indices, built by a start-ordered sweep.
/// Neighbor lists come out sorted ascending.
inline Adjacency overlap_graph(std::span<const AllocationRecord> records) {
  std::vector<Index> order(records.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    return records[a].lifetime.start < records[b].lifetime.start ||
           (records[a].lifetime.start == records[b].lifetime.start && a < b);
  });
  Adjacency adj(records.size());
  std::vector<Index> active;
  for (Index i : order) {
    const auto start = records[i].lifetime.start;
    std::erase_if(active, [&](Index a) { return records[a].lifetime.end <= start; });
    for (Index a : active) {
      adj[i].push_back(a);
      adj[a].push_back(i);
    }
    active.push_back(i);
  }
  for (auto &n : adj)
    std::sort(n.begin(), n.end());
  return adj;
}

/// An occupied address range [offset, offset + extent).
struct Extent {
  Bytes offset;
  Bytes extent;
  Bytes end() const { return offset + extent; }
};

/// Best-fit placement of `size` bytes among occupied ranges: the smallest free
/// gap that holds it, lowest offset on ties, else the top of the stack.
/// All offsets and extents share the plan alignment, so the result does too.
inline Bytes best_fit_offset(std::vector<Extent> &occupied, Bytes size) {
  std::sort(occupied.begin(), occupied.end(),
            [](const Extent &a, const Extent &b) { return a.offset < b.offset; });
  Bytes cursor = 0;
  Bytes best_offset = 0;
  Bytes best_gap = std::numeric_limits<Bytes>::max();
  bool found = false;
  for (const auto &e : occupied) {
    if (e.offset > cursor) {
      const Bytes gap = e.offset - cursor;
      if (gap >= size && gap < best_gap) {
        best_gap = gap;
        best_offset = cursor;
        found = true;
      }
    }
    cursor = std::max(cursor, e.end());
  }
  return found ? best_offset : cursor;
}

} // namespace memoplan::detail
