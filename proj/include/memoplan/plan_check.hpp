#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "memoplan/detail/intervals.hpp"
#include "memoplan/error.hpp"
#include "memoplan/plan.hpp"
#include "memoplan/trace.hpp"

namespace memoplan {

/// Two lifetime-overlapping records whose address ranges intersect.
struct Violation {
  RecordId first;
  RecordId second;
  Bytes overlap_bytes;

  friend bool operator==(const Violation &, const Violation &) = default;
};

struct PlanReport {
  bool valid = true;
  std::vector<Violation> violations;
  /// Records whose extent runs past total_size.
  std::vector<RecordId> out_of_bounds;
  /// Records whose offset is not a multiple of the plan alignment.
  std::vector<RecordId> misaligned;
  Bytes total_size = 0;
  Bytes peak_live = 0;
  double utilization = 1.0;
  double fragmentation = 0.0;
  std::vector<Bytes> per_timestep_live;
};

namespace detail {

struct Placed {
  AllocationRecord record;
  Bytes offset;
};

/// Joins trace records with their plan offsets, skipping records the plan
/// declares unmanaged.
inline std::vector<Placed> join_plan(const Trace &trace, const Plan &plan) {
  const std::unordered_set<RecordId> unmanaged(plan.unmanaged.begin(), plan.unmanaged.end());
  std::unordered_set<RecordId> in_trace;
  std::vector<Placed> placed;
  placed.reserve(trace.records.size());
  for (const auto &r : trace.records) {
    in_trace.insert(r.id);
    if (unmanaged.contains(r.id))
      continue;
    auto it = plan.offsets.find(r.id);
    if (it == plan.offsets.end())
      throw Error(Errc::missing_offset, "plan has no offset for record " + std::to_string(r.id));
    placed.push_back({r, it->second});
  }
  for (const auto &[id, off] : plan.offsets)
    if (!in_trace.contains(id))
      throw Error(Errc::unknown_offset, "plan places record " + std::to_string(id) +
                                            " which is not in the trace");
  return placed;
}

} // namespace detail

/// Verifies a plan against its trace and measures it. Every violating pair is
/// reported, not just the first.
inline PlanReport check_plan(const Trace &trace, const Plan &plan) {
  const auto placed = detail::join_plan(trace, plan);
  std::vector<AllocationRecord> recs;
  recs.reserve(placed.size());
  for (const auto &p : placed)
    recs.push_back(p.record);

  PlanReport report;
  report.total_size = plan.total_size;
  const Bytes alignment = plan.alignment == 0 ? 1 : plan.alignment;
  for (const auto &p : placed) {
    if (p.offset % alignment != 0)
      report.misaligned.push_back(p.record.id);
    if (p.offset + p.record.size > plan.total_size)
      report.out_of_bounds.push_back(p.record.id);
  }

  const auto adj = detail::overlap_graph(recs);
  for (std::size_t i = 0; i < placed.size(); ++i) {
    for (auto j : adj[i]) {
      if (j <= i)
        continue;
      const auto &a = placed[i], &b = placed[j];
      const Bytes lo = std::max(a.offset, b.offset);
      const Bytes hi = std::min(a.offset + a.record.size, b.offset + b.record.size);
      if (lo < hi) {
        auto [x, y] = std::minmax(a.record.id, b.record.id);
        report.violations.push_back({x, y, hi - lo});
      }
    }
  }
  std::sort(report.violations.begin(), report.violations.end(),
            [](const Violation &a, const Violation &b) {
              return std::pair(a.first, a.second) < std::pair(b.first, b.second);
            });
  std::sort(report.out_of_bounds.begin(), report.out_of_bounds.end());
  std::sort(report.misaligned.begin(), report.misaligned.end());
  report.valid =
      report.violations.empty() && report.out_of_bounds.empty() && report.misaligned.empty();

  Trace managed;
  managed.records = std::move(recs);
  managed.num_timesteps = trace.num_timesteps;
  report.per_timestep_live = live_bytes_per_timestep(managed);
  report.peak_live = peak_live_bytes(managed);
  if (plan.total_size > 0) {
    report.utilization = std::min(
        1.0, static_cast<double>(report.peak_live) / static_cast<double>(plan.total_size));
  } else {
    report.utilization = 1.0;
  }
  report.fragmentation = 1.0 - report.utilization;
  return report;
}

inline nlohmann::ordered_json report_to_json(const PlanReport &r) {
  nlohmann::ordered_json j;
  j["valid"] = r.valid;
  auto violations = nlohmann::ordered_json::array();
  for (const auto &v : r.violations)
    violations.push_back({{"first", v.first}, {"second", v.second}, {"overlap_bytes", v.overlap_bytes}});
  j["violations"] = std::move(violations);
  j["out_of_bounds"] = r.out_of_bounds;
  j["misaligned"] = r.misaligned;
  j["total_size"] = r.total_size;
  j["peak_live"] = r.peak_live;
  j["utilization"] = r.utilization;
  j["fragmentation"] = r.fragmentation;
  j["per_timestep_live"] = r.per_timestep_live;
  return j;
}

// Heap maps -----------------------------------------------------------------

struct HeapRect {
  RecordId id;
  LifetimeInterval time;
  Bytes address_begin;
  Bytes address_end;

  friend bool operator==(const HeapRect &, const HeapRect &) = default;
};

/// Time on the x axis, address on the y axis; one rectangle per record.
struct HeapMap {
  std::vector<HeapRect> rectangles;
  TimeIndex width = 0;
  Bytes height = 0;
};

inline HeapMap build_heap_map(const Trace &trace, const Plan &plan) {
  const auto report = check_plan(trace, plan);
  if (!report.valid)
    throw Error(Errc::invalid_plan, "cannot draw a heap map for an invalid plan");
  HeapMap map;
  map.width = trace.num_timesteps;
  map.height = plan.total_size;
  for (const auto &p : detail::join_plan(trace, plan))
    map.rectangles.push_back({p.record.id, p.record.lifetime, p.offset, p.offset + p.record.size});
  std::sort(map.rectangles.begin(), map.rectangles.end(),
            [](const HeapRect &a, const HeapRect &b) { return a.id < b.id; });
  return map;
}

namespace detail {

/// Fill colour from the record id: hue walks the wheel in steps of 47 degrees.
inline std::string fill_for(RecordId id) {
  const double h = static_cast<double>((id * 47u) % 360u) / 60.0;
  const double c = 0.6 * 0.8, m = 0.6 - c / 2;
  const double x = c * (1 - std::abs(std::fmod(h, 2.0) - 1));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(h)) {
  case 0: r = c, g = x; break;
  case 1: r = x, g = c; break;
  case 2: g = c, b = x; break;
  case 3: g = x, b = c; break;
  case 4: r = x, b = c; break;
  default: r = c, b = x; break;
  }
  auto byte = [&](double v) { return std::to_string(static_cast<int>((v + m) * 255.0 + 0.5)); };
  return "rgb(" + byte(r) + "," + byte(g) + "," + byte(b) + ")";
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

} // namespace detail

/// Writes the heap map as a standalone SVG 1.1 document. Output depends only
/// on the map, so equal maps render byte-identically.
inline void render_heap_map_svg(const HeapMap &map, std::ostream &out) {
  constexpr double kWidth = 960, kHeight = 540;
  constexpr double kLeft = 90, kRight = 20, kTop = 20, kBottom = 60;
  constexpr double kPlotW = kWidth - kLeft - kRight, kPlotH = kHeight - kTop - kBottom;
  const double sx = kPlotW / static_cast<double>(std::max<TimeIndex>(map.width, 1));
  const double sy = kPlotH / static_cast<double>(std::max<Bytes>(map.height, 1));
  const double x0 = kLeft, y0 = kTop + kPlotH;

  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
      << "<g id=\"axes\" stroke=\"black\" stroke-width=\"1\">\n"
      << "<line x1=\"" << detail::num(x0) << "\" y1=\"" << detail::num(y0) << "\" x2=\""
      << detail::num(x0 + kPlotW) << "\" y2=\"" << detail::num(y0) << "\"/>\n"
      << "<line x1=\"" << detail::num(x0) << "\" y1=\"" << detail::num(y0) << "\" x2=\""
      << detail::num(x0) << "\" y2=\"" << detail::num(kTop) << "\"/>\n"
      << "</g>\n"
      << "<g id=\"labels\" font-family=\"monospace\" font-size=\"12\">\n"
      << "<text x=\"" << detail::num(x0) << "\" y=\"" << detail::num(y0 + 16) << "\">0</text>\n"
      << "<text x=\"" << detail::num(x0 + kPlotW) << "\" y=\"" << detail::num(y0 + 16)
      << "\" text-anchor=\"end\">" << map.width << "</text>\n"
      << "<text x=\"" << detail::num(x0 + kPlotW / 2) << "\" y=\"" << detail::num(y0 + 40)
      << "\" text-anchor=\"middle\">time (timesteps)</text>\n"
      << "<text x=\"" << detail::num(x0 - 6) << "\" y=\"" << detail::num(y0)
      << "\" text-anchor=\"end\">0</text>\n"
      << "<text x=\"" << detail::num(x0 - 6) << "\" y=\"" << detail::num(kTop + 12)
      << "\" text-anchor=\"end\">" << map.height << "</text>\n"
      << "<text x=\"20\" y=\"" << detail::num(kTop + kPlotH / 2)
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 " << detail::num(kTop + kPlotH / 2)
      << ")\">address (bytes)</text>\n"
      << "</g>\n"
      << "<g id=\"allocations\" stroke=\"black\" stroke-width=\"0.5\">\n";
  for (const auto &r : map.rectangles) {
    const double x = x0 + static_cast<double>(r.time.start) * sx;
    const double w = static_cast<double>(r.time.length()) * sx;
    const double y = y0 - static_cast<double>(r.address_end) * sy;
    const double h = static_cast<double>(r.address_end - r.address_begin) * sy;
    out << "<rect x=\"" << detail::num(x) << "\" y=\"" << detail::num(y) << "\" width=\""
        << detail::num(w) << "\" height=\"" << detail::num(h) << "\" fill=\"" << detail::fill_for(r.id)
        << "\"><title>id " << r.id << " t[" << r.time.start << ',' << r.time.end
        << ") addr[" << r.address_begin << ',' << r.address_end << ")</title></rect>\n";
  }
  out << "</g>\n</svg>\n";
  if (!out)
    throw Error(Errc::io, "failed writing SVG output");
}

} // namespace memoplan
