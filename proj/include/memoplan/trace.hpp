#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "memoplan/error.hpp"

namespace memoplan {

using RecordId = std::uint32_t;
using Bytes = std::uint64_t;
using TimeIndex = std::int64_t;

/// Ids must fit the 16-bit pointer tag.
inline constexpr RecordId kMaxRecordId = (1u << 16) - 1;

/// Half-open interval of operator sequence positions, [start, end).
struct LifetimeInterval {
  TimeIndex start = 0;
  TimeIndex end = 0;

  TimeIndex length() const { return end - start; }
  bool contains(TimeIndex t) const { return start <= t && t < end; }

  friend bool operator==(const LifetimeInterval &, const LifetimeInterval &) = default;
};

inline bool overlaps(const LifetimeInterval &a, const LifetimeInterval &b) {
  return a.start < b.end && b.start < a.end;
}

/// One intermediate buffer: how big it is, when it is live and which
/// operator requested it.
struct AllocationRecord {
  RecordId id = 0;
  Bytes size = 0;
  LifetimeInterval lifetime;
  std::string op_scope;
  /// Never freed within the trace (e.g. returned to the caller).
  bool escaped = false;

  friend bool operator==(const AllocationRecord &, const AllocationRecord &) = default;
};

struct Trace {
  std::vector<AllocationRecord> records;
  TimeIndex num_timesteps = 0;
  std::string source;

  bool empty() const { return records.empty(); }
  std::size_t size() const { return records.size(); }

  friend bool operator==(const Trace &a, const Trace &b) {
    return a.records == b.records && a.num_timesteps == b.num_timesteps;
  }
};

/// Checks record invariants and computes num_timesteps (the largest lifetime
/// end, 0 for an empty trace).
inline Trace validate_trace(std::vector<AllocationRecord> records,
                            std::string source = {}) {
  std::unordered_set<RecordId> seen;
  seen.reserve(records.size());
  TimeIndex horizon = 0;
  for (const auto &r : records) {
    const auto id = std::to_string(r.id);
    if (r.id > kMaxRecordId)
      throw Error(Errc::id_overflow, "record id " + id + " does not fit in 16 bits");
    if (!seen.insert(r.id).second)
      throw Error(Errc::duplicate_id, "record id " + id + " appears more than once");
    if (r.size == 0)
      throw Error(Errc::non_positive_size, "record " + id + " has size 0");
    if (r.lifetime.start < 0)
      throw Error(Errc::negative_time, "record " + id + " starts before time 0");
    if (r.lifetime.start >= r.lifetime.end)
      throw Error(Errc::empty_lifetime,
                  "record " + id + " has lifetime [" + std::to_string(r.lifetime.start) +
                      "," + std::to_string(r.lifetime.end) + ")");
    horizon = std::max(horizon, r.lifetime.end);
  }
  Trace trace;
  trace.records = std::move(records);
  trace.num_timesteps = horizon;
  trace.source = std::move(source);
  return trace;
}

/// Sum of live sizes at every timestep in [0, num_timesteps).
inline std::vector<Bytes> live_bytes_per_timestep(const Trace &trace) {
  std::vector<std::int64_t> delta(static_cast<std::size_t>(trace.num_timesteps) + 1, 0);
  for (const auto &r : trace.records) {
    delta[static_cast<std::size_t>(r.lifetime.start)] += static_cast<std::int64_t>(r.size);
    delta[static_cast<std::size_t>(r.lifetime.end)] -= static_cast<std::int64_t>(r.size);
  }
  std::vector<Bytes> live(static_cast<std::size_t>(trace.num_timesteps), 0);
  std::int64_t running = 0;
  for (std::size_t t = 0; t < live.size(); ++t) {
    running += delta[t];
    live[t] = static_cast<Bytes>(running);
  }
  return live;
}

namespace detail {

/// Peak of summed weights over a set of half-open intervals, by event sweep.
/// Frees at t are processed before allocations at t.
template <typename SizeOf>
Bytes sweep_peak(std::span<const AllocationRecord> records, SizeOf size_of) {
  std::vector<std::pair<TimeIndex, std::int64_t>> events;
  events.reserve(records.size() * 2);
  for (const auto &r : records) {
    const auto s = static_cast<std::int64_t>(size_of(r));
    events.emplace_back(r.lifetime.start, s);
    events.emplace_back(r.lifetime.end, -s);
  }
  std::sort(events.begin(), events.end());
  std::int64_t running = 0, peak = 0;
  for (const auto &[t, d] : events) {
    running += d;
    peak = std::max(peak, running);
  }
  return static_cast<Bytes>(peak);
}

} // namespace detail

/// Largest number of bytes simultaneously live; a lower bound on any plan.
inline Bytes peak_live_bytes(const Trace &trace) {
  return detail::sweep_peak(trace.records, [](const AllocationRecord &r) { return r.size; });
}

inline Bytes total_bytes(const Trace &trace) {
  Bytes sum = 0;
  for (const auto &r : trace.records)
    sum += r.size;
  return sum;
}

/// Shape parameters of the synthetic trace generator.
///
/// Sizes are log-normal around `median_bytes` with log-space standard
/// deviation `log_std`; lifetime spans are 1 + a geometric draw with mean
/// `mean_lifetime_span`. Each record advances the operator clock with
/// probability `advance_probability`, so consecutive records often share an
/// operator scope.
struct GeneratorProfile {
  std::size_t num_records = 0;
  double median_bytes = 65536.0;
  double log_std = 1.5;
  double mean_lifetime_span = 4.0;
  double advance_probability = 0.5;
  std::uint64_t rng_seed = 0;
};

inline void validate_profile(const GeneratorProfile &p) {
  if (p.num_records > std::size_t{kMaxRecordId} + 1)
    throw Error(Errc::invalid_profile, "num_records exceeds the 2^16 tag space");
  if (!(p.median_bytes > 0.0))
    throw Error(Errc::invalid_profile, "median_bytes must be positive");
  if (!(p.log_std >= 0.0))
    throw Error(Errc::invalid_profile, "log_std must be non-negative");
  if (!(p.mean_lifetime_span >= 1.0))
    throw Error(Errc::invalid_profile, "mean_lifetime_span must be at least 1");
  if (!(p.advance_probability >= 0.0 && p.advance_probability <= 1.0))
    throw Error(Errc::invalid_profile, "advance_probability must lie in [0, 1]");
}

inline Trace generate_trace(const GeneratorProfile &profile) {
  validate_profile(profile);
  std::mt19937_64 rng(profile.rng_seed);
  std::lognormal_distribution<double> size_dist(std::log(profile.median_bytes),
                                                profile.log_std);
  std::geometric_distribution<int> span_dist(1.0 / profile.mean_lifetime_span);
  std::bernoulli_distribution advance(profile.advance_probability);

  constexpr double kMaxSize = 1ull << 40;
  std::vector<AllocationRecord> records;
  records.reserve(profile.num_records);
  TimeIndex clock = 0;
  for (std::size_t i = 0; i < profile.num_records; ++i) {
    if (i > 0 && advance(rng))
      ++clock;
    const double raw = std::clamp(size_dist(rng), 1.0, kMaxSize);
    const TimeIndex span = 1 + span_dist(rng);
    AllocationRecord r;
    r.id = static_cast<RecordId>(i);
    r.size = static_cast<Bytes>(std::llround(raw));
    r.lifetime = {clock, clock + span};
    r.op_scope = "op" + std::to_string(clock);
    records.push_back(std::move(r));
  }
  return validate_trace(std::move(records),
                        "synthetic(seed=" + std::to_string(profile.rng_seed) + ")");
}

} // namespace memoplan
