#pragma once

#include <stdexcept>
#include <string>

namespace memoplan {

/// Failure classes raised by the library. The CLI maps these onto exit codes.
enum class Errc {
  // trace model
  duplicate_id,
  non_positive_size,
  empty_lifetime,
  negative_time,
  id_overflow,
  invalid_profile,
  parse,
  io,
  // tagging
  non_canonical_input,
  unmatched_free,
  double_free,
  tag_exhausted,
  tag_mismatch,
  unordered_events,
  // planning
  invalid_config,
  timeout,
  // checking
  missing_offset,
  unknown_offset,
  invalid_plan,
  // graph
  invalid_graph,
  unscoped_record,
  illegal_schedule,
};

inline const char *errc_name(Errc code) {
  switch (code) {
  case Errc::duplicate_id: return "DuplicateId";
  case Errc::non_positive_size: return "NonPositiveSize";
  case Errc::empty_lifetime: return "EmptyLifetime";
  case Errc::negative_time: return "NegativeTime";
  case Errc::id_overflow: return "IdOverflow";
  case Errc::invalid_profile: return "InvalidProfile";
  case Errc::parse: return "ParseError";
  case Errc::io: return "IoError";
  case Errc::non_canonical_input: return "NonCanonicalInput";
  case Errc::unmatched_free: return "UnmatchedFree";
  case Errc::double_free: return "DoubleFree";
  case Errc::tag_exhausted: return "TagExhausted";
  case Errc::tag_mismatch: return "TagMismatch";
  case Errc::unordered_events: return "UnorderedEvents";
  case Errc::invalid_config: return "InvalidConfig";
  case Errc::timeout: return "Timeout";
  case Errc::missing_offset: return "MissingOffset";
  case Errc::unknown_offset: return "UnknownOffset";
  case Errc::invalid_plan: return "InvalidPlan";
  case Errc::invalid_graph: return "InvalidGraph";
  case Errc::unscoped_record: return "UnscopedRecord";
  case Errc::illegal_schedule: return "IllegalSchedule";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string &what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what),
        code_(code) {}

  Errc code() const noexcept { return code_; }

private:
  Errc code_;
};

} // namespace memoplan
