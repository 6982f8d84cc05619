#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "memoplan/error.hpp"
#include "memoplan/trace.hpp"
#include "memoplan/trace_io.hpp"

namespace memoplan {

/// x86_64 user pointers only occupy the low 48 bits. The upper 16 bits of
/// the word carry an allocation tag.
inline constexpr unsigned kAddressBits = 48;
inline constexpr std::uint64_t kPayloadMask = (std::uint64_t{1} << kAddressBits) - 1;
inline constexpr std::uint64_t kSignBit = std::uint64_t{1} << (kAddressBits - 1);

using Tag = std::uint16_t;

/// A 64-bit pointer word whose upper 16 bits hold a tag. Must be
/// canonicalized before it can be used as an address.
class TaggedAddress {
public:
  constexpr TaggedAddress() = default;
  constexpr explicit TaggedAddress(std::uint64_t word) : word_(word) {}

  constexpr std::uint64_t word() const { return word_; }
  constexpr Tag tag() const { return static_cast<Tag>(word_ >> kAddressBits); }
  constexpr std::uint64_t payload() const { return word_ & kPayloadMask; }

  friend constexpr bool operator==(TaggedAddress, TaggedAddress) = default;

private:
  std::uint64_t word_ = 0;
};

/// Clears the tag and sign-extends bit 47 through bits 48..63.
constexpr std::uint64_t canonicalize(TaggedAddress tagged) {
  const std::uint64_t w = tagged.word();
  return (w & kPayloadMask) | ~((w & kSignBit) - 1);
}

constexpr bool is_canonical(std::uint64_t address) {
  return canonicalize(TaggedAddress(address)) == address;
}

constexpr Tag tag_of(TaggedAddress tagged) { return tagged.tag(); }

inline TaggedAddress encode_tag(std::uint64_t canonical_address, Tag tag) {
  if (!is_canonical(canonical_address))
    throw Error(Errc::non_canonical_input, "address is not in canonical form");
  return TaggedAddress((canonical_address & kPayloadMask) |
                       (std::uint64_t{tag} << kAddressBits));
}

/// Hands out allocation tags in malloc order.
class TagCounter {
public:
  static constexpr std::uint32_t kLimit = std::uint32_t{1} << 16;

  TagCounter() = default;
  explicit TagCounter(std::uint32_t first) : next_(first) {
    if (first >= kLimit)
      throw Error(Errc::tag_exhausted, "initial tag exceeds 2^16 - 1");
  }

  std::uint32_t next_tag() const { return next_; }

  Tag issue() {
    if (next_ >= kLimit)
      throw Error(Errc::tag_exhausted, "more than 2^16 allocations in one pass");
    return static_cast<Tag>(next_++);
  }

private:
  std::uint32_t next_ = 0;
};

enum class EventKind { malloc, free };

struct AllocEvent {
  EventKind kind = EventKind::malloc;
  TaggedAddress address;
  Bytes size = 0;       // malloc only
  std::string op_scope; // malloc only
  TimeIndex time = 0;

  static AllocEvent make_malloc(TimeIndex time, TaggedAddress addr, Bytes size,
                                std::string op) {
    return {EventKind::malloc, addr, size, std::move(op), time};
  }
  static AllocEvent make_free(TimeIndex time, TaggedAddress addr) {
    return {EventKind::free, addr, 0, {}, time};
  }
};

/// Pairs every free with its malloc through the pointer tag and returns one
/// record per malloc, with id = tag.
///
/// Each malloc is issued the counter's next tag. A malloc address may be a
/// raw canonical pointer or may already carry that same tag; anything else is
/// a TagMismatch. A free at the malloc's own timestep still occupies that
/// step, so its lifetime is [t, t + 1). Mallocs never freed live until one
/// past the last event time and are marked escaped.
inline Trace bracket_lifetimes(std::span<const AllocEvent> events, TagCounter &counter) {
  enum class State : std::uint8_t { unseen, live, freed };
  std::vector<State> state(TagCounter::kLimit, State::unseen);
  std::vector<std::size_t> slot(TagCounter::kLimit, 0);
  std::vector<AllocationRecord> records;

  TimeIndex last_time = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto &ev = events[i];
    if (ev.time < 0)
      throw Error(Errc::negative_time, "event " + std::to_string(i) + " has negative time");
    if (i > 0 && ev.time < last_time)
      throw Error(Errc::unordered_events,
                  "event " + std::to_string(i) + " goes back in time");
    last_time = ev.time;

    if (ev.kind == EventKind::malloc) {
      if (ev.size == 0)
        throw Error(Errc::non_positive_size, "malloc event " + std::to_string(i) + " has size 0");
      const Tag tag = counter.issue();
      const auto word = ev.address.word();
      if (!is_canonical(word) && ev.address.tag() != tag)
        throw Error(Errc::tag_mismatch, "malloc event " + std::to_string(i) + " carries tag " +
                                            std::to_string(ev.address.tag()) + ", expected " +
                                            std::to_string(tag));
      state[tag] = State::live;
      slot[tag] = records.size();
      AllocationRecord r;
      r.id = tag;
      r.size = ev.size;
      r.lifetime = {ev.time, -1};
      r.op_scope = ev.op_scope;
      records.push_back(std::move(r));
    } else {
      const Tag tag = ev.address.tag();
      switch (state[tag]) {
      case State::unseen:
        throw Error(Errc::unmatched_free, "tag " + std::to_string(tag));
      case State::freed:
        throw Error(Errc::double_free, "tag " + std::to_string(tag));
      case State::live:
        break;
      }
      state[tag] = State::freed;
      auto &r = records[slot[tag]];
      r.lifetime.end = std::max(ev.time, r.lifetime.start + 1);
    }
  }

  const TimeIndex exit_time = events.empty() ? 0 : last_time + 1;
  for (auto &r : records) {
    if (r.lifetime.end < 0) {
      r.lifetime.end = exit_time;
      r.escaped = true;
    }
  }
  return validate_trace(std::move(records), "bracketed");
}

inline Trace bracket_lifetimes(std::span<const AllocEvent> events) {
  TagCounter counter;
  return bracket_lifetimes(events, counter);
}

// Event stream I/O ----------------------------------------------------------

inline std::string format_address(std::uint64_t word) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s = "0x0000000000000000";
  for (int i = 0; i < 16; ++i)
    s[17 - i] = kHex[(word >> (4 * i)) & 0xf];
  return s;
}

inline std::optional<std::uint64_t> parse_address(const std::string &text) {
  std::string_view s = text;
  if (s.starts_with("0x") || s.starts_with("0X"))
    s.remove_prefix(2);
  if (s.empty() || s.size() > 16)
    return std::nullopt;
  std::uint64_t value = 0;
  for (char c : s) {
    unsigned digit;
    if (c >= '0' && c <= '9')
      digit = static_cast<unsigned>(c - '0');
    else if (c >= 'a' && c <= 'f')
      digit = static_cast<unsigned>(c - 'a' + 10);
    else if (c >= 'A' && c <= 'F')
      digit = static_cast<unsigned>(c - 'A' + 10);
    else
      return std::nullopt;
    value = (value << 4) | digit;
  }
  return value;
}

inline std::vector<AllocEvent> read_events_jsonl(std::istream &in) {
  std::vector<AllocEvent> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_blank(line))
      continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error &e) {
      detail::parse_fail(line_no, std::string("invalid JSON (") + e.what() + ")");
    }
    if (!obj.is_object())
      detail::parse_fail(line_no, "expected a JSON object");

    const auto kind = detail::require_field<std::string>(obj, "kind", line_no);
    const auto addr_text = detail::require_field<std::string>(obj, "addr", line_no);
    const auto addr = parse_address(addr_text);
    if (!addr)
      detail::parse_fail(line_no, "'addr' is not a 64-bit hex value");
    const auto time = detail::require_int(obj, "time", line_no);

    if (kind == "malloc") {
      const auto size = detail::require_int(obj, "size", line_no);
      if (size <= 0)
        detail::parse_fail(line_no, "malloc size must be positive");
      events.push_back(AllocEvent::make_malloc(time, TaggedAddress(*addr),
                                               static_cast<Bytes>(size),
                                               detail::require_field<std::string>(obj, "op", line_no)));
    } else if (kind == "free") {
      events.push_back(AllocEvent::make_free(time, TaggedAddress(*addr)));
    } else {
      detail::parse_fail(line_no, "'kind' must be \"malloc\" or \"free\"");
    }
  }
  return events;
}

inline void write_events_jsonl(std::span<const AllocEvent> events, std::ostream &out) {
  for (const auto &ev : events) {
    nlohmann::ordered_json obj;
    obj["kind"] = ev.kind == EventKind::malloc ? "malloc" : "free";
    obj["addr"] = format_address(ev.address.word());
    if (ev.kind == EventKind::malloc) {
      obj["size"] = ev.size;
      obj["op"] = ev.op_scope;
    }
    obj["time"] = ev.time;
    out << obj.dump() << '\n';
  }
}

} // namespace memoplan
