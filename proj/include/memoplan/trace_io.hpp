#pragma once

#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "memoplan/error.hpp"
#include "memoplan/trace.hpp"

namespace memoplan {

namespace detail {

inline bool is_blank(const std::string &line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

[[noreturn]] inline void parse_fail(std::size_t line_no, const std::string &msg) {
  throw Error(Errc::parse, "line " + std::to_string(line_no) + ": " + msg);
}

template <typename T>
T require_field(const nlohmann::json &obj, const char *key, std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end())
    parse_fail(line_no, std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception &) {
    parse_fail(line_no, std::string("field '") + key + "' has the wrong type");
  }
}

inline std::int64_t require_int(const nlohmann::json &obj, const char *key,
                                std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end())
    parse_fail(line_no, std::string("missing field '") + key + "'");
  if (!it->is_number_integer())
    parse_fail(line_no, std::string("field '") + key + "' must be an integer");
  return it->get<std::int64_t>();
}

} // namespace detail

/// Reads a JSON Lines trace. Blank lines are skipped; any other malformed
/// line is rejected with its 1-based line number.
inline Trace read_trace_jsonl(std::istream &in, std::string source = {}) {
  std::vector<AllocationRecord> records;
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

    const auto id = detail::require_int(obj, "id", line_no);
    const auto size = detail::require_int(obj, "size", line_no);
    if (id < 0)
      detail::parse_fail(line_no, "id must be non-negative");
    if (size < 0)
      detail::parse_fail(line_no, "size must be non-negative");
    if (id > std::int64_t{kMaxRecordId})
      throw Error(Errc::id_overflow, "line " + std::to_string(line_no) + ": id " +
                                         std::to_string(id) + " does not fit in 16 bits");
    AllocationRecord r;
    r.id = static_cast<RecordId>(id);
    r.size = static_cast<Bytes>(size);
    r.lifetime.start = detail::require_int(obj, "start", line_no);
    r.lifetime.end = detail::require_int(obj, "end", line_no);
    r.op_scope = detail::require_field<std::string>(obj, "op", line_no);
    if (auto it = obj.find("escaped"); it != obj.end()) {
      if (!it->is_boolean())
        detail::parse_fail(line_no, "field 'escaped' must be a boolean");
      r.escaped = it->get<bool>();
    }
    records.push_back(std::move(r));
  }
  return validate_trace(std::move(records), std::move(source));
}

inline void write_trace_jsonl(const Trace &trace, std::ostream &out) {
  for (const auto &r : trace.records) {
    nlohmann::ordered_json obj;
    obj["id"] = r.id;
    obj["size"] = r.size;
    obj["start"] = r.lifetime.start;
    obj["end"] = r.lifetime.end;
    obj["op"] = r.op_scope;
    if (r.escaped)
      obj["escaped"] = true;
    out << obj.dump() << '\n';
  }
}

} // namespace memoplan
