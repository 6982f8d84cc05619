#pragma once

#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "memoplan/error.hpp"
#include "memoplan/plan.hpp"

namespace memoplan {

inline nlohmann::ordered_json plan_to_json(const Plan &plan, bool with_time = true) {
  nlohmann::ordered_json j;
  j["strategy"] = plan.strategy;
  j["alignment"] = plan.alignment;
  j["total_size"] = plan.total_size;
  nlohmann::ordered_json offsets = nlohmann::ordered_json::object();
  // Keys are unique and already sorted; append without the linear key lookup.
  auto &entries = offsets.get_ref<nlohmann::ordered_json::object_t &>();
  entries.reserve(plan.offsets.size());
  for (const auto &[id, off] : plan.offsets)
    entries.std::vector<std::pair<const std::string, nlohmann::ordered_json>>::emplace_back(
        std::to_string(id), off);
  j["offsets"] = std::move(offsets);
  if (!plan.unmanaged.empty())
    j["unmanaged"] = plan.unmanaged;
  if (with_time)
    j["planning_time_ms"] = plan.planning_time_ms;
  return j;
}

inline void write_plan_json(const Plan &plan, std::ostream &out) {
  out << plan_to_json(plan).dump(2) << '\n';
}

inline Plan read_plan_json(std::istream &in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error &e) {
    throw Error(Errc::parse, std::string("plan file: ") + e.what());
  }
  try {
    Plan plan;
    plan.strategy = j.at("strategy").get<std::string>();
    plan.alignment = j.at("alignment").get<Bytes>();
    plan.total_size = j.at("total_size").get<Bytes>();
    for (const auto &[key, value] : j.at("offsets").items()) {
      std::size_t used = 0;
      const auto id = std::stoul(key, &used);
      if (used != key.size() || id > kMaxRecordId)
        throw Error(Errc::parse, "plan file: bad record id '" + key + "'");
      plan.offsets.emplace(static_cast<RecordId>(id), value.get<Bytes>());
    }
    if (auto it = j.find("unmanaged"); it != j.end())
      plan.unmanaged = it->get<std::vector<RecordId>>();
    if (auto it = j.find("planning_time_ms"); it != j.end())
      plan.planning_time_ms = it->get<double>();
    return plan;
  } catch (const nlohmann::json::exception &e) {
    throw Error(Errc::parse, std::string("plan file: ") + e.what());
  } catch (const std::logic_error &) {
    throw Error(Errc::parse, "plan file: bad record id");
  }
}

} // namespace memoplan
