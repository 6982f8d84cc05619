#pragma once

#include <algorithm>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "memoplan/error.hpp"
#include "memoplan/plan.hpp"
#include "memoplan/trace.hpp"

namespace memoplan {

using NodeId = std::int64_t;
using ValueId = std::int64_t;

struct OpNode {
  NodeId id = 0;
  std::string name;
  std::vector<ValueId> inputs;
  std::vector<ValueId> outputs;
  /// Records allocated within this operator, in request order.
  std::vector<RecordId> alloc_group;
};

/// A small dataflow DAG plus the schedule it currently runs in.
///
/// Values are produced by at most one node; values with no producer are graph
/// inputs. `backing` says which value a record materializes; records backing
/// nothing are scratch space.
class OpGraph {
public:
  OpGraph() = default;

  OpGraph(std::vector<OpNode> nodes, std::vector<NodeId> schedule,
          std::map<RecordId, ValueId> backing = {})
      : nodes_(std::move(nodes)), backing_(std::move(backing)) {
    index_nodes();
    set_schedule(std::move(schedule));
  }

  const std::vector<OpNode> &nodes() const { return nodes_; }
  const std::vector<NodeId> &schedule() const { return schedule_; }
  const std::map<RecordId, ValueId> &backing() const { return backing_; }

  const OpNode &node(NodeId id) const { return nodes_[index_of(id)]; }
  bool has_node(NodeId id) const { return index_.contains(id); }

  std::optional<NodeId> node_named(const std::string &name) const {
    if (auto it = by_name_.find(name); it != by_name_.end())
      return nodes_[it->second].id;
    return std::nullopt;
  }

  /// Producer -> consumer pairs, one per consumed value.
  std::vector<std::pair<NodeId, NodeId>> edges() const {
    std::vector<std::pair<NodeId, NodeId>> out;
    for (const auto &n : nodes_)
      for (ValueId v : n.inputs)
        if (auto it = producer_.find(v); it != producer_.end())
          out.emplace_back(nodes_[it->second].id, n.id);
    return out;
  }

  std::vector<NodeId> consumers_of(ValueId v) const {
    std::vector<NodeId> out;
    for (const auto &n : nodes_)
      if (std::find(n.inputs.begin(), n.inputs.end(), v) != n.inputs.end())
        out.push_back(n.id);
    return out;
  }

  /// Position of every node in the current schedule.
  std::unordered_map<NodeId, TimeIndex> positions() const {
    std::unordered_map<NodeId, TimeIndex> pos;
    for (std::size_t p = 0; p < schedule_.size(); ++p)
      pos[schedule_[p]] = static_cast<TimeIndex>(p);
    return pos;
  }

  /// Replaces the schedule after checking it is a topological order of the
  /// same nodes.
  void set_schedule(std::vector<NodeId> schedule) {
    if (schedule.size() != nodes_.size())
      throw Error(Errc::illegal_schedule, "schedule must list every node exactly once");
    std::unordered_map<NodeId, std::size_t> pos;
    for (std::size_t p = 0; p < schedule.size(); ++p) {
      if (!has_node(schedule[p]))
        throw Error(Errc::illegal_schedule, "unknown node " + std::to_string(schedule[p]));
      if (!pos.emplace(schedule[p], p).second)
        throw Error(Errc::illegal_schedule, "node " + std::to_string(schedule[p]) + " listed twice");
    }
    for (const auto &[from, to] : edges())
      if (pos.at(from) >= pos.at(to))
        throw Error(Errc::illegal_schedule, "node " + std::to_string(to) + " runs before its producer " +
                                                std::to_string(from));
    schedule_ = std::move(schedule);
  }

private:
  std::size_t index_of(NodeId id) const {
    auto it = index_.find(id);
    if (it == index_.end())
      throw Error(Errc::invalid_graph, "unknown node " + std::to_string(id));
    return it->second;
  }

  void index_nodes() {
    std::unordered_set<RecordId> owned;
    std::unordered_map<RecordId, std::size_t> owner;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto &n = nodes_[i];
      if (!index_.emplace(n.id, i).second)
        throw Error(Errc::invalid_graph, "duplicate node id " + std::to_string(n.id));
      if (!by_name_.emplace(n.name, i).second)
        throw Error(Errc::invalid_graph, "duplicate node name '" + n.name + "'");
      for (ValueId v : n.outputs)
        if (!producer_.emplace(v, i).second)
          throw Error(Errc::invalid_graph, "value " + std::to_string(v) + " has two producers");
      for (RecordId r : n.alloc_group) {
        if (!owned.insert(r).second)
          throw Error(Errc::invalid_graph, "record " + std::to_string(r) + " is in two alloc groups");
        owner[r] = i;
      }
    }
    for (const auto &[record, value] : backing_) {
      auto it = producer_.find(value);
      auto own = owner.find(record);
      if (it == producer_.end() || own == owner.end() || it->second != own->second)
        throw Error(Errc::invalid_graph, "record " + std::to_string(record) +
                                             " must back an output of the node that allocates it");
    }
    // Kahn's algorithm: a cycle leaves nodes with unresolved inputs.
    std::vector<std::size_t> indegree(nodes_.size(), 0);
    std::vector<std::vector<std::size_t>> out(nodes_.size());
    for (const auto &[from, to] : edges()) {
      out[index_.at(from)].push_back(index_.at(to));
      ++indegree[index_.at(to)];
    }
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (indegree[i] == 0)
        ready.push_back(i);
    std::size_t seen = 0;
    while (!ready.empty()) {
      const auto i = ready.back();
      ready.pop_back();
      ++seen;
      for (auto j : out[i])
        if (--indegree[j] == 0)
          ready.push_back(j);
    }
    if (seen != nodes_.size())
      throw Error(Errc::invalid_graph, "graph has a cycle");
  }

  std::vector<OpNode> nodes_;
  std::vector<NodeId> schedule_;
  std::map<RecordId, ValueId> backing_;
  std::unordered_map<NodeId, std::size_t> index_;
  std::unordered_map<std::string, std::size_t> by_name_;
  std::unordered_map<ValueId, std::size_t> producer_;
};

inline OpGraph reorder(const OpGraph &graph, std::vector<NodeId> new_schedule) {
  OpGraph out = graph;
  out.set_schedule(std::move(new_schedule));
  return out;
}

/// Calls `visit` with every topological order of the graph, in lexicographic
/// order of node ids. Stops early when `visit` returns false.
inline void for_each_topological_order(const OpGraph &graph,
                                       const std::function<bool(const std::vector<NodeId> &)> &visit) {
  std::vector<NodeId> ids;
  for (const auto &n : graph.nodes())
    ids.push_back(n.id);
  std::sort(ids.begin(), ids.end());
  std::unordered_map<NodeId, std::size_t> indegree;
  std::unordered_map<NodeId, std::vector<NodeId>> out;
  for (auto id : ids)
    indegree[id] = 0;
  for (const auto &[from, to] : graph.edges()) {
    out[from].push_back(to);
    ++indegree[to];
  }
  std::vector<NodeId> order;
  std::unordered_set<NodeId> used;
  bool stop = false;
  std::function<void()> rec = [&] {
    if (stop)
      return;
    if (order.size() == ids.size()) {
      stop = !visit(order);
      return;
    }
    for (auto id : ids) {
      if (used.contains(id) || indegree[id] != 0)
        continue;
      used.insert(id);
      order.push_back(id);
      for (auto t : out[id])
        --indegree[t];
      rec();
      for (auto t : out[id])
        ++indegree[t];
      order.pop_back();
      used.erase(id);
      if (stop)
        return;
    }
  };
  rec();
}

namespace detail {

/// Lifetime of a record owned by the node at `owner_pos` under the graph's
/// schedule: from its owner up to one past its last consumer, or a single
/// step when nothing reads it.
inline LifetimeInterval scheduled_lifetime(const OpGraph &graph,
                                           const std::unordered_map<NodeId, TimeIndex> &pos,
                                           RecordId record, TimeIndex owner_pos) {
  TimeIndex end = owner_pos + 1;
  if (auto it = graph.backing().find(record); it != graph.backing().end())
    for (NodeId c : graph.consumers_of(it->second))
      end = std::max(end, pos.at(c) + 1);
  return {owner_pos, end};
}

inline NodeId owner_of(const OpGraph &graph, const AllocationRecord &r) {
  auto id = graph.node_named(r.op_scope);
  if (!id)
    throw Error(Errc::unscoped_record, "record " + std::to_string(r.id) + " has op scope '" +
                                           r.op_scope + "' which names no node");
  return *id;
}

} // namespace detail

/// Recomputes every record's lifetime from the graph's current schedule.
inline Trace replan_lifetimes(const OpGraph &graph, const Trace &trace) {
  const auto pos = graph.positions();
  std::vector<AllocationRecord> records = trace.records;
  for (auto &r : records)
    r.lifetime = detail::scheduled_lifetime(graph, pos, r.id, pos.at(detail::owner_of(graph, r)));
  return validate_trace(std::move(records), trace.source);
}

/// One AllocateTensor entry: a planned slice of the slab.
struct ScopedTriple {
  RecordId record;
  Bytes offset;
  Bytes size;
  /// The operator writes straight into this slice (out variant) rather than
  /// having the allocation queued for an implicit request.
  bool out_variant = false;

  friend bool operator==(const ScopedTriple &, const ScopedTriple &) = default;
};

/// The AllocateSlab size plus, per operator, the slices it draws.
struct ScopedPlan {
  Bytes slab_size = 0;
  std::map<NodeId, std::vector<ScopedTriple>> per_node;
};

namespace detail {

inline bool is_output_of(const OpNode &n, const OpGraph &g, RecordId r) {
  auto it = g.backing().find(r);
  return it != g.backing().end() &&
         std::find(n.outputs.begin(), n.outputs.end(), it->second) != n.outputs.end();
}

/// Records grouped by owning node, each group in alloc_group order with any
/// unlisted records after it by id.
inline std::map<NodeId, std::vector<const AllocationRecord *>>
group_by_owner(const OpGraph &graph, const Trace &trace) {
  std::map<NodeId, std::vector<const AllocationRecord *>> groups;
  for (const auto &n : graph.nodes())
    groups[n.id];
  for (const auto &r : trace.records)
    groups[owner_of(graph, r)].push_back(&r);
  for (auto &[node, recs] : groups) {
    const auto &group = graph.node(node).alloc_group;
    auto rank = [&](const AllocationRecord *r) {
      auto it = std::find(group.begin(), group.end(), r->id);
      return std::pair(static_cast<std::size_t>(it - group.begin()), r->id);
    };
    std::sort(recs.begin(), recs.end(), [&](auto *a, auto *b) { return rank(a) < rank(b); });
  }
  return groups;
}

} // namespace detail

/// Attaches the plan's offsets to the operators that request them.
inline ScopedPlan scope_plan(const OpGraph &graph, const Trace &trace, const Plan &plan) {
  ScopedPlan scoped;
  scoped.slab_size = plan.total_size;
  const std::unordered_set<RecordId> unmanaged(plan.unmanaged.begin(), plan.unmanaged.end());
  for (const auto &[node, recs] : detail::group_by_owner(graph, trace)) {
    auto &triples = scoped.per_node[node];
    for (const auto *r : recs) {
      if (unmanaged.contains(r->id))
        continue;
      auto it = plan.offsets.find(r->id);
      if (it == plan.offsets.end())
        throw Error(Errc::missing_offset, "plan has no offset for record " + std::to_string(r->id));
      triples.push_back({r->id, it->second, r->size,
                         detail::is_output_of(graph.node(node), graph, r->id)});
    }
  }
  return scoped;
}

/// Recovers the flat plan a scoped plan was built from.
inline Plan flatten(const ScopedPlan &scoped, const Plan &like) {
  Plan plan;
  plan.strategy = like.strategy;
  plan.alignment = like.alignment;
  plan.unmanaged = like.unmanaged;
  plan.total_size = scoped.slab_size;
  for (const auto &[node, triples] : scoped.per_node)
    for (const auto &t : triples)
      plan.offsets.emplace(t.record, t.offset);
  return plan;
}

/// The brittle alternative to scoping: offsets are handed out by request
/// rank. The k-th allocation requested under `reordered` gets the offset the
/// k-th request received when `plan` was made for `original`.
inline ScopedPlan order_based_replay(const OpGraph &original, const OpGraph &reordered,
                                     const Trace &trace, const Plan &plan) {
  auto request_order = [&](const OpGraph &g) {
    const auto groups = detail::group_by_owner(g, trace);
    std::vector<const AllocationRecord *> seq;
    for (NodeId n : g.schedule())
      for (const auto *r : groups.at(n))
        seq.push_back(r);
    return seq;
  };
  const auto before = request_order(original);
  const auto after = request_order(reordered);

  ScopedPlan scoped;
  scoped.slab_size = plan.total_size;
  for (const auto &n : reordered.nodes())
    scoped.per_node[n.id];
  for (std::size_t k = 0; k < after.size(); ++k) {
    const auto *r = after[k];
    const Bytes offset = plan.offsets.at(before[k]->id);
    const NodeId owner = detail::owner_of(reordered, *r);
    scoped.per_node[owner].push_back(
        {r->id, offset, r->size, detail::is_output_of(reordered.node(owner), reordered, r->id)});
  }
  return scoped;
}

enum class AccessKind { allocate_out, allocate_queued, read };
enum class Verdict { ok, illegal };

struct AccessEvent {
  TimeIndex time;
  NodeId node;
  RecordId record;
  Bytes address_begin;
  Bytes address_end;
  AccessKind kind;
  Verdict verdict;
};

struct AccessLog {
  std::vector<AccessEvent> events;

  std::size_t illegal_count() const {
    return static_cast<std::size_t>(std::count_if(events.begin(), events.end(), [](const auto &e) {
      return e.verdict == Verdict::illegal;
    }));
  }
};

/// Executes the schedule against a slab based at address 0. Each node draws
/// its triples and reads the records backing its inputs; an access is illegal
/// when its slice intersects another record live at the same step.
inline AccessLog simulate(const OpGraph &graph, const ScopedPlan &scoped) {
  const auto pos = graph.positions();
  struct Live {
    ScopedTriple triple;
    NodeId owner;
    LifetimeInterval lifetime;
  };
  std::vector<Live> live;
  std::unordered_map<RecordId, std::size_t> by_record;
  for (const auto &[node, triples] : scoped.per_node) {
    if (!graph.has_node(node))
      throw Error(Errc::invalid_graph, "scoped plan names unknown node " + std::to_string(node));
    for (const auto &t : triples) {
      by_record[t.record] = live.size();
      live.push_back({t, node, detail::scheduled_lifetime(graph, pos, t.record, pos.at(node))});
    }
  }

  std::unordered_map<ValueId, RecordId> value_record;
  for (const auto &[record, value] : graph.backing())
    value_record[value] = record;

  auto verdict_at = [&](std::size_t idx, TimeIndex t) {
    const auto &a = live[idx];
    for (std::size_t j = 0; j < live.size(); ++j) {
      if (j == idx || !live[j].lifetime.contains(t))
        continue;
      const auto &b = live[j].triple;
      if (a.triple.offset < b.offset + b.size && b.offset < a.triple.offset + a.triple.size)
        return Verdict::illegal;
    }
    return Verdict::ok;
  };

  AccessLog log;
  for (std::size_t p = 0; p < graph.schedule().size(); ++p) {
    const NodeId node = graph.schedule()[p];
    const auto t = static_cast<TimeIndex>(p);
    const auto emit = [&](std::size_t idx, AccessKind kind) {
      const auto &tr = live[idx].triple;
      log.events.push_back({t, node, tr.record, tr.offset, tr.offset + tr.size, kind, verdict_at(idx, t)});
    };
    for (ValueId v : graph.node(node).inputs)
      if (auto it = value_record.find(v); it != value_record.end())
        if (auto rec = by_record.find(it->second); rec != by_record.end())
          emit(rec->second, AccessKind::read);
    if (auto it = scoped.per_node.find(node); it != scoped.per_node.end())
      for (const auto &tr : it->second)
        emit(by_record.at(tr.record),
             tr.out_variant ? AccessKind::allocate_out : AccessKind::allocate_queued);
  }
  return log;
}

// Fixture I/O ---------------------------------------------------------------

struct GraphFixture {
  OpGraph graph;
  /// Records with lifetimes derived from the fixture's schedule.
  Trace trace;
};

/// Reads a graph fixture:
/// {"nodes": [{"id", "name", "inputs", "outputs",
///             "allocs": [{"id", "size", "backs"?}]}], "schedule": [ids]}
inline GraphFixture read_graph_json(std::istream &in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error &e) {
    throw Error(Errc::parse, std::string("graph file: ") + e.what());
  }
  try {
    std::vector<OpNode> nodes;
    std::map<RecordId, ValueId> backing;
    std::vector<AllocationRecord> records;
    for (const auto &jn : j.at("nodes")) {
      OpNode n;
      n.id = jn.at("id").get<NodeId>();
      n.name = jn.at("name").get<std::string>();
      n.inputs = jn.value("inputs", std::vector<ValueId>{});
      n.outputs = jn.value("outputs", std::vector<ValueId>{});
      for (const auto &ja : jn.value("allocs", nlohmann::json::array())) {
        AllocationRecord r;
        r.id = ja.at("id").get<RecordId>();
        r.size = ja.at("size").get<Bytes>();
        r.op_scope = n.name;
        r.lifetime = {0, 1};
        n.alloc_group.push_back(r.id);
        if (ja.contains("backs"))
          backing[r.id] = ja.at("backs").get<ValueId>();
        records.push_back(std::move(r));
      }
      nodes.push_back(std::move(n));
    }
    OpGraph graph(std::move(nodes), j.at("schedule").get<std::vector<NodeId>>(), std::move(backing));
    auto trace = replan_lifetimes(graph, validate_trace(std::move(records), "graph"));
    return {std::move(graph), std::move(trace)};
  } catch (const nlohmann::json::exception &e) {
    throw Error(Errc::parse, std::string("graph file: ") + e.what());
  }
}

} // namespace memoplan
