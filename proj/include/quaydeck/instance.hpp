#ifndef QUAYDECK_INSTANCE_HPP_
#define QUAYDECK_INSTANCE_HPP_

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "quaydeck/error.hpp"
#include "quaydeck/json_util.hpp"
#include "quaydeck/rng.hpp"

namespace quaydeck {

/// Width of the binary QC-id code in the observation; bounds the QC count.
inline constexpr int kMaxQcs = 32;

using NodeId = int;

enum class NodeKind { Qc, Yard, Depot };

/// Import yards receive unloaded containers; export yards supply loading tasks.
enum class YardClass { Import, Export };

struct LayoutNode {
  NodeId id = 0;
  NodeKind kind = NodeKind::Qc;
  int index = 0;  // position within its kind (QC number, yard number, 0 for the depot)
  int x = 0;      // grid cell coordinates
  int y = 0;
  YardClass yard_class = YardClass::Import;  // meaningful for yards only

  bool operator==(const LayoutNode&) const = default;
};

enum class TaskType { Loading, Unloading };

/// One container move. Loading: yard -> QC. Unloading: QC -> yard.
struct TaskSpec {
  int qc_index = 0;
  int order_index = 0;
  TaskType type = TaskType::Loading;
  int yard_index = 0;

  bool operator==(const TaskSpec&) const = default;
};

struct CongestionModel {
  bool enabled = false;
  /// Travel time multiplier is 1 + factor * (trucks already inbound to the
  /// destination yard column).
  double factor = 0.1;

  bool operator==(const CongestionModel&) const = default;
};

struct DistributionParams {
  TruncatedNormal speed_empty{6.0, 1.0, 3.0, 9.0};   // m/s
  TruncatedNormal speed_loaded{5.0, 0.8, 2.5, 7.5};  // m/s
  TruncatedNormal qc_service{120.0, 20.0, 60.0, 200.0};   // s
  TruncatedNormal yard_service{90.0, 20.0, 40.0, 180.0};  // s
  CongestionModel congestion;

  void validate() const {
    speed_empty.validate("speed_empty");
    speed_loaded.validate("speed_loaded");
    qc_service.validate("qc_service");
    yard_service.validate("yard_service");
    if (!(congestion.factor >= 0.0)) throw ConfigError("congestion.factor must be >= 0");
  }

  bool operator==(const DistributionParams&) const = default;
};

/// Static world of one terminal: layout, per-QC task lists and the
/// distributions of every stochastic duration. Immutable once built.
struct TerminalInstance {
  int qc_count = 0;
  int yard_count = 0;
  int truck_count = 0;
  double cell_size_m = 10.0;
  std::vector<LayoutNode> nodes;
  std::vector<std::vector<TaskSpec>> task_lists;
  DistributionParams dist;
  std::uint64_t seed = 0;

  NodeId qc_node(int q) const { return q; }
  NodeId yard_node(int y) const { return qc_count + y; }
  NodeId depot_node() const { return qc_count + yard_count; }
  int node_count() const { return qc_count + yard_count + 1; }

  int total_tasks() const {
    int n = 0;
    for (const auto& list : task_lists) n += static_cast<int>(list.size());
    return n;
  }

  /// Node the truck must reach first (the empty leg's destination).
  NodeId first_node(const TaskSpec& t) const {
    return t.type == TaskType::Loading ? yard_node(t.yard_index) : qc_node(t.qc_index);
  }
  NodeId second_node(const TaskSpec& t) const {
    return t.type == TaskType::Loading ? qc_node(t.qc_index) : yard_node(t.yard_index);
  }

  /// Extent of the QC line in meters; the distance normalizer for features.
  double berth_length_m() const {
    int lo = 0, hi = 0;
    bool first = true;
    for (const auto& n : nodes) {
      if (n.kind != NodeKind::Qc) continue;
      lo = first ? n.x : std::min(lo, n.x);
      hi = first ? n.x : std::max(hi, n.x);
      first = false;
    }
    const double span = static_cast<double>(hi - lo) * cell_size_m;
    return std::max(span, cell_size_m);
  }

  void validate() const;

  bool operator==(const TerminalInstance&) const = default;
};

/// Manhattan distance in meters between two nodes.
inline double distance(const TerminalInstance& inst, NodeId a, NodeId b) {
  const int n = static_cast<int>(inst.nodes.size());
  if (a < 0 || a >= n) throw NotFound("unknown node id " + std::to_string(a));
  if (b < 0 || b >= n) throw NotFound("unknown node id " + std::to_string(b));
  const auto& na = inst.nodes[static_cast<std::size_t>(a)];
  const auto& nb = inst.nodes[static_cast<std::size_t>(b)];
  const int cells = std::abs(na.x - nb.x) + std::abs(na.y - nb.y);
  return static_cast<double>(cells) * inst.cell_size_m;
}

inline void TerminalInstance::validate() const {
  if (qc_count <= 0) throw ValidationError("qc_count must be positive");
  if (qc_count > kMaxQcs)
    throw ValidationError("qc_count " + std::to_string(qc_count) + " exceeds the " +
                          std::to_string(kMaxQcs) + "-QC id-code width");
  if (yard_count <= 0) throw ValidationError("yard_count must be positive");
  if (truck_count <= 0) throw ValidationError("truck_count must be positive");
  if (!(cell_size_m > 0.0) || cell_size_m != std::round(cell_size_m))
    throw ValidationError("cell_size_m must be a positive whole number of meters");
  if (static_cast<int>(nodes.size()) != node_count())
    throw ValidationError("node list must hold qc_count + yard_count + 1 nodes");
  std::set<std::pair<int, int>> cells;
  for (int i = 0; i < node_count(); ++i) {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    if (n.id != i) throw ValidationError("node ids must be dense and ordered");
    const NodeKind want = i < qc_count ? NodeKind::Qc : i < qc_count + yard_count ? NodeKind::Yard
                                                                                   : NodeKind::Depot;
    if (n.kind != want) throw ValidationError("node " + std::to_string(i) + " has the wrong kind");
    if (!cells.insert({n.x, n.y}).second)
      throw ValidationError("node " + std::to_string(i) + " shares a cell with another node");
  }
  if (static_cast<int>(task_lists.size()) != qc_count)
    throw ValidationError("task_lists must have one list per QC");
  for (int q = 0; q < qc_count; ++q) {
    const auto& list = task_lists[static_cast<std::size_t>(q)];
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto& t = list[i];
      if (t.qc_index != q || t.order_index != static_cast<int>(i))
        throw ValidationError("task " + std::to_string(i) + " of QC " + std::to_string(q) +
                              " has inconsistent indices");
      if (t.yard_index < 0 || t.yard_index >= yard_count)
        throw ValidationError("task " + std::to_string(i) + " of QC " + std::to_string(q) +
                              " references yard " + std::to_string(t.yard_index) +
                              " outside [0, " + std::to_string(yard_count) + ")");
    }
  }
  if (truck_count < qc_count) throw ValidationError("truck_count must be >= qc_count");
  const int total = total_tasks();
  if (total > 0 && truck_count > total) throw ValidationError("truck_count must be <= task count");
  dist.validate();
}

struct GeneratorConfig {
  int qc_count = 4;
  int yard_count = 12;
  int task_count = 80;
  int truck_count = 10;
  int cell_size_m = 10;
  int qc_spacing_cells = 8;
  int yard_offset_cells = 8;   // berth line to first yard row
  int yard_row_spacing_cells = 6;
  int yard_rows = 0;           // 0 = choose from yard_count
  DistributionParams dist;

  void validate() const {
    if (qc_count <= 0 || yard_count <= 0 || task_count <= 0 || truck_count <= 0)
      throw ConfigError("generator counts must be positive");
    if (qc_count > kMaxQcs)
      throw ConfigError("qc_count " + std::to_string(qc_count) + " exceeds the maximum of " +
                        std::to_string(kMaxQcs));
    if (task_count < qc_count) throw ConfigError("task_count must be >= qc_count");
    if (truck_count < qc_count || truck_count > task_count)
      throw ConfigError("truck_count must lie in [qc_count, task_count]");
    if (cell_size_m <= 0 || qc_spacing_cells <= 0 || yard_offset_cells <= 0 ||
        yard_row_spacing_cells <= 0 || yard_rows < 0)
      throw ConfigError("layout spacings must be positive");
    dist.validate();
  }
};

/// Desk-scale instance used by the acceptance suite.
inline GeneratorConfig desk_config() { return GeneratorConfig{}; }

/// Builds a terminal: QCs evenly spaced on the berth line y = 0, yards on a
/// grid behind it with import/export blocks in a checkerboard, the depot at
/// the far corner. Task lists are near-uniform in size and type-homogeneous.
inline TerminalInstance generate_instance(const GeneratorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng = make_rng(seed, "instance");

  TerminalInstance inst;
  inst.qc_count = cfg.qc_count;
  inst.yard_count = cfg.yard_count;
  inst.truck_count = cfg.truck_count;
  inst.cell_size_m = cfg.cell_size_m;
  inst.dist = cfg.dist;
  inst.seed = seed;

  const int berth_cells = cfg.qc_count * cfg.qc_spacing_cells;
  for (int q = 0; q < cfg.qc_count; ++q) {
    inst.nodes.push_back(
        {q, NodeKind::Qc, q, q * cfg.qc_spacing_cells + cfg.qc_spacing_cells / 2, 0, YardClass::Import});
  }

  int rows = cfg.yard_rows;
  if (rows == 0) rows = std::max(1, static_cast<int>(std::lround(std::sqrt(cfg.yard_count / 3.0))));
  rows = std::min(rows, cfg.yard_count);
  const int cols = (cfg.yard_count + rows - 1) / rows;
  const int col_spacing = std::max(1, berth_cells / cols);
  int max_y = 0;
  for (int y = 0; y < cfg.yard_count; ++y) {
    const int r = y / cols;
    const int c = y % cols;
    const int gx = c * col_spacing + col_spacing / 2;
    const int gy = cfg.yard_offset_cells + r * cfg.yard_row_spacing_cells;
    max_y = std::max(max_y, gy);
    const YardClass cls = ((r + c) % 2 == 0) ? YardClass::Import : YardClass::Export;
    inst.nodes.push_back({cfg.qc_count + y, NodeKind::Yard, y, gx, gy, cls});
  }
  inst.nodes.push_back({cfg.qc_count + cfg.yard_count, NodeKind::Depot, 0, 0,
                        max_y + cfg.yard_row_spacing_cells, YardClass::Import});

  std::vector<int> import_yards, export_yards;
  for (int y = 0; y < cfg.yard_count; ++y) {
    const auto cls = inst.nodes[static_cast<std::size_t>(cfg.qc_count + y)].yard_class;
    (cls == YardClass::Import ? import_yards : export_yards).push_back(y);
  }
  if (import_yards.empty()) import_yards = export_yards;
  if (export_yards.empty()) export_yards = import_yards;

  // Half the QCs (rounded up) load, the rest unload; which ones is seeded.
  std::vector<int> qc_order(static_cast<std::size_t>(cfg.qc_count));
  std::iota(qc_order.begin(), qc_order.end(), 0);
  for (std::size_t i = qc_order.size(); i > 1; --i) std::swap(qc_order[i - 1], qc_order[uniform_index(rng, i)]);
  std::vector<TaskType> qc_type(static_cast<std::size_t>(cfg.qc_count), TaskType::Unloading);
  for (int k = 0; k < (cfg.qc_count + 1) / 2; ++k)
    qc_type[static_cast<std::size_t>(qc_order[static_cast<std::size_t>(k)])] = TaskType::Loading;

  const int base = cfg.task_count / cfg.qc_count;
  const int extra = cfg.task_count % cfg.qc_count;
  inst.task_lists.resize(static_cast<std::size_t>(cfg.qc_count));
  for (int q = 0; q < cfg.qc_count; ++q) {
    const int size = base + (q < extra ? 1 : 0);
    const TaskType type = qc_type[static_cast<std::size_t>(q)];
    const auto& pool = type == TaskType::Loading ? export_yards : import_yards;
    auto& list = inst.task_lists[static_cast<std::size_t>(q)];
    for (int i = 0; i < size; ++i) {
      list.push_back({q, i, type, pool[uniform_index(rng, pool.size())]});
    }
  }
  inst.validate();
  return inst;
}

// ---------------------------------------------------------------------------
// Serialization: "quaydeck-instance/1"

inline constexpr const char* kInstanceFormat = "quaydeck-instance/1";

namespace detail {

inline const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Qc: return "qc";
    case NodeKind::Yard: return "yard";
    case NodeKind::Depot: return "depot";
  }
  return "?";
}

inline Json truncated_normal_json(const TruncatedNormal& d) {
  return Json{{"mean", d.mean}, {"sd", d.sd}, {"min", d.min}, {"max", d.max}};
}

inline TruncatedNormal truncated_normal_from(const Json& j, const std::string& path) {
  return {field<double>(j, "mean", path), field<double>(j, "sd", path),
          field<double>(j, "min", path), field<double>(j, "max", path)};
}

}  // namespace detail

inline OrderedJson instance_to_json(const TerminalInstance& inst) {
  OrderedJson j;
  j["format"] = kInstanceFormat;
  j["meta"] = {{"qc_count", inst.qc_count},
               {"yard_count", inst.yard_count},
               {"truck_count", inst.truck_count},
               {"task_count", inst.total_tasks()},
               {"cell_size_m", inst.cell_size_m},
               {"units", {{"distance", "m"}, {"time", "s"}, {"speed", "m/s"}}}};
  OrderedJson nodes = OrderedJson::array();
  for (const auto& n : inst.nodes) {
    OrderedJson node = {{"id", n.id}, {"kind", detail::to_string(n.kind)}, {"index", n.index},
                        {"x", n.x}, {"y", n.y}};
    if (n.kind == NodeKind::Yard) node["class"] = n.yard_class == YardClass::Import ? "import" : "export";
    nodes.push_back(node);
  }
  j["nodes"] = nodes;
  OrderedJson lists = OrderedJson::array();
  for (const auto& list : inst.task_lists) {
    OrderedJson l = OrderedJson::array();
    for (const auto& t : list)
      l.push_back({{"type", t.type == TaskType::Loading ? "loading" : "unloading"}, {"yard", t.yard_index}});
    lists.push_back(l);
  }
  j["task_lists"] = lists;
  const auto& d = inst.dist;
  j["distributions"] = {{"speed_empty", detail::truncated_normal_json(d.speed_empty)},
                        {"speed_loaded", detail::truncated_normal_json(d.speed_loaded)},
                        {"qc_service", detail::truncated_normal_json(d.qc_service)},
                        {"yard_service", detail::truncated_normal_json(d.yard_service)},
                        {"congestion", {{"enabled", d.congestion.enabled}, {"factor", d.congestion.factor}}}};
  j["seed"] = inst.seed;
  return j;
}

inline std::string serialize_instance(const TerminalInstance& inst) {
  return instance_to_json(inst).dump(1) + "\n";
}

/// Parses and validates an instance document. Structural problems raise
/// ParseError naming the field; invariant violations raise ValidationError.
inline TerminalInstance instance_from_json(const Json& j) {
  using detail::field;
  using detail::member;
  const auto format = field<std::string>(j, "format", "");
  if (format != kInstanceFormat) throw ParseError("format", "unsupported format '" + format + "'");

  TerminalInstance inst;
  const Json& meta = member(j, "meta", "");
  inst.qc_count = field<int>(meta, "qc_count", "meta");
  inst.yard_count = field<int>(meta, "yard_count", "meta");
  inst.truck_count = field<int>(meta, "truck_count", "meta");
  inst.cell_size_m = field<double>(meta, "cell_size_m", "meta");
  const int declared_tasks = field<int>(meta, "task_count", "meta");

  const Json& nodes = member(j, "nodes", "");
  if (!nodes.is_array()) throw ParseError("nodes", "expected an array");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string path = "nodes[" + std::to_string(i) + "]";
    LayoutNode n;
    n.id = field<int>(nodes[i], "id", path);
    const auto kind = field<std::string>(nodes[i], "kind", path);
    if (kind == "qc") n.kind = NodeKind::Qc;
    else if (kind == "yard") n.kind = NodeKind::Yard;
    else if (kind == "depot") n.kind = NodeKind::Depot;
    else throw ParseError(path + ".kind", "unknown node kind '" + kind + "'");
    n.index = field<int>(nodes[i], "index", path);
    n.x = field<int>(nodes[i], "x", path);
    n.y = field<int>(nodes[i], "y", path);
    if (n.kind == NodeKind::Yard) {
      const auto cls = field<std::string>(nodes[i], "class", path);
      if (cls == "import") n.yard_class = YardClass::Import;
      else if (cls == "export") n.yard_class = YardClass::Export;
      else throw ParseError(path + ".class", "unknown yard class '" + cls + "'");
    }
    inst.nodes.push_back(n);
  }

  const Json& lists = member(j, "task_lists", "");
  if (!lists.is_array()) throw ParseError("task_lists", "expected an array");
  for (std::size_t q = 0; q < lists.size(); ++q) {
    const std::string lpath = "task_lists[" + std::to_string(q) + "]";
    if (!lists[q].is_array()) throw ParseError(lpath, "expected an array");
    std::vector<TaskSpec> list;
    for (std::size_t i = 0; i < lists[q].size(); ++i) {
      const std::string path = lpath + "[" + std::to_string(i) + "]";
      TaskSpec t;
      t.qc_index = static_cast<int>(q);
      t.order_index = static_cast<int>(i);
      const auto type = field<std::string>(lists[q][i], "type", path);
      if (type == "loading") t.type = TaskType::Loading;
      else if (type == "unloading") t.type = TaskType::Unloading;
      else throw ParseError(path + ".type", "unknown task type '" + type + "'");
      t.yard_index = field<int>(lists[q][i], "yard", path);
      list.push_back(t);
    }
    inst.task_lists.push_back(std::move(list));
  }

  const Json& d = member(j, "distributions", "");
  inst.dist.speed_empty = detail::truncated_normal_from(member(d, "speed_empty", "distributions"),
                                                        "distributions.speed_empty");
  inst.dist.speed_loaded = detail::truncated_normal_from(member(d, "speed_loaded", "distributions"),
                                                         "distributions.speed_loaded");
  inst.dist.qc_service = detail::truncated_normal_from(member(d, "qc_service", "distributions"),
                                                       "distributions.qc_service");
  inst.dist.yard_service = detail::truncated_normal_from(member(d, "yard_service", "distributions"),
                                                         "distributions.yard_service");
  const Json& c = member(d, "congestion", "distributions");
  inst.dist.congestion.enabled = field<bool>(c, "enabled", "distributions.congestion");
  inst.dist.congestion.factor = field<double>(c, "factor", "distributions.congestion");

  inst.seed = field<std::uint64_t>(j, "seed", "");

  if (declared_tasks != inst.total_tasks())
    throw ValidationError("meta.task_count does not match the task lists");
  inst.validate();
  return inst;
}

inline TerminalInstance parse_instance(const std::string& text) {
  return instance_from_json(detail::parse_document(text, "<instance>"));
}

inline void save_instance(const TerminalInstance& inst, const std::string& path) {
  detail::write_file(path, serialize_instance(inst));
}

inline TerminalInstance load_instance(const std::string& path) {
  return parse_instance(detail::read_file(path));
}

}  // namespace quaydeck

#endif  // QUAYDECK_INSTANCE_HPP_
