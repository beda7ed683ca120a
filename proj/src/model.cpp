#include "tddmp/model.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace tddmp {

namespace {

constexpr double time_tol = 1e-6;

std::string fmt_amount(double value) {
  std::ostringstream out;
  out << value;
  return out.str();
}

}  // namespace

int Instance::active_days(int i) const {
  int count = 0;
  for (int d = 0; d < day_count; ++d) {
    count += active(i, d) ? 1 : 0;
  }
  return count;
}

InstanceDiagnostics check_instance(const Instance& inst) {
  InstanceDiagnostics diag;
  const int nodes = inst.node_count();
  auto err = [&](std::string m) { diag.errors.push_back(std::move(m)); };
  if (nodes < 1) {
    err("instance has no depot");
    return diag;
  }
  if (inst.day_count < 1) err("day_count must be >= 1");
  if (static_cast<int>(inst.keys.size()) != nodes) err("keys size mismatch");
  if (static_cast<int>(inst.geometry.size()) != nodes) err("geometry size mismatch");
  if (inst.travel.size() != static_cast<std::size_t>(nodes) * nodes) err("travel matrix size mismatch");
  if (static_cast<int>(inst.demand.size()) != nodes) err("demand rows mismatch");
  if (static_cast<int>(inst.service.size()) != nodes) err("service times size mismatch");
  if (static_cast<int>(inst.windows.size()) != nodes) err("time windows size mismatch");
  if (!(inst.capacity > 0.0)) err("capacity must be positive");
  if (!(inst.workday > 0.0)) err("workday must be positive");
  if (!(inst.compactness_bound > 0.0)) err("compactness bound must be positive");
  if (!diag.ok()) {
    return diag;
  }
  for (int i = 0; i < nodes; ++i) {
    if (static_cast<int>(inst.demand[i].size()) != inst.day_count) {
      err("demand row " + std::to_string(i) + " has wrong day count");
      continue;
    }
    for (int d = 0; d < inst.day_count; ++d) {
      const double q = inst.q(i, d);
      if (q < 0.0 || !std::isfinite(q)) err("negative demand at " + std::to_string(i));
      if (q > inst.capacity) {
        err("demand of customer " + std::to_string(i) + " on day " +
            std::to_string(d) + " exceeds capacity");
      }
      if (i == 0 && q != 0.0) err("depot has demand");
    }
    const auto& w = inst.windows[i];
    if (!(w.open <= w.close) || w.open < 0.0 || w.close > inst.workday) {
      err("time window of node " + std::to_string(i) + " is not inside [0, h]");
    }
    if (inst.service[i] < 0.0) err("negative service time at " + std::to_string(i));
  }
  for (int i = 0; i < nodes; ++i) {
    for (int j = 0; j < nodes; ++j) {
      const double t = inst.t(i, j);
      if (!std::isfinite(t) || t < 0.0) err("negative travel time " + std::to_string(i) + "->" + std::to_string(j));
      if (i == j && t != 0.0) err("non-zero travel time on the diagonal at " + std::to_string(i));
    }
  }
  if (!diag.ok()) {
    return diag;
  }
  // Full triangle check is cubic; sample large instances deterministically.
  auto check_triple = [&](int i, int k, int j) {
    if (inst.t(i, j) > inst.t(i, k) + inst.t(k, j) + 1e-6) {
      diag.warnings.push_back("triangle inequality violated for " +
                              std::to_string(i) + "," + std::to_string(k) +
                              "," + std::to_string(j));
      return true;
    }
    return false;
  };
  if (nodes <= 300) {
    for (int i = 0; i < nodes; ++i)
      for (int k = 0; k < nodes; ++k)
        for (int j = 0; j < nodes; ++j)
          if (check_triple(i, k, j) && diag.warnings.size() >= 10) return diag;
  } else {
    std::uint64_t state = 0x9e3779b97f4a7c15ULL;
    auto next = [&] {
      state ^= state << 13;
      state ^= state >> 7;
      state ^= state << 17;
      return static_cast<int>(state % static_cast<std::uint64_t>(nodes));
    };
    for (int s = 0; s < 1'000'000; ++s) {
      if (check_triple(next(), next(), next()) && diag.warnings.size() >= 10) break;
    }
  }
  return diag;
}

std::vector<double> euclidean_travel(const std::vector<Point>& coords) {
  const std::size_t n = coords.size();
  std::vector<double> travel(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      travel[i * n + j] = i == j ? 0.0 : distance(coords[i], coords[j]);
    }
  }
  return travel;
}

int Solution::territory_count() const {
  return static_cast<int>(std::count_if(
      territories.begin(), territories.end(),
      [](const Territory& t) { return !t.members.empty(); }));
}

void refresh_shapes(Solution& solution, const Instance& instance) {
  for (auto& t : solution.territories) {
    if (t.members.empty()) {
      t.perimeter = t.area = t.ratio = 0.0;
      continue;
    }
    const auto shape = shape_of(t.members, instance.geometry);
    t.perimeter = shape.perimeter;
    t.area = shape.area;
    t.ratio = shape.ratio(instance.mode);
  }
}

ScheduleOutcome propagate_schedule(const std::vector<int>& visits, int day,
                                   const Instance& inst) {
  if (day < 0 || day >= inst.day_count) {
    throw std::invalid_argument("day " + std::to_string(day) + " out of range");
  }
  Route route;
  route.day = day;
  int prev = 0;
  double clock = inst.windows[0].open;
  for (int j : visits) {
    if (!inst.valid_customer(j)) {
      throw std::invalid_argument("unknown customer " + std::to_string(j));
    }
    if (!inst.active(j, day)) {
      throw std::invalid_argument("customer " + std::to_string(j) +
                                  " is inactive on day " + std::to_string(day));
    }
    const double arrival = clock + inst.t(prev, j);
    const double start = std::max(inst.windows[j].open, arrival);
    if (start > inst.windows[j].close + time_tol) {
      ScheduleOutcome out;
      out.customer = j;
      out.amount = start - inst.windows[j].close;
      out.reason = "window missed at customer " + std::to_string(j) + " by " +
                   fmt_amount(out.amount);
      return out;
    }
    route.visits.push_back(j);
    route.starts.push_back(start);
    route.waits.push_back(start - arrival);
    clock = start + inst.service[j];
    prev = j;
  }
  const double back = clock + inst.t(prev, 0);
  if (back > inst.workday + time_tol) {
    ScheduleOutcome out;
    out.amount = back - inst.workday;
    out.reason = "depot return late by " + fmt_amount(out.amount);
    return out;
  }
  return {std::move(route), {}, -1, 0.0};
}

std::string to_string(ConstraintFamily family) {
  switch (family) {
    case ConstraintFamily::partition: return "2";
    case ConstraintFamily::capacity: return "3";
    case ConstraintFamily::compactness: return "10";
    case ConstraintFamily::contiguity: return "11-13";
    case ConstraintFamily::assignment: return "14-16";
    case ConstraintFamily::schedule: return "17-20";
  }
  return "?";
}

std::size_t ValidationReport::count(ConstraintFamily family) const {
  return static_cast<std::size_t>(std::count_if(
      violations.begin(), violations.end(),
      [&](const Violation& v) { return v.family == family; }));
}

ValidationReport validate(const Instance& inst, const Solution& solution,
                          const ValidateOptions& options) {
  const int n = inst.customer_count();
  std::set<int> seen_ids;
  for (const auto& t : solution.territories) {
    if (!seen_ids.insert(t.id).second) {
      throw StructuralError("duplicate territory id " + std::to_string(t.id));
    }
    for (int i : t.members) {
      if (!inst.valid_customer(i)) {
        throw StructuralError("territory " + std::to_string(t.id) +
                              " references unknown customer " + std::to_string(i));
      }
    }
    for (const auto& r : t.routes) {
      if (r.day < 0 || r.day >= inst.day_count) {
        throw StructuralError("territory " + std::to_string(t.id) +
                              " has a route on unknown day " + std::to_string(r.day));
      }
      for (int i : r.visits) {
        if (!inst.valid_customer(i)) {
          throw StructuralError("route references unknown customer " + std::to_string(i));
        }
      }
      if (r.starts.size() != r.visits.size() || r.waits.size() != r.visits.size()) {
        throw StructuralError("route schedule length does not match its visits");
      }
    }
  }

  std::set<std::pair<int, int>> excused(options.unserved.begin(), options.unserved.end());
  ValidationReport report;
  auto add = [&](ConstraintFamily f, int k, int d, int i, double mag, std::string msg) {
    report.violations.push_back({f, k, d, i, mag, std::move(msg)});
  };

  // Partition of the customers.
  std::vector<int> owner_count(n + 1, 0);
  for (const auto& t : solution.territories) {
    if (t.members.empty()) {
      add(ConstraintFamily::partition, t.id, -1, -1, 0.0, "empty territory");
    }
    for (int i : t.members) owner_count[i]++;
  }
  for (int i = 1; i <= n; ++i) {
    if (owner_count[i] != 1) {
      add(ConstraintFamily::partition, -1, -1, i, std::abs(owner_count[i] - 1.0),
          "customer " + std::to_string(i) + " belongs to " +
              std::to_string(owner_count[i]) + " territories");
    }
  }

  for (const auto& t : solution.territories) {
    std::set<int> members(t.members.begin(), t.members.end());
    if (members.size() != t.members.size()) {
      add(ConstraintFamily::partition, t.id, -1, -1, 0.0, "territory lists a member twice");
    }
    if (options.check_design && !t.members.empty()) {
      if (!is_contiguous(t.members, inst.geometry)) {
        add(ConstraintFamily::contiguity, t.id, -1, -1, 0.0, "territory is not contiguous");
      }
      const double cr = compactness_ratio(t.members, inst.geometry, inst.mode);
      if (cr > inst.compactness_bound + 1e-9) {
        add(ConstraintFamily::compactness, t.id, -1, -1, cr - inst.compactness_bound,
            "compactness ratio " + fmt_amount(cr) + " exceeds F");
      }
    }

    std::map<int, const Route*> by_day;
    for (const auto& r : t.routes) {
      if (r.visits.empty()) continue;
      if (!by_day.emplace(r.day, &r).second) {
        add(ConstraintFamily::assignment, t.id, r.day, -1, 0.0, "two routes on the same day");
      }
    }
    for (int d = 0; d < inst.day_count; ++d) {
      std::set<int> visited;
      auto it = by_day.find(d);
      if (it != by_day.end()) {
        const Route& r = *it->second;
        double load = 0.0;
        int prev = 0;
        double clock = inst.windows[0].open;
        for (std::size_t p = 0; p < r.visits.size(); ++p) {
          const int j = r.visits[p];
          if (!visited.insert(j).second) {
            add(ConstraintFamily::assignment, t.id, d, j, 0.0, "customer visited twice");
          }
          if (!members.contains(j)) {
            add(ConstraintFamily::assignment, t.id, d, j, 0.0,
                "customer served by a territory it does not belong to");
          }
          if (!inst.active(j, d)) {
            add(ConstraintFamily::partition, t.id, d, j, 0.0, "customer visited on a day without demand");
          }
          load += inst.q(j, d);
          // Relaxed propagation: same magnitudes as the routing penalties.
          const double arrival = clock + inst.t(prev, j);
          const double start = std::max(inst.windows[j].open, arrival);
          if (std::abs(r.starts[p] - start) > time_tol ||
              std::abs(r.waits[p] - (start - arrival)) > time_tol) {
            add(ConstraintFamily::schedule, t.id, d, j, std::abs(r.starts[p] - start),
                "stored start time differs from the earliest-start schedule");
          }
          if (start > inst.windows[j].close + time_tol) {
            add(ConstraintFamily::schedule, t.id, d, j, start - inst.windows[j].close,
                "time window missed");
          }
          clock = start + inst.service[j];
          prev = j;
        }
        const double back = clock + inst.t(prev, 0);
        if (back > inst.workday + time_tol) {
          add(ConstraintFamily::schedule, t.id, d, -1, back - inst.workday,
              "depot return after end of workday");
        }
        if (load > inst.capacity + 1e-9) {
          add(ConstraintFamily::capacity, t.id, d, -1, load - inst.capacity,
              "load exceeds capacity");
        }
      }
      for (int i : t.members) {
        if (inst.active(i, d) && !visited.contains(i) && !excused.contains({i, d})) {
          add(ConstraintFamily::partition, t.id, d, i, 0.0, "active customer not visited");
        }
      }
    }
  }
  return report;
}

SolutionCost solution_cost(const Solution& solution, const Instance& inst) {
  SolutionCost cost;
  double minutes = 0.0;
  double ratio_sum = 0.0;
  for (const auto& t : solution.territories) {
    if (t.members.empty()) continue;
    cost.territories++;
    ratio_sum += compactness_ratio(t.members, inst.geometry, inst.mode);
    for (const auto& r : t.routes) {
      int prev = 0;
      for (int j : r.visits) {
        minutes += inst.t(prev, j);
        prev = j;
      }
      if (!r.visits.empty()) minutes += inst.t(prev, 0);
      cost.active_customer_days += static_cast<int>(r.visits.size());
    }
  }
  cost.travel_hours = minutes / 60.0;
  if (cost.territories > 0) cost.average_ratio = ratio_sum / cost.territories;
  return cost;
}

// --- JSON ---------------------------------------------------------------

nlohmann::json to_json(const Instance& inst) {
  nlohmann::json nodes = nlohmann::json::array();
  for (int i = 0; i < inst.node_count(); ++i) {
    nodes.push_back({{"id", i},
                     {"key", inst.keys[i]},
                     {"x", inst.coords[i].x},
                     {"y", inst.coords[i].y},
                     {"service", inst.service[i]},
                     {"window", {inst.windows[i].open, inst.windows[i].close}},
                     {"demand", inst.demand[i]}});
  }
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < inst.node_count(); ++i) {
    rows.emplace_back(inst.travel.begin() + static_cast<std::ptrdiff_t>(i) * inst.node_count(),
                      inst.travel.begin() + static_cast<std::ptrdiff_t>(i + 1) * inst.node_count());
  }
  return {{"schema", schema_tag},
          {"kind", "instance"},
          {"name", inst.name},
          {"days", inst.day_count},
          {"capacity", inst.capacity},
          {"workday", inst.workday},
          {"compactness_bound", inst.compactness_bound},
          {"compactness_mode", to_string(inst.mode)},
          {"nodes", nodes},
          {"travel_times", rows},
          {"cells", cells_to_geojson(inst.geometry)}};
}

Instance instance_from_json(const nlohmann::json& doc) {
  if (doc.value("schema", "") != schema_tag || doc.value("kind", "") != "instance") {
    throw std::invalid_argument("not a tddmp-1 instance document");
  }
  Instance inst;
  inst.name = doc.value("name", "");
  inst.day_count = doc.at("days").get<int>();
  inst.capacity = doc.at("capacity").get<double>();
  inst.workday = doc.at("workday").get<double>();
  inst.compactness_bound = doc.at("compactness_bound").get<double>();
  inst.mode = compactness_mode_from_string(doc.at("compactness_mode").get<std::string>());
  const auto& nodes = doc.at("nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& node = nodes[i];
    if (node.at("id").get<std::size_t>() != i) {
      throw std::invalid_argument("node ids must be 0..n in order");
    }
    inst.keys.push_back(node.value("key", static_cast<std::uint64_t>(i)));
    inst.coords.push_back({node.at("x").get<double>(), node.at("y").get<double>()});
    inst.service.push_back(node.at("service").get<double>());
    inst.windows.push_back({node.at("window").at(0).get<double>(),
                            node.at("window").at(1).get<double>()});
    inst.demand.push_back(node.at("demand").get<std::vector<double>>());
  }
  const auto rows = doc.at("travel_times").get<std::vector<std::vector<double>>>();
  if (rows.size() != nodes.size()) {
    throw std::invalid_argument("travel_times must be a square matrix over all nodes");
  }
  for (const auto& row : rows) {
    if (row.size() != nodes.size()) {
      throw std::invalid_argument("travel_times must be a square matrix over all nodes");
    }
    inst.travel.insert(inst.travel.end(), row.begin(), row.end());
  }
  if (doc.contains("cells")) {
    inst.geometry = cells_from_geojson(doc.at("cells"));
  } else {
    inst.geometry = GeometryTable::from_sites(inst.coords, inflated_hull(inst.coords));
  }
  const auto diag = check_instance(inst);
  if (!diag.ok()) {
    throw std::invalid_argument("invalid instance: " + diag.errors.front());
  }
  return inst;
}

nlohmann::json to_json(const Solution& solution) {
  nlohmann::json territories = nlohmann::json::array();
  for (const auto& t : solution.territories) {
    nlohmann::json routes = nlohmann::json::array();
    for (const auto& r : t.routes) {
      routes.push_back({{"day", r.day}, {"visits", r.visits},
                        {"starts", r.starts}, {"waits", r.waits}});
    }
    territories.push_back({{"id", t.id},
                           {"members", t.members},
                           {"perimeter", t.perimeter},
                           {"area", t.area},
                           {"ratio", t.ratio},
                           {"routes", routes}});
  }
  return {{"schema", schema_tag}, {"kind", "solution"}, {"territories", territories}};
}

Solution solution_from_json(const nlohmann::json& doc) {
  if (doc.value("schema", "") != schema_tag || doc.value("kind", "") != "solution") {
    throw std::invalid_argument("not a tddmp-1 solution document");
  }
  Solution solution;
  for (const auto& jt : doc.at("territories")) {
    Territory t;
    t.id = jt.at("id").get<int>();
    t.members = jt.at("members").get<std::vector<int>>();
    t.perimeter = jt.value("perimeter", 0.0);
    t.area = jt.value("area", 0.0);
    t.ratio = jt.value("ratio", 0.0);
    for (const auto& jr : jt.at("routes")) {
      Route r;
      r.day = jr.at("day").get<int>();
      r.visits = jr.at("visits").get<std::vector<int>>();
      r.starts = jr.at("starts").get<std::vector<double>>();
      r.waits = jr.at("waits").get<std::vector<double>>();
      t.routes.push_back(std::move(r));
    }
    solution.territories.push_back(std::move(t));
  }
  return solution;
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("cannot open " + path);
  }
  return nlohmann::json::parse(in);
}

void write_text_atomic(const std::string& path, const std::string& text) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) {
    std::filesystem::create_directories(target.parent_path());
  }
  const auto tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) {
      throw std::runtime_error("cannot write " + tmp);
    }
    out << text;
  }
  std::filesystem::rename(tmp, target);
}

Instance read_instance(const std::string& path) {
  return instance_from_json(read_json_file(path));
}

void write_instance(const Instance& instance, const std::string& path) {
  write_text_atomic(path, to_json(instance).dump() + "\n");
}

Solution read_solution(const std::string& path) {
  return solution_from_json(read_json_file(path));
}

void write_solution(const Solution& solution, const std::string& path) {
  write_text_atomic(path, to_json(solution).dump(1) + "\n");
}

nlohmann::json territories_to_geojson(const Solution& solution,
                                      const Instance& inst) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& t : solution.territories) {
    if (t.members.empty()) continue;
    for (int i : t.members) {
      if (!inst.valid_customer(i)) {
        throw StructuralError("solution references unknown customer " + std::to_string(i));
      }
    }
    const auto rings = dissolve(t.members, inst.geometry);
    // Group holes under the outer ring that contains them; territories are
    // contiguous so there is normally a single outer ring.
    nlohmann::json polygons = nlohmann::json::array();
    nlohmann::json holes = nlohmann::json::array();
    auto closed = [](const std::vector<Point>& ring) {
      nlohmann::json out = nlohmann::json::array();
      for (const auto& p : ring) out.push_back({p.x, p.y});
      if (!ring.empty()) out.push_back({ring.front().x, ring.front().y});
      return out;
    };
    for (const auto& ring : rings) {
      if (polygon_area(ring) >= 0.0) {
        polygons.push_back(nlohmann::json::array({closed(ring)}));
      } else {
        holes.push_back(closed(ring));
      }
    }
    if (!polygons.empty()) {
      for (auto& hole : holes) polygons[0].push_back(hole);
    }
    double boundary = 0.0;
    for (const auto& ring : rings) boundary += polygon_perimeter(ring);
    features.push_back(
        {{"type", "Feature"},
         {"geometry", {{"type", "MultiPolygon"}, {"coordinates", polygons}}},
         {"properties",
          {{"territory_id", t.id},
           {"members", t.members},
           {"boundary_length", boundary},
           {"CR", compactness_ratio(t.members, inst.geometry, inst.mode)}}}});
  }
  return {{"type", "FeatureCollection"}, {"features", features}};
}

}  // namespace tddmp
