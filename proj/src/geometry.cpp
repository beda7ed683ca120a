#include "tddmp/geometry.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <unordered_set>

namespace tddmp {

namespace {

// Polygon vertex whose outgoing edge (to the next vertex) lies on the
// boundary against `label`: another site index, or -1 for the box.
struct LabeledVertex {
  Point p;
  int label;
};

Point lerp(Point a, Point b, double t) {
  return {a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t};
}

// Keeps the part of `cell` closer to `site` than to `other`.
std::vector<LabeledVertex> clip_bisector(const std::vector<LabeledVertex>& cell,
                                         Point site, Point other,
                                         int other_id) {
  const Point normal{other.x - site.x, other.y - site.y};
  const Point mid{(site.x + other.x) / 2.0, (site.y + other.y) / 2.0};
  auto side = [&](Point p) {
    return (p.x - mid.x) * normal.x + (p.y - mid.y) * normal.y;
  };

  std::vector<LabeledVertex> out;
  out.reserve(cell.size() + 2);
  for (std::size_t k = 0; k < cell.size(); ++k) {
    const auto& a = cell[k];
    const auto& b = cell[(k + 1) % cell.size()];
    const double da = side(a.p);
    const double db = side(b.p);
    if (da <= 0.0) {
      out.push_back(a);
      if (db > 0.0) {
        out.push_back({lerp(a.p, b.p, da / (da - db)), other_id});
      }
    } else if (db <= 0.0) {
      out.push_back({lerp(a.p, b.p, da / (da - db)), a.label});
    }
  }
  return out;
}

void drop_short_edges(std::vector<LabeledVertex>& cell, double eps) {
  bool changed = true;
  while (changed && cell.size() > 3) {
    changed = false;
    for (std::size_t k = 0; k < cell.size(); ++k) {
      const auto& next = cell[(k + 1) % cell.size()];
      if (distance(cell[k].p, next.p) <= eps) {
        // The previous edge now runs straight to `next`.
        cell.erase(cell.begin() + static_cast<std::ptrdiff_t>(k));
        changed = true;
        break;
      }
    }
  }
}

}  // namespace

std::string to_string(CompactnessMode mode) {
  return mode == CompactnessMode::sqrt_of_sum ? "sqrt_of_sum" : "sum_of_sqrts";
}

CompactnessMode compactness_mode_from_string(const std::string& text) {
  if (text == "sqrt_of_sum" || text == "SQRT_OF_SUM") {
    return CompactnessMode::sqrt_of_sum;
  }
  if (text == "sum_of_sqrts" || text == "SUM_OF_SQRTS") {
    return CompactnessMode::sum_of_sqrts;
  }
  throw std::invalid_argument("unknown compactness mode '" + text + "'");
}

Box inflated_hull(std::span<const Point> points, double margin) {
  if (points.empty()) {
    throw GeometryError("cannot bound an empty point set");
  }
  Box box{points[0].x, points[0].y, points[0].x, points[0].y};
  for (const auto& p : points) {
    box.min_x = std::min(box.min_x, p.x);
    box.min_y = std::min(box.min_y, p.y);
    box.max_x = std::max(box.max_x, p.x);
    box.max_y = std::max(box.max_y, p.y);
  }
  const double dx = box.width() > 0.0 ? box.width() : 1.0;
  const double dy = box.height() > 0.0 ? box.height() : 1.0;
  box.min_x -= margin * dx;
  box.max_x += margin * dx;
  box.min_y -= margin * dy;
  box.max_y += margin * dy;
  return box;
}

double polygon_area(std::span<const Point> polygon) {
  double twice = 0.0;
  for (std::size_t k = 0; k < polygon.size(); ++k) {
    const auto& a = polygon[k];
    const auto& b = polygon[(k + 1) % polygon.size()];
    twice += a.x * b.y - b.x * a.y;
  }
  return twice / 2.0;
}

double polygon_perimeter(std::span<const Point> polygon) {
  double total = 0.0;
  for (std::size_t k = 0; k < polygon.size(); ++k) {
    total += distance(polygon[k], polygon[(k + 1) % polygon.size()]);
  }
  return total;
}

std::vector<BasicUnitGeometry> build_voronoi(std::span<const Point> sites,
                                             const Box& box) {
  if (sites.empty()) {
    throw GeometryError("build_voronoi needs at least one site");
  }
  const double eps = 1e-9 * box.diagonal();
  const int n = static_cast<int>(sites.size());

  for (int i = 0; i < n; ++i) {
    if (!box.strictly_contains(sites[i])) {
      throw GeometryError("site " + std::to_string(i) +
                          " is not strictly inside the bounding box");
    }
  }
  {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return std::tie(sites[a].x, sites[a].y) < std::tie(sites[b].x, sites[b].y);
    });
    for (int k = 0; k < n; ++k) {
      // Any pair closer than eps has lexicographic neighbours within eps in x.
      for (int m = k + 1; m < n; ++m) {
        const Point a = sites[order[k]];
        const Point b = sites[order[m]];
        if (b.x - a.x > eps) {
          break;
        }
        if (distance(a, b) <= eps) {
          const int lo = std::min(order[k], order[m]);
          const int hi = std::max(order[k], order[m]);
          throw GeometryError("duplicate sites " + std::to_string(lo) +
                              " and " + std::to_string(hi));
        }
      }
    }
  }

  std::vector<std::vector<LabeledVertex>> cells(n);
  std::vector<int> by_distance(n);
  for (int i = 0; i < n; ++i) {
    auto& cell = cells[i];
    cell = {{{box.min_x, box.min_y}, -1},
            {{box.max_x, box.min_y}, -1},
            {{box.max_x, box.max_y}, -1},
            {{box.min_x, box.max_y}, -1}};

    std::iota(by_distance.begin(), by_distance.end(), 0);
    std::vector<double> d2(n);
    for (int j = 0; j < n; ++j) {
      const double dx = sites[j].x - sites[i].x;
      const double dy = sites[j].y - sites[i].y;
      d2[j] = dx * dx + dy * dy;
    }
    std::sort(by_distance.begin(), by_distance.end(),
              [&](int a, int b) { return d2[a] < d2[b] || (d2[a] == d2[b] && a < b); });

    for (int j : by_distance) {
      if (j == i) {
        continue;
      }
      double radius2 = 0.0;
      for (const auto& v : cell) {
        const double dx = v.p.x - sites[i].x;
        const double dy = v.p.y - sites[i].y;
        radius2 = std::max(radius2, dx * dx + dy * dy);
      }
      // Sites beyond twice the cell radius cannot cut the cell.
      if (d2[j] > 4.0 * radius2) {
        break;
      }
      cell = clip_bisector(cell, sites[i], sites[j], j);
    }
    drop_short_edges(cell, eps);
  }

  std::vector<BasicUnitGeometry> units(n);
  std::vector<std::map<int, double>> edge_length(n);
  for (int i = 0; i < n; ++i) {
    auto& unit = units[i];
    unit.unit_id = i;
    for (std::size_t k = 0; k < cells[i].size(); ++k) {
      const auto& a = cells[i][k];
      const auto& b = cells[i][(k + 1) % cells[i].size()];
      unit.polygon.push_back(a.p);
      if (a.label >= 0) {
        edge_length[i][a.label] += distance(a.p, b.p);
      }
    }
    unit.area = polygon_area(unit.polygon);
    unit.perimeter = polygon_perimeter(unit.polygon);
    unit.sqrt_area = std::sqrt(unit.area);
  }
  // Each pair's length is taken from the lower-id cell and stored twice.
  for (int i = 0; i < n; ++i) {
    for (const auto& [j, length] : edge_length[i]) {
      if (j > i && length > eps) {
        units[i].neighbors.push_back({j, length});
        units[j].neighbors.push_back({i, length});
      }
    }
  }
  for (auto& unit : units) {
    std::sort(unit.neighbors.begin(), unit.neighbors.end(),
              [](const Neighbor& a, const Neighbor& b) { return a.unit < b.unit; });
  }
  return units;
}

GeometryTable::GeometryTable(std::vector<BasicUnitGeometry> units, Box box)
    : units_(std::move(units)), box_(box) {
  for (std::size_t i = 0; i < units_.size(); ++i) {
    if (units_[i].unit_id != static_cast<int>(i)) {
      throw GeometryError("unit ids must equal table positions");
    }
    auto& nbrs = units_[i].neighbors;
    std::sort(nbrs.begin(), nbrs.end(),
              [](const Neighbor& a, const Neighbor& b) { return a.unit < b.unit; });
    for (const auto& nb : nbrs) {
      if (!valid(nb.unit) || nb.unit == static_cast<int>(i)) {
        throw GeometryError("unit " + std::to_string(i) +
                            " has an invalid neighbor " +
                            std::to_string(nb.unit));
      }
    }
  }
  for (std::size_t i = 0; i < units_.size(); ++i) {
    for (const auto& nb : units_[i].neighbors) {
      if (shared_length(nb.unit, static_cast<int>(i)) != nb.shared_length) {
        throw GeometryError("asymmetric boundary between units " +
                            std::to_string(i) + " and " +
                            std::to_string(nb.unit));
      }
    }
  }
}

GeometryTable GeometryTable::from_sites(std::span<const Point> sites,
                                        const Box& box) {
  return GeometryTable(build_voronoi(sites, box), box);
}

const BasicUnitGeometry& GeometryTable::unit(int id) const {
  if (!valid(id)) {
    throw std::out_of_range("unknown unit id " + std::to_string(id));
  }
  return units_[static_cast<std::size_t>(id)];
}

double GeometryTable::shared_length(int i, int j) const {
  const auto& nbrs = unit(i).neighbors;
  auto it = std::lower_bound(
      nbrs.begin(), nbrs.end(), j,
      [](const Neighbor& nb, int id) { return nb.unit < id; });
  return it != nbrs.end() && it->unit == j ? it->shared_length : 0.0;
}

ShapeAggregate shape_of(std::span<const int> units, const GeometryTable& geo) {
  ShapeAggregate shape;
  std::unordered_set<int> members;
  for (int id : units) {
    const auto& u = geo.unit(id);
    if (!members.insert(id).second) {
      throw std::invalid_argument("unit " + std::to_string(id) +
                                  " listed twice");
    }
    shape.perimeter += u.perimeter;
    shape.area += u.area;
    shape.sqrt_area_sum += u.sqrt_area;
  }
  // Internal sides count once per direction.
  for (int id : units) {
    for (const auto& nb : geo.neighbors(id)) {
      if (members.contains(nb.unit)) {
        shape.perimeter -= nb.shared_length;
      }
    }
  }
  return shape;
}

double territory_perimeter(std::span<const int> units,
                           const GeometryTable& geo) {
  if (units.empty()) {
    throw std::invalid_argument("territory_perimeter of an empty set");
  }
  return shape_of(units, geo).perimeter;
}

double compactness_ratio(std::span<const int> units, const GeometryTable& geo,
                         CompactnessMode mode) {
  if (units.empty()) {
    throw std::invalid_argument("compactness_ratio of an empty set");
  }
  return shape_of(units, geo).ratio(mode);
}

bool is_contiguous(std::span<const int> units, const GeometryTable& geo) {
  if (units.size() <= 1) {
    return true;
  }
  std::unordered_set<int> members(units.begin(), units.end());
  std::unordered_set<int> seen{units[0]};
  std::queue<int> frontier;
  frontier.push(units[0]);
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop();
    for (const auto& nb : geo.neighbors(u)) {
      if (members.contains(nb.unit) && seen.insert(nb.unit).second) {
        frontier.push(nb.unit);
      }
    }
  }
  return seen.size() == members.size();
}

std::vector<std::vector<Point>> dissolve(std::span<const int> units,
                                         const GeometryTable& geo) {
  struct Edge {
    Point a;
    Point b;
    int owner;
  };
  const double tol = 1e-7 * geo.box().diagonal();
  auto close = [&](Point p, Point q) { return distance(p, q) <= tol; };

  std::vector<Edge> edges;
  for (int id : units) {
    const auto& poly = geo.unit(id).polygon;
    for (std::size_t k = 0; k < poly.size(); ++k) {
      edges.push_back({poly[k], poly[(k + 1) % poly.size()], id});
    }
  }
  // Shared sides appear once in each direction, owned by different cells.
  std::vector<bool> internal(edges.size(), false);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (internal[e]) {
      continue;
    }
    for (std::size_t f = e + 1; f < edges.size(); ++f) {
      if (!internal[f] && edges[f].owner != edges[e].owner &&
          close(edges[e].a, edges[f].b) && close(edges[e].b, edges[f].a)) {
        internal[e] = internal[f] = true;
        break;
      }
    }
  }

  std::vector<std::size_t> open;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (!internal[e]) {
      open.push_back(e);
    }
  }
  std::vector<std::vector<Point>> rings;
  std::vector<bool> used(edges.size(), false);
  for (std::size_t start : open) {
    if (used[start]) {
      continue;
    }
    std::vector<Point> ring;
    std::size_t current = start;
    used[current] = true;
    ring.push_back(edges[current].a);
    while (true) {
      const Point end = edges[current].b;
      if (close(end, edges[start].a)) {
        break;
      }
      std::size_t next = edges.size();
      for (std::size_t e : open) {
        if (!used[e] && close(edges[e].a, end)) {
          next = e;
          break;
        }
      }
      if (next == edges.size()) {
        break;  // open chain; numerically broken input
      }
      used[next] = true;
      ring.push_back(edges[next].a);
      current = next;
    }
    rings.push_back(std::move(ring));
  }
  return rings;
}

nlohmann::json cells_to_geojson(const GeometryTable& geo) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& u : geo.units()) {
    nlohmann::json ring = nlohmann::json::array();
    for (const auto& p : u.polygon) {
      ring.push_back({p.x, p.y});
    }
    if (!u.polygon.empty()) {
      ring.push_back({u.polygon.front().x, u.polygon.front().y});
    }
    nlohmann::json neighbors = nlohmann::json::array();
    for (const auto& nb : u.neighbors) {
      neighbors.push_back({nb.unit, nb.shared_length});
    }
    features.push_back(
        {{"type", "Feature"},
         {"geometry", {{"type", "Polygon"}, {"coordinates", {ring}}}},
         {"properties",
          {{"unit_id", u.unit_id},
           {"area", u.area},
           {"perimeter", u.perimeter},
           {"sqrt_area", u.sqrt_area},
           {"neighbors", neighbors}}}});
  }
  const auto& b = geo.box();
  return {{"type", "FeatureCollection"},
          {"bbox", {b.min_x, b.min_y, b.max_x, b.max_y}},
          {"features", features}};
}

GeometryTable cells_from_geojson(const nlohmann::json& collection) {
  if (collection.value("type", "") != "FeatureCollection") {
    throw GeometryError("expected a GeoJSON FeatureCollection");
  }
  const auto& bbox = collection.at("bbox");
  const Box box{bbox.at(0).get<double>(), bbox.at(1).get<double>(),
                bbox.at(2).get<double>(), bbox.at(3).get<double>()};
  std::vector<BasicUnitGeometry> units;
  for (const auto& feature : collection.at("features")) {
    const auto& props = feature.at("properties");
    BasicUnitGeometry u;
    u.unit_id = props.at("unit_id").get<int>();
    const auto& ring = feature.at("geometry").at("coordinates").at(0);
    for (std::size_t k = 0; k + 1 < ring.size(); ++k) {
      u.polygon.push_back({ring[k].at(0).get<double>(), ring[k].at(1).get<double>()});
    }
    u.area = props.at("area").get<double>();
    u.perimeter = props.at("perimeter").get<double>();
    u.sqrt_area = props.contains("sqrt_area") ? props.at("sqrt_area").get<double>()
                                              : std::sqrt(u.area);
    for (const auto& nb : props.at("neighbors")) {
      u.neighbors.push_back({nb.at(0).get<int>(), nb.at(1).get<double>()});
    }
    units.push_back(std::move(u));
  }
  std::sort(units.begin(), units.end(),
            [](const auto& a, const auto& b) { return a.unit_id < b.unit_id; });
  return GeometryTable(std::move(units), box);
}

}  // namespace tddmp
