#ifndef TDDMP_GEOMETRY_HPP
#define TDDMP_GEOMETRY_HPP

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace tddmp {

struct Point {
  double x{0.0};
  double y{0.0};

  friend bool operator==(const Point&, const Point&) = default;
};

inline double distance(Point a, Point b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

struct Box {
  double min_x{0.0};
  double min_y{0.0};
  double max_x{1.0};
  double max_y{1.0};

  double width() const { return max_x - min_x; }
  double height() const { return max_y - min_y; }
  double area() const { return width() * height(); }
  double diagonal() const { return std::hypot(width(), height()); }
  bool strictly_contains(Point p) const {
    return p.x > min_x && p.x < max_x && p.y > min_y && p.y < max_y;
  }

  friend bool operator==(const Box&, const Box&) = default;
};

// Bounding box of the points, inflated by `margin` of its extent on each
// side. Degenerate extents (all points on a line) fall back to an extent of 1.
Box inflated_hull(std::span<const Point> points, double margin = 0.1);

struct Neighbor {
  int unit{0};
  double shared_length{0.0};

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

// A basic unit: convex polygon (counter-clockwise, not closed) with its
// aggregates. `neighbors` is sorted by unit id.
struct BasicUnitGeometry {
  int unit_id{0};
  std::vector<Point> polygon;
  double area{0.0};
  double perimeter{0.0};
  double sqrt_area{0.0};
  std::vector<Neighbor> neighbors;

  friend bool operator==(const BasicUnitGeometry&,
                         const BasicUnitGeometry&) = default;
};

enum class CompactnessMode { sqrt_of_sum, sum_of_sqrts };

std::string to_string(CompactnessMode mode);
CompactnessMode compactness_mode_from_string(const std::string& text);

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double polygon_area(std::span<const Point> polygon);
double polygon_perimeter(std::span<const Point> polygon);

// One clipped Voronoi cell per site, in site order; cells tile `box`.
// Throws GeometryError on duplicate sites or sites not strictly inside.
std::vector<BasicUnitGeometry> build_voronoi(std::span<const Point> sites,
                                             const Box& box);

// Immutable lookup table over basic units. Unit ids are the positions in the
// table (node indices of the instance).
class GeometryTable {
 public:
  GeometryTable() = default;
  GeometryTable(std::vector<BasicUnitGeometry> units, Box box);

  static GeometryTable from_sites(std::span<const Point> sites, const Box& box);

  std::size_t size() const { return units_.size(); }
  const BasicUnitGeometry& unit(int id) const;
  const std::vector<BasicUnitGeometry>& units() const { return units_; }
  const Box& box() const { return box_; }

  // Absolute tolerance for geometric comparisons (1e-9 x box diagonal).
  double tolerance() const { return 1e-9 * box_.diagonal(); }

  const std::vector<Neighbor>& neighbors(int id) const {
    return unit(id).neighbors;
  }
  double shared_length(int i, int j) const;
  bool adjacent(int i, int j) const { return shared_length(i, j) > 0.0; }
  bool valid(int id) const {
    return id >= 0 && static_cast<std::size_t>(id) < units_.size();
  }

  friend bool operator==(const GeometryTable&, const GeometryTable&) = default;

 private:
  std::vector<BasicUnitGeometry> units_;
  Box box_;
};

// Perimeter/area aggregates of a union of basic units.
struct ShapeAggregate {
  double perimeter{0.0};
  double area{0.0};
  double sqrt_area_sum{0.0};

  double ratio(CompactnessMode mode) const {
    const double denominator =
        mode == CompactnessMode::sqrt_of_sum ? std::sqrt(area) : sqrt_area_sum;
    return perimeter / denominator;
  }
  friend bool operator==(const ShapeAggregate&, const ShapeAggregate&) = default;
  // `shared` is the boundary length the unit shares with the current union.
  ShapeAggregate with_unit(const BasicUnitGeometry& u, double shared) const {
    return {perimeter + u.perimeter - 2.0 * shared, area + u.area,
            sqrt_area_sum + u.sqrt_area};
  }
  ShapeAggregate without_unit(const BasicUnitGeometry& u, double shared) const {
    return {perimeter - u.perimeter + 2.0 * shared, area - u.area,
            sqrt_area_sum - u.sqrt_area};
  }
};

ShapeAggregate shape_of(std::span<const int> units, const GeometryTable& geo);

double territory_perimeter(std::span<const int> units,
                           const GeometryTable& geo);
double compactness_ratio(std::span<const int> units, const GeometryTable& geo,
                         CompactnessMode mode);
bool is_contiguous(std::span<const int> units, const GeometryTable& geo);

// Outer boundary of the union of the given cells as closed rings (first
// point not repeated). Counter-clockwise rings are outer boundaries,
// clockwise rings are holes.
std::vector<std::vector<Point>> dissolve(std::span<const int> units,
                                         const GeometryTable& geo);

// GeoJSON FeatureCollection, one Feature per basic unit; the tessellation
// box travels in the collection's "bbox" member.
nlohmann::json cells_to_geojson(const GeometryTable& geo);
GeometryTable cells_from_geojson(const nlohmann::json& collection);

}  // namespace tddmp

#endif
