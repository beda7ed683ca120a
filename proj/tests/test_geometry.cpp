#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "tddmp/geometry.hpp"

using namespace tddmp;

namespace {

// Cell of site i as the box clipped by every bisector half-plane.
std::vector<Point> brute_cell(const std::vector<Point>& sites, std::size_t i, const Box& box) {
  std::vector<Point> poly{{box.min_x, box.min_y}, {box.max_x, box.min_y},
                          {box.max_x, box.max_y}, {box.min_x, box.max_y}};
  for (std::size_t j = 0; j < sites.size(); ++j) {
    if (j == i) continue;
    // Keep points p with (p - m) . (sj - si) <= 0.
    const Point si = sites[i], sj = sites[j];
    const Point m{(si.x + sj.x) / 2, (si.y + sj.y) / 2};
    const Point nrm{sj.x - si.x, sj.y - si.y};
    auto side = [&](Point p) { return (p.x - m.x) * nrm.x + (p.y - m.y) * nrm.y; };
    std::vector<Point> out;
    for (std::size_t k = 0; k < poly.size(); ++k) {
      const Point a = poly[k], b = poly[(k + 1) % poly.size()];
      const double sa = side(a), sb = side(b);
      if (sa <= 0) out.push_back(a);
      if ((sa < 0 && sb > 0) || (sa > 0 && sb < 0)) {
        const double u = sa / (sa - sb);
        out.push_back({a.x + u * (b.x - a.x), a.y + u * (b.y - a.y)});
      }
    }
    poly = out;
  }
  return poly;
}

GeometryTable grid(int cols, int rows) {
  std::vector<Point> sites;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) sites.push_back({c + 0.5, r + 0.5});
  }
  return GeometryTable::from_sites(sites, Box{0, 0, double(cols), double(rows)});
}

BasicUnitGeometry unit_from_polygon(std::vector<Point> poly) {
  BasicUnitGeometry u;
  u.polygon = std::move(poly);
  u.area = polygon_area(u.polygon);
  u.perimeter = polygon_perimeter(u.polygon);
  u.sqrt_area = std::sqrt(u.area);
  return u;
}

// Random connected set of grid cells grown from a seed cell.
std::vector<int> random_blob(const GeometryTable& geo, std::mt19937_64& rng, int size) {
  std::uniform_int_distribution<int> start(0, int(geo.size()) - 1);
  std::set<int> blob{start(rng)};
  while (int(blob.size()) < size) {
    std::vector<int> frontier;
    for (int u : blob) {
      for (const auto& nb : geo.neighbors(u)) {
        if (!blob.count(nb.unit)) frontier.push_back(nb.unit);
      }
    }
    if (frontier.empty()) break;
    std::uniform_int_distribution<std::size_t> pick(0, frontier.size() - 1);
    blob.insert(frontier[pick(rng)]);
  }
  return {blob.begin(), blob.end()};
}

}  // namespace

TEST(Voronoi, SingleSiteFillsBox) {
  const std::vector<Point> sites{{0.3, 0.6}};
  const auto cells = build_voronoi(sites, Box{0, 0, 1, 1});
  ASSERT_EQ(cells.size(), 1u);
  EXPECT_NEAR(cells[0].area, 1.0, 1e-12);
  EXPECT_NEAR(cells[0].perimeter, 4.0, 1e-12);
  EXPECT_TRUE(cells[0].neighbors.empty());
}

TEST(Voronoi, TwoSitesSplitBoxInHalves) {
  const std::vector<Point> sites{{0.25, 0.5}, {0.75, 0.5}};
  const auto cells = build_voronoi(sites, Box{0, 0, 1, 1});
  ASSERT_EQ(cells.size(), 2u);
  for (const auto& c : cells) {
    EXPECT_NEAR(c.area, 0.5, 1e-12);
    EXPECT_NEAR(c.perimeter, 3.0, 1e-12);
    ASSERT_EQ(c.neighbors.size(), 1u);
    EXPECT_NEAR(c.neighbors[0].shared_length, 1.0, 1e-12);
  }
}

TEST(Voronoi, GridMatchesHalfPlaneClipping) {
  const std::vector<Point> sites{{0.5, 0.5}, {1.5, 0.5}, {0.5, 1.5}, {1.5, 1.5}};
  const Box box{0, 0, 2, 2};
  const auto cells = build_voronoi(sites, box);
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const auto oracle = brute_cell(sites, i, box);
    EXPECT_NEAR(cells[i].area, polygon_area(oracle), 1e-9);
    EXPECT_NEAR(cells[i].perimeter, polygon_perimeter(oracle), 1e-9);
  }
  const GeometryTable geo(cells, box);
  EXPECT_TRUE(geo.adjacent(0, 1));
  EXPECT_TRUE(geo.adjacent(0, 2));
  EXPECT_TRUE(geo.adjacent(1, 3));
  EXPECT_TRUE(geo.adjacent(2, 3));
  EXPECT_FALSE(geo.adjacent(0, 3));
  EXPECT_FALSE(geo.adjacent(1, 2));
}

TEST(Voronoi, RandomSitesMatchHalfPlaneClipping) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(1.0, 99.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Point> sites;
    for (int k = 0; k < 25; ++k) sites.push_back({u(rng), u(rng)});
    const Box box{0, 0, 100, 100};
    const auto cells = build_voronoi(sites, box);
    double total = 0.0;
    for (std::size_t i = 0; i < sites.size(); ++i) {
      const auto oracle = brute_cell(sites, i, box);
      EXPECT_NEAR(cells[i].area, polygon_area(oracle), 1e-6);
      EXPECT_NEAR(cells[i].perimeter, polygon_perimeter(oracle), 1e-6);
      EXPECT_NEAR(cells[i].sqrt_area, std::sqrt(cells[i].area), 1e-9 * cells[i].sqrt_area);
      total += cells[i].area;
      double shared = 0.0;
      for (const auto& nb : cells[i].neighbors) shared += nb.shared_length;
      EXPECT_LE(shared, cells[i].perimeter + 1e-9);
    }
    EXPECT_NEAR(total, box.area(), 1e-6 * box.area());
    const GeometryTable geo(cells, box);
    for (std::size_t i = 0; i < sites.size(); ++i) {
      for (const auto& nb : geo.neighbors(int(i))) {
        EXPECT_EQ(geo.shared_length(nb.unit, int(i)), nb.shared_length);
      }
    }
  }
}

TEST(Voronoi, RejectsDuplicateAndOutsideSites) {
  const std::vector<Point> dup{{0.5, 0.5}, {0.5, 0.5}};
  EXPECT_THROW(build_voronoi(dup, Box{0, 0, 1, 1}), GeometryError);
  const std::vector<Point> outside{{0.5, 0.5}, {1.0, 0.5}};
  EXPECT_THROW(build_voronoi(outside, Box{0, 0, 1, 1}), GeometryError);
}

TEST(Perimeter, GridExamples) {
  const auto geo = grid(2, 2);
  const std::vector<int> one{0}, two{0, 1}, all{0, 1, 2, 3};
  EXPECT_NEAR(territory_perimeter(one, geo), 4.0, 1e-12);
  EXPECT_NEAR(territory_perimeter(two, geo), 6.0, 1e-12);
  EXPECT_NEAR(territory_perimeter(all, geo), 8.0, 1e-12);
  const std::vector<int> bad{7};
  EXPECT_ANY_THROW(territory_perimeter(bad, geo));
}

TEST(CompactnessRatio, SquareAndDomino) {
  const auto geo = grid(2, 1);
  const std::vector<int> one{0}, two{0, 1};
  EXPECT_NEAR(compactness_ratio(one, geo, CompactnessMode::sqrt_of_sum), 4.0, 1e-12);
  EXPECT_NEAR(compactness_ratio(one, geo, CompactnessMode::sum_of_sqrts), 4.0, 1e-12);
  EXPECT_NEAR(compactness_ratio(two, geo, CompactnessMode::sqrt_of_sum), 6.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(compactness_ratio(two, geo, CompactnessMode::sum_of_sqrts), 3.0, 1e-12);
}

TEST(CompactnessRatio, RegularPolygonApproachesCircle) {
  std::vector<Point> poly;
  for (int k = 0; k < 64; ++k) {
    const double a = 2 * std::numbers::pi * k / 64;
    poly.push_back({std::cos(a), std::sin(a)});
  }
  auto u = unit_from_polygon(poly);
  u.unit_id = 0;
  const GeometryTable geo({u}, Box{-1, -1, 1, 1});
  const std::vector<int> one{0};
  const double target = 2 * std::sqrt(std::numbers::pi);
  EXPECT_NEAR(compactness_ratio(one, geo, CompactnessMode::sqrt_of_sum), target, 1e-3 * target);
}

TEST(Contiguity, Examples) {
  const auto geo = grid(2, 2);
  EXPECT_TRUE(is_contiguous(std::vector<int>{}, geo));
  EXPECT_TRUE(is_contiguous(std::vector<int>{2}, geo));
  EXPECT_TRUE(is_contiguous(std::vector<int>{0, 1}, geo));
  EXPECT_FALSE(is_contiguous(std::vector<int>{0, 3}, geo));
  EXPECT_TRUE(is_contiguous(std::vector<int>{0, 1, 2}, geo));
}

TEST(Contiguity, MatchesBreadthFirstOracle) {
  const auto geo = grid(4, 4);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<int> units;
    for (int i = 0; i < 16; ++i) {
      if (rng() % 3 == 0) units.push_back(i);
    }
    // Grid-coordinate BFS, independent of the stored adjacency.
    std::set<int> in(units.begin(), units.end()), seen;
    if (!units.empty()) {
      std::vector<int> queue{units.front()};
      seen.insert(units.front());
      while (!queue.empty()) {
        const int u = queue.back();
        queue.pop_back();
        const int r = u / 4, c = u % 4;
        const int cand[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
        for (const auto& rc : cand) {
          if (rc[0] < 0 || rc[0] > 3 || rc[1] < 0 || rc[1] > 3) continue;
          const int v = rc[0] * 4 + rc[1];
          if (in.count(v) && seen.insert(v).second) queue.push_back(v);
        }
      }
    }
    EXPECT_EQ(is_contiguous(units, geo), seen.size() == in.size());
  }
}

TEST(GeometryProperties, BoundaryIdentityAndRatioBounds) {
  const auto geo = grid(6, 6);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto blob = random_blob(geo, rng, 2 + int(rng() % 10));
    // Perimeter additivity and the add-one-unit identity.
    for (int u : blob) {
      const std::vector<int> single{u};
      EXPECT_NEAR(territory_perimeter(single, geo), geo.unit(u).perimeter, 1e-12);
    }
    std::vector<int> rest(blob.begin(), blob.end() - 1);
    const int added = blob.back();
    if (!rest.empty()) {
      double shared = 0.0;
      for (int v : rest) shared += geo.shared_length(v, added);
      EXPECT_NEAR(territory_perimeter(blob, geo),
                  territory_perimeter(rest, geo) + geo.unit(added).perimeter - 2 * shared, 1e-9);
      const auto agg = shape_of(rest, geo).with_unit(geo.unit(added), shared);
      EXPECT_NEAR(agg.perimeter, territory_perimeter(blob, geo), 1e-9);
    }
    const double sq = compactness_ratio(blob, geo, CompactnessMode::sqrt_of_sum);
    const double ss = compactness_ratio(blob, geo, CompactnessMode::sum_of_sqrts);
    EXPECT_GE(sq, 3.5);
    EXPECT_LE(ss, sq + 1e-12);
  }
}

TEST(Dissolve, UnionPerimeterMatchesTerritoryPerimeter) {
  const auto geo = grid(5, 5);
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const auto blob = random_blob(geo, rng, 1 + int(rng() % 12));
    double length = 0.0, area = 0.0;
    for (const auto& ring : dissolve(blob, geo)) {
      length += polygon_perimeter(ring);
      area += polygon_area(ring);
    }
    EXPECT_NEAR(length, territory_perimeter(blob, geo), 1e-6);
    EXPECT_NEAR(area, double(blob.size()), 1e-6);
  }
}

TEST(GeoJson, CellsRoundTrip) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(1.0, 9.0);
  std::vector<Point> sites;
  for (int k = 0; k < 12; ++k) sites.push_back({u(rng), u(rng)});
  const auto geo = GeometryTable::from_sites(sites, Box{0, 0, 10, 10});
  const auto doc = cells_to_geojson(geo);
  EXPECT_EQ(doc.at("features").size(), 12u);
  EXPECT_EQ(cells_from_geojson(doc), geo);
}

TEST(Hull, InflatesByTenPercent) {
  const std::vector<Point> pts{{0, 0}, {10, 20}};
  const auto box = inflated_hull(pts);
  EXPECT_NEAR(box.min_x, -1.0, 1e-12);
  EXPECT_NEAR(box.max_x, 11.0, 1e-12);
  EXPECT_NEAR(box.min_y, -2.0, 1e-12);
  EXPECT_NEAR(box.max_y, 22.0, 1e-12);
}
