#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <numeric>
#include <random>

#include "test_support.hpp"
#include "tddmp/model.hpp"

using namespace tddmp;
using namespace tddmp::testing;

TEST(Validate, SingleCustomerIsClean) {
  auto inst = custom_instance({{0, 0}, {3, 4}}, 1, 100, 100);
  inst.demand[1][0] = 10;
  const auto sol = make_solution(inst, {{1}});
  EXPECT_TRUE(validate(inst, sol).ok());
}

TEST(Validate, OverloadedRouteReportsExcess) {
  auto inst = custom_instance({{0, 0}, {1, 0}, {2, 0}}, 1, 100, 1000);
  inst.demand[1][0] = 60;
  inst.demand[2][0] = 60;
  const auto sol = make_solution(inst, {{1, 2}});
  const auto report = validate(inst, sol);
  ASSERT_EQ(report.violations.size(), 1u);
  EXPECT_EQ(report.violations[0].family, ConstraintFamily::capacity);
  EXPECT_NEAR(report.violations[0].magnitude, 20.0, 1e-9);
}

TEST(Validate, NonAdjacentTerritoryBreaksContiguity) {
  auto inst = grid_instance(4, 1, 1, 100, 1000);
  inst.demand[1][0] = 1;
  inst.demand[3][0] = 1;
  inst.demand[2][0] = 1;
  const auto sol = make_solution(inst, {{1, 3}, {2}});
  const auto report = validate(inst, sol);
  ASSERT_EQ(report.violations.size(), 1u);
  EXPECT_EQ(report.violations[0].family, ConstraintFamily::contiguity);
}

TEST(Validate, UnknownCustomerIsStructural) {
  auto inst = custom_instance({{0, 0}, {1, 1}}, 1, 100, 100);
  Solution sol;
  sol.territories.push_back(Territory{1, {5}, {}, 0, 0, 0});
  EXPECT_THROW(validate(inst, sol), StructuralError);
}

TEST(Validate, DetectsEveryTamperedFamily) {
  auto inst = grid_instance(3, 2, 2, 100, 1000);
  for (int i = 1; i <= 5; ++i) set_all_days(inst, i, 10);
  const auto good = make_solution(inst, {{1, 2}, {3, 4, 5}});
  ASSERT_TRUE(validate(inst, good).ok());

  auto missing = good;
  missing.territories[0].members = {1};
  EXPECT_GE(validate(inst, missing).count(ConstraintFamily::partition), 1u);

  auto late = good;
  late.territories[1].routes[0].starts[0] += 5;
  EXPECT_GE(validate(inst, late).count(ConstraintFamily::schedule), 1u);

  auto tight = inst;
  tight.compactness_bound = 4.1;
  EXPECT_GE(validate(tight, good).count(ConstraintFamily::compactness), 1u);

  auto stolen = good;
  stolen.territories[0].routes[0].visits.push_back(3);
  stolen.territories[0].routes[0].starts.push_back(0);
  stolen.territories[0].routes[0].waits.push_back(0);
  EXPECT_GE(validate(inst, stolen).count(ConstraintFamily::assignment), 1u);
}

TEST(Validate, IsIdempotent) {
  auto inst = custom_instance({{0, 0}, {1, 0}, {2, 0}}, 1, 50, 1000);
  inst.demand[1][0] = 30;
  inst.demand[2][0] = 30;
  const auto sol = make_solution(inst, {{1, 2}});
  const auto a = validate(inst, sol);
  const auto b = validate(inst, sol);
  ASSERT_EQ(a.violations.size(), b.violations.size());
  EXPECT_EQ(a.violations[0].magnitude, b.violations[0].magnitude);
}

TEST(Schedule, WaitsForWindowOpening) {
  auto inst = custom_instance({{0, 0}, {5, 0}}, 1, 100, 100);
  inst.demand[1][0] = 1;
  inst.windows[1] = {10, 20};
  const auto out = propagate_schedule({1}, 0, inst);
  ASSERT_TRUE(out.feasible());
  EXPECT_DOUBLE_EQ(out.route->starts[0], 10.0);
  EXPECT_DOUBLE_EQ(out.route->waits[0], 5.0);
}

TEST(Schedule, MissedWindowNamesCustomer) {
  auto inst = custom_instance({{0, 0}, {5, 0}}, 1, 100, 100);
  inst.demand[1][0] = 1;
  inst.windows[1] = {0, 4};
  const auto out = propagate_schedule({1}, 0, inst);
  ASSERT_FALSE(out.feasible());
  EXPECT_EQ(out.reason, "window missed at customer 1 by 1");
}

TEST(Schedule, UnitChain) {
  auto inst = custom_instance({{0, 0}, {1, 0}, {2, 0}, {3, 0}}, 1, 100, 100);
  for (int i = 1; i <= 3; ++i) inst.demand[i][0] = 1;
  const auto out = propagate_schedule({1, 2, 3}, 0, inst);
  ASSERT_TRUE(out.feasible());
  EXPECT_EQ(out.route->starts, (std::vector<double>{1, 2, 3}));
}

TEST(Schedule, RejectsInactiveCustomer) {
  auto inst = custom_instance({{0, 0}, {1, 0}}, 1, 100, 100);
  EXPECT_THROW(propagate_schedule({1}, 0, inst), std::invalid_argument);
}

// Any start-time vector on a grid: feasible iff the earliest-start one is.
TEST(Schedule, EarliestStartDominatesGridSearch) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> coord(0, 10);
  std::uniform_int_distribution<int> open(0, 20);
  std::uniform_int_distribution<int> width(0, 10);
  for (int trial = 0; trial < 150; ++trial) {
    const int m = 1 + int(rng() % 3);
    std::vector<Point> pts{{5, 5}};
    for (int k = 0; k < m; ++k) pts.push_back({coord(rng), coord(rng)});
    auto inst = custom_instance(pts, 1, 100, 40);
    for (int k = 1; k <= m; ++k) {
      inst.demand[k][0] = 1;
      const int a = open(rng);
      inst.windows[k] = {double(a), double(a + width(rng))};
      inst.service[k] = double(rng() % 3);
    }
    std::vector<int> seq(m);
    std::iota(seq.begin(), seq.end(), 1);
    const bool fast = propagate_schedule(seq, 0, inst).feasible();
    // Grid of integer starts plus each window's bounds.
    bool any = false;
    std::vector<double> s(m);
    std::function<void(int, double)> rec = [&](int k, double ready) {
      if (any) return;
      if (k == m) {
        any = ready + inst.t(seq[m - 1], 0) <= inst.workday + 1e-9;
        return;
      }
      const int j = seq[k];
      const double arrival = ready + inst.t(k == 0 ? 0 : seq[k - 1], j);
      std::vector<double> grid{inst.windows[j].open, inst.windows[j].close, arrival};
      for (int v = 0; v <= 40; ++v) grid.push_back(v);
      for (double start : grid) {
        if (start + 1e-9 < arrival || start < inst.windows[j].open - 1e-9 ||
            start > inst.windows[j].close + 1e-9) {
          continue;
        }
        rec(k + 1, start + inst.service[j]);
      }
    };
    rec(0, inst.windows[0].open);
    EXPECT_EQ(fast, any) << "trial " << trial;
  }
}

TEST(Cost, RoundTripHour) {
  auto inst = custom_instance({{0, 0}, {30, 0}}, 1, 100, 100);
  inst.demand[1][0] = 1;
  const auto sol = make_solution(inst, {{1}});
  const auto cost = solution_cost(sol, inst);
  EXPECT_EQ(cost.territories, 1);
  EXPECT_NEAR(cost.travel_hours, 1.0, 1e-12);
  EXPECT_EQ(cost.active_customer_days, 1);
}

TEST(Cost, EmptySolution) {
  auto inst = custom_instance({{0, 0}, {30, 0}}, 1, 100, 100);
  const auto cost = solution_cost(Solution{}, inst);
  EXPECT_EQ(cost.territories, 0);
  EXPECT_EQ(cost.travel_hours, 0.0);
  EXPECT_FALSE(cost.average_ratio.has_value());
}

TEST(Instance, ChecksInvariants) {
  auto inst = custom_instance({{0, 0}, {3, 4}}, 1, 100, 100);
  EXPECT_TRUE(check_instance(inst).ok());
  auto heavy = inst;
  heavy.demand[1][0] = 101;
  EXPECT_FALSE(check_instance(heavy).ok());
  auto window = inst;
  window.windows[1] = {50, 40};
  EXPECT_FALSE(check_instance(window).ok());
  auto diag = inst;
  diag.travel[0] = 1.0;
  EXPECT_FALSE(check_instance(diag).ok());
  auto triangle = custom_instance({{0, 0}, {1, 0}, {2, 0}}, 1, 100, 100);
  triangle.travel[0 * 3 + 2] = 5.0;
  triangle.travel[2 * 3 + 0] = 5.0;
  const auto warn = check_instance(triangle);
  EXPECT_TRUE(warn.ok());
  EXPECT_FALSE(warn.warnings.empty());
}

TEST(Json, InstanceAndSolutionRoundTrip) {
  auto inst = grid_instance(3, 3, 2, 80, 500);
  std::mt19937_64 rng(4);
  for (int i = 1; i <= 8; ++i) {
    for (int d = 0; d < 2; ++d) inst.demand[i][d] = (rng() % 2) ? 0.1 * double(rng() % 300) : 0.0;
    inst.service[i] = 1.0 / 3.0;
    inst.windows[i] = {0.1, 499.9};
  }
  const auto back = instance_from_json(nlohmann::json::parse(to_json(inst).dump()));
  EXPECT_EQ(back, inst);
  const auto sol = make_solution(inst, {{1, 2, 4, 5}, {3, 6}, {7, 8}});
  EXPECT_EQ(solution_from_json(nlohmann::json::parse(to_json(sol).dump())), sol);
}

TEST(Json, RejectsWrongSchema) {
  EXPECT_THROW(instance_from_json(nlohmann::json{{"schema", "other"}}), std::invalid_argument);
  EXPECT_THROW(solution_from_json(nlohmann::json{{"kind", "solution"}}), std::invalid_argument);
}

TEST(GeoJson, OneFeaturePerTerritory) {
  auto inst = grid_instance(3, 1, 1, 100, 100);
  inst.demand[1][0] = inst.demand[2][0] = 1;
  const auto singles = make_solution(inst, {{1}, {2}});
  EXPECT_EQ(territories_to_geojson(singles, inst).at("features").size(), 2u);
  EXPECT_EQ(territories_to_geojson(Solution{}, inst).at("features").size(), 0u);
}
