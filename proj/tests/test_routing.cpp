#include <gtest/gtest.h>

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

#include "test_support.hpp"
#include "tddmp/generators.hpp"
#include "tddmp/routing.hpp"

using namespace tddmp;
using namespace tddmp::testing;

namespace {

WorkTerritory territory_with(const Instance& inst, std::vector<int> members,
                             std::vector<std::vector<int>> routes) {
  WorkTerritory t;
  t.id = 1;
  std::sort(members.begin(), members.end());
  t.members = members;
  routes.resize(static_cast<std::size_t>(inst.day_count));
  t.routes = routes;
  t.shape = shape_of(t.members, inst.geometry);
  return t;
}

Plan plan_of(const Instance& inst, const std::vector<std::vector<int>>& territories) {
  return plan_from_solution(make_solution(inst, territories), inst);
}

double total_ratio(const Plan& plan, const Instance& inst) {
  double sum = 0.0;
  for (const auto& t : plan.territories()) {
    sum += compactness_ratio(t.members, inst.geometry, inst.mode);
  }
  return sum;
}

}  // namespace

TEST(BestInsertion, EmptyRouteSinglePosition) {
  auto inst = custom_instance({{0, 0}, {6, 8}}, 1, 100, 100);
  inst.demand[1][0] = 5;
  inst.service[1] = 3;
  inst.windows[1] = {15, 30};
  const auto plan = best_insertion(1, territory_with(inst, {}, {{}}), inst);
  ASSERT_TRUE(plan.feasible);
  ASSERT_EQ(plan.per_day.size(), 1u);
  EXPECT_EQ(plan.per_day[0].position, 0);
  // Arrive at 10, wait until 15, serve 3, drive back 10.
  EXPECT_NEAR(plan.per_day[0].delta_cost, 15 + 3 + 10, 1e-9);
}

TEST(BestInsertion, CollinearDetourIsZero) {
  auto inst = custom_instance({{0, 0}, {1, 0}, {2, 0}}, 1, 100, 100);
  inst.demand[1][0] = inst.demand[2][0] = 1;
  const auto plan = best_insertion(1, territory_with(inst, {2}, {{2}}), inst);
  ASSERT_TRUE(plan.feasible);
  EXPECT_EQ(plan.per_day[0].position, 0);
  EXPECT_NEAR(plan.per_day[0].delta_cost, 0.0, 1e-9);
}

TEST(BestInsertion, RejectsExistingMember) {
  auto inst = custom_instance({{0, 0}, {1, 0}}, 1, 100, 100);
  inst.demand[1][0] = 1;
  EXPECT_THROW(best_insertion(1, territory_with(inst, {1}, {{1}}), inst), std::invalid_argument);
}

TEST(BestInsertion, IncompatibleWindowReportsLateness) {
  auto inst = custom_instance({{0, 0}, {10, 0}, {20, 0}, {30, 0}, {5, 5}}, 1, 100, 200);
  for (int i = 1; i <= 4; ++i) inst.demand[i][0] = 1;
  inst.windows[4] = {0, 2};  // unreachable before 7.07
  const auto t = territory_with(inst, {1, 2, 3}, {{1, 2, 3}});
  const auto plan = best_insertion(4, t, inst);
  EXPECT_FALSE(plan.feasible);
  ASSERT_EQ(plan.per_day.size(), 1u);
  EXPECT_FALSE(plan.per_day[0].feasible);
  // Oracle: smallest lateness over every position.
  double best = std::numeric_limits<double>::infinity();
  for (int p = 0; p <= 3; ++p) {
    std::vector<int> trial{1, 2, 3};
    trial.insert(trial.begin() + p, 4);
    best = std::min(best, evaluate_route(trial, 0, inst).lateness);
  }
  EXPECT_NEAR(plan.per_day[0].lateness, best, 1e-9);
  EXPECT_NEAR(best, std::hypot(5, 5) - 2, 1e-9);
}

TEST(BestInsertion, MatchesExhaustivePositions) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    RandomInstanceParams p;
    p.customer_count = 7;
    p.horizon_days = 1;
    p.service_frequency = 1.0;
    p.window_width = 120;
    p.capacity = 1000;
    p.rng_seed = 1000 + trial;
    const auto inst = make_random_instance(p);
    // A feasible route over a random subset, built greedily.
    std::vector<int> ids(7);
    std::iota(ids.begin(), ids.end(), 1);
    std::shuffle(ids.begin(), ids.end(), rng);
    const int u = ids.back();
    ids.pop_back();
    std::vector<int> route;
    for (int v : ids) {
      if (route.size() == 6) break;
      auto cand = best_insertion(v, territory_with(inst, route, {route}), inst);
      if (cand.feasible) route.insert(route.begin() + cand.per_day[0].position, v);
    }
    const auto plan = best_insertion(u, territory_with(inst, route, {route}), inst);
    const double old = evaluate_route(route, 0, inst).completion;
    int best_pos = -1;
    double best_delta = std::numeric_limits<double>::infinity();
    for (int pos = 0; pos <= int(route.size()); ++pos) {
      auto t = route;
      t.insert(t.begin() + pos, u);
      const auto s = evaluate_route(t, 0, inst);
      if (!s.feasible(inst.capacity)) continue;
      if (s.completion - old < best_delta - 1e-9) {
        best_delta = s.completion - old;
        best_pos = pos;
      }
    }
    ASSERT_EQ(plan.feasible, best_pos >= 0) << "trial " << trial;
    if (best_pos >= 0) {
      EXPECT_EQ(plan.per_day[0].position, best_pos) << "trial " << trial;
      EXPECT_NEAR(plan.per_day[0].delta_cost, best_delta, 1e-9);
    }
  }
}

TEST(Penalty, Examples) {
  auto inst = custom_instance({{0, 0}, {10, 0}, {0, 10}}, 1, 100, 1000);
  inst.demand[1][0] = 60;
  inst.demand[2][0] = 60;
  const auto separate = plan_of(inst, {{1}, {2}});
  const auto ok = penalty(separate, inst);
  EXPECT_EQ(ok.capacity, 0.0);
  EXPECT_EQ(ok.time_window, 0.0);
  EXPECT_EQ(ok.combined, 0.0);
  EXPECT_TRUE(ok.feasible());

  const auto heavy = penalty(plan_of(inst, {{1, 2}}), inst);
  EXPECT_NEAR(heavy.capacity, 20.0, 1e-9);

  inst.windows[1] = {0, 3};
  const auto late = penalty(plan_of(inst, {{1}, {2}}), inst);
  EXPECT_NEAR(late.time_window, 7.0, 1e-9);
  EXPECT_NEAR(late.combined, 7.0, 1e-9);
}

TEST(Penalty, AgreesWithValidator) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    RandomInstanceParams p;
    p.customer_count = 6;
    p.rng_seed = 500 + trial;
    const auto inst = make_random_instance(p);
    // Random partition routed in random order.
    std::vector<std::vector<int>> parts(1 + rng() % 3);
    for (int i = 1; i <= 6; ++i) parts[rng() % parts.size()].push_back(i);
    std::erase_if(parts, [](const auto& v) { return v.empty(); });
    for (auto& part : parts) std::shuffle(part.begin(), part.end(), rng);
    const auto sol = make_solution(inst, parts);
    const auto plan = plan_from_solution(sol, inst);
    const auto report = validate(inst, sol);
    const bool routes_ok = report.count(ConstraintFamily::capacity) == 0 &&
                           report.count(ConstraintFamily::schedule) == 0;
    EXPECT_EQ(penalty(plan, inst).feasible(), routes_ok) << "trial " << trial;
  }
}

TEST(TwoOpt, TwoVisitsUnchanged) {
  auto inst = custom_instance({{0, 0}, {1, 3}, {4, 1}}, 1, 100, 100);
  inst.demand[1][0] = inst.demand[2][0] = 1;
  EXPECT_EQ(two_opt({1, 2}, 0, inst, RouteObjective::travel_time), (std::vector<int>{1, 2}));
}

TEST(TwoOpt, CollinearPermutationsReachOptimum) {
  auto inst = custom_instance({{0, 0}, {1, 0}, {2, 0}, {3, 0}, {4, 0}}, 1, 100, 100);
  for (int i = 1; i <= 4; ++i) inst.demand[i][0] = 1;
  std::vector<int> perm{1, 2, 3, 4};
  double optimum = std::numeric_limits<double>::infinity();
  do {
    optimum = std::min(optimum, evaluate_route(perm, 0, inst).travel);
  } while (std::next_permutation(perm.begin(), perm.end()));
  perm = {1, 2, 3, 4};
  int count = 0;
  do {
    const auto out = two_opt(perm, 0, inst, RouteObjective::travel_time);
    EXPECT_NEAR(evaluate_route(out, 0, inst).travel, optimum, 1e-9);
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  EXPECT_EQ(count, 24);
}

TEST(TwoOpt, NeverWorsensAndKeepsFeasibility) {
  for (int trial = 0; trial < 100; ++trial) {
    RandomInstanceParams p;
    p.customer_count = 8;
    p.horizon_days = 1;
    p.service_frequency = 1.0;
    p.window_width = 200;
    p.horizon = 600;
    p.capacity = 1000;
    p.rng_seed = 70 + trial;
    const auto inst = make_random_instance(p);
    std::vector<int> route(8);
    std::iota(route.begin(), route.end(), 1);
    const auto before = evaluate_route(route, 0, inst);
    const auto out = two_opt(route, 0, inst, RouteObjective::travel_time);
    const auto after = evaluate_route(out, 0, inst);
    if (before.feasible(inst.capacity)) {
      EXPECT_TRUE(after.feasible(inst.capacity));
      EXPECT_LE(after.travel, before.travel + 1e-9);
    }
    const auto again = two_opt(out, 0, inst, RouteObjective::travel_time);
    if (after.feasible(inst.capacity)) EXPECT_EQ(again, out);
    const auto pen = two_opt(route, 0, inst, RouteObjective::penalty);
    EXPECT_LE(route_penalty(evaluate_route(pen, 0, inst), inst.capacity).combined,
              route_penalty(before, inst.capacity).combined + 1e-9);
  }
}

TEST(Relocate, BoundaryMoveLowersCompactnessSum) {
  auto inst = grid_instance(5, 1, 1, 100, 1000);
  for (int i = 1; i <= 4; ++i) inst.demand[i][0] = 1;
  auto plan = plan_of(inst, {{1, 2, 3}, {4}});
  const double before = total_ratio(plan, inst);
  RelocateOptions opt;
  opt.objective = RelocateObjective::compactness;
  EXPECT_EQ(relocate(plan, inst, opt), 1);
  const double after = total_ratio(plan, inst);
  EXPECT_NEAR(before, 8 / std::sqrt(3.0) + 4, 1e-9);
  EXPECT_NEAR(after, 2 * 6 / std::sqrt(2.0), 1e-9);
  EXPECT_EQ(plan.owner(3), plan.owner(4));
  EXPECT_TRUE(validate(inst, to_solution(plan, inst)).ok());
}

TEST(Relocate, DisconnectingMoveIsInadmissible) {
  // Cells: depot 0 at (0,0), 1 (1,0), 2 (2,0), 3 (0,1), 4 (1,1), 5 (2,1).
  auto inst = grid_instance(3, 2, 1, 100, 1000);
  inst.demand[1][0] = 10;
  inst.demand[3][0] = 10;
  inst.demand[4][0] = 90;
  inst.demand[2][0] = 100;
  inst.demand[5][0] = 10;
  auto plan = plan_of(inst, {{1, 3, 4}, {2}, {5}});
  const auto before = penalty(plan, inst).combined;
  EXPECT_NEAR(before, 10.0, 1e-9);
  // Moving 4 alone would remove every excess, but splits {1, 3}.
  auto cheat = plan_of(inst, {{1, 3}, {2}, {4, 5}});
  EXPECT_EQ(penalty(cheat, inst).combined, 0.0);
  RelocateOptions opt;
  opt.objective = RelocateObjective::penalty;
  EXPECT_EQ(relocate(plan, inst, opt), 0);
  EXPECT_EQ(plan.owner(4), plan.owner(1));
}

TEST(Relocate, SingleTerritoryIsFixedPoint) {
  auto inst = grid_instance(3, 1, 1, 100, 1000);
  inst.demand[1][0] = inst.demand[2][0] = 1;
  auto plan = plan_of(inst, {{1, 2}});
  EXPECT_EQ(relocate(plan, inst, RelocateOptions{}), 0);
}

TEST(Relocate, KeepsTerritoriesContiguousAndCompact) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 60; ++trial) {
    RandomInstanceParams p;
    p.customer_count = 14;
    p.horizon_days = 2;
    p.capacity = 400;
    p.window_width = 240;
    p.rng_seed = 300 + trial;
    p.compactness_bound = 6.0;
    p.mode = CompactnessMode::sqrt_of_sum;
    const auto inst = make_random_instance(p);
    // Start from singletons merged along adjacency into contiguous blobs.
    Plan plan = singleton_plan(inst);
    for (int step = 0; step < 8; ++step) {
      const auto& ts = plan.territories();
      const auto& t = ts[rng() % ts.size()];
      const int u = t.members.front();
      const auto adj = plan.adjacent_territories(u, inst.geometry);
      std::vector<int> others;
      for (int id : adj) {
        if (id != t.id) others.push_back(id);
      }
      if (others.empty()) continue;
      const int target = others[rng() % others.size()];
      auto moved = plan.remove_territory(t.id);
      for (int m : moved.members) {
        plan.add_member(target, m, inst.geometry);
        remove_from_routes(moved, m, inst);
      }
      auto& tt = plan.territory(target);
      for (int d = 0; d < inst.day_count; ++d) {
        tt.routes[d].clear();
        for (int m : tt.members) {
          if (inst.active(m, d)) tt.routes[d].push_back(m);
        }
      }
    }
    RelocateOptions opt;
    opt.objective = trial % 2 ? RelocateObjective::penalty : RelocateObjective::compactness;
    relocate(plan, inst, opt);
    for (const auto& t : plan.territories()) {
      if (t.members.size() < 2) continue;
      EXPECT_TRUE(is_contiguous(t.members, inst.geometry));
    }
  }
}
