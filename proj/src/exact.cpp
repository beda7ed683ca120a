#include "tddmp/exact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "tddmp/routing.hpp"

namespace tddmp {

namespace {

constexpr double time_tol = 1e-6;
constexpr double load_tol = 1e-9;
constexpr double inf = std::numeric_limits<double>::infinity();

// Earliest start at `last` after visiting `mask` (indices into `nodes`).
struct RouteTable {
  std::vector<int> nodes;
  std::vector<double> ready;  // [mask * m + last]
  std::vector<int> parent;    // previous last, -1 at the first visit

  std::size_t m() const { return nodes.size(); }
  double& at(std::size_t mask, std::size_t last) { return ready[mask * m() + last]; }
};

RouteTable route_table(const std::vector<int>& nodes, const Instance& inst) {
  RouteTable tab;
  tab.nodes = nodes;
  const std::size_t m = nodes.size();
  const std::size_t full = std::size_t{1} << m;
  tab.ready.assign(full * m, inf);
  tab.parent.assign(full * m, -1);
  const double depart = inst.windows[0].open;
  for (std::size_t j = 0; j < m; ++j) {
    const int v = nodes[j];
    const double s = std::max(inst.windows[v].open, depart + inst.t(0, v));
    if (s <= inst.windows[v].close + time_tol) tab.at(std::size_t{1} << j, j) = s;
  }
  for (std::size_t mask = 1; mask < full; ++mask) {
    for (std::size_t i = 0; i < m; ++i) {
      const double r = tab.at(mask, i);
      if (r == inf) continue;
      const int u = nodes[i];
      const double leave = r + inst.service[u];
      for (std::size_t j = 0; j < m; ++j) {
        if (mask & (std::size_t{1} << j)) continue;
        const int v = nodes[j];
        const double s = std::max(inst.windows[v].open, leave + inst.t(u, v));
        if (s > inst.windows[v].close + time_tol) continue;
        const std::size_t next = mask | (std::size_t{1} << j);
        if (s < tab.at(next, j)) {
          tab.at(next, j) = s;
          tab.parent[next * m + j] = static_cast<int>(i);
        }
      }
    }
  }
  return tab;
}

// Completion time of the best route over `mask`, with its last index.
std::pair<double, int> best_completion(RouteTable& tab, std::size_t mask,
                                       const Instance& inst) {
  double best = inf;
  int last = -1;
  for (std::size_t i = 0; i < tab.m(); ++i) {
    const double r = tab.at(mask, i);
    if (r == inf) continue;
    const int u = tab.nodes[i];
    const double done = r + inst.service[u] + inst.t(u, 0);
    if (done <= inst.workday + time_tol && done < best) {
      best = done;
      last = static_cast<int>(i);
    }
  }
  return {best, last};
}

std::vector<int> unwind(const RouteTable& tab, std::size_t mask, int last) {
  std::vector<int> seq;
  while (last >= 0) {
    seq.push_back(tab.nodes[static_cast<std::size_t>(last)]);
    const int prev = tab.parent[mask * tab.m() + static_cast<std::size_t>(last)];
    mask &= ~(std::size_t{1} << static_cast<std::size_t>(last));
    last = prev;
  }
  std::reverse(seq.begin(), seq.end());
  return seq;
}

void check_guard(const Instance& inst) {
  if (inst.customer_count() > exact_max_customers || inst.day_count > exact_max_days) {
    throw std::invalid_argument("exact oracle limited to " + std::to_string(exact_max_customers) +
                                " customers and " + std::to_string(exact_max_days) + " days");
  }
}

}  // namespace

std::string to_string(ExactStatus status) {
  switch (status) {
    case ExactStatus::optimal: return "optimal";
    case ExactStatus::infeasible: return "infeasible";
    case ExactStatus::unknown: return "unknown";
  }
  return "unknown";
}

std::string to_string(OracleVerdict verdict) {
  switch (verdict) {
    case OracleVerdict::optimal: return "optimal";
    case OracleVerdict::suboptimal: return "suboptimal";
    case OracleVerdict::infeasible: return "infeasible";
  }
  return "infeasible";
}

std::optional<std::vector<int>> exact_route(const std::vector<int>& customers, int day,
                                            const Instance& inst) {
  if (customers.size() > 16) {
    throw std::invalid_argument("exact_route handles at most 16 visits");
  }
  double load = 0.0;
  for (int c : customers) {
    if (!inst.valid_customer(c)) throw std::invalid_argument("unknown customer " + std::to_string(c));
    load += inst.q(c, day);
  }
  if (load > inst.capacity + load_tol) return std::nullopt;
  if (customers.empty()) return std::vector<int>{};
  auto tab = route_table(customers, inst);
  const std::size_t full = (std::size_t{1} << customers.size()) - 1;
  const auto [done, last] = best_completion(tab, full, inst);
  if (last < 0) return std::nullopt;
  return unwind(tab, full, last);
}

ExactResult exact_solve(const Instance& inst, const ExactLimits& limits) {
  check_guard(inst);
  const int n = inst.customer_count();
  const std::size_t full = (std::size_t{1} << n) - 1;
  ExactResult result;
  if (n == 0) {
    result.status = ExactStatus::optimal;
    result.solution = Solution{};
    return result;
  }

  // Route feasibility of every subset of each day's active customers.
  std::vector<std::vector<char>> route_ok(static_cast<std::size_t>(inst.day_count));
  std::vector<std::size_t> active_mask(static_cast<std::size_t>(inst.day_count), 0);
  for (int d = 0; d < inst.day_count; ++d) {
    std::vector<int> active;
    for (int i = 1; i <= n; ++i) {
      if (inst.active(i, d)) {
        active.push_back(i);
        active_mask[d] |= std::size_t{1} << (i - 1);
      }
    }
    auto tab = route_table(active, inst);
    auto& ok = route_ok[d];
    ok.assign(full + 1, 0);
    ok[0] = 1;
    const std::size_t sub_full = std::size_t{1} << active.size();
    for (std::size_t sub = 1; sub < sub_full; ++sub) {
      std::size_t mask = 0;
      double load = 0.0;
      for (std::size_t k = 0; k < active.size(); ++k) {
        if (sub & (std::size_t{1} << k)) {
          mask |= std::size_t{1} << (active[k] - 1);
          load += inst.q(active[k], d);
        }
      }
      ok[mask] = load <= inst.capacity + load_tol && best_completion(tab, sub, inst).second >= 0;
    }
  }

  std::vector<char> block_ok(full + 1, 0);
  for (std::size_t mask = 1; mask <= full; ++mask) {
    std::vector<int> units;
    for (int i = 1; i <= n; ++i) {
      if (mask & (std::size_t{1} << (i - 1))) units.push_back(i);
    }
    if (!is_contiguous(units, inst.geometry)) continue;
    if (compactness_ratio(units, inst.geometry, inst.mode) > inst.compactness_bound + 1e-9) continue;
    bool ok = true;
    for (int d = 0; d < inst.day_count && ok; ++d) ok = route_ok[d][mask & active_mask[d]];
    block_ok[mask] = ok;
  }

  // Minimum number of feasible blocks covering each mask.
  constexpr int none = std::numeric_limits<int>::max();
  std::vector<int> best(full + 1, none);
  std::vector<std::size_t> choice(full + 1, 0);
  best[0] = 0;
  for (std::size_t mask = 1; mask <= full; ++mask) {
    const std::size_t low = mask & (~mask + 1);
    const std::size_t rest = mask ^ low;
    // Every submask of `rest`, including the empty one.
    for (std::size_t sub = rest;; sub = (sub - 1) & rest) {
      if (++result.nodes > limits.node_cap) {
        result.status = ExactStatus::unknown;
        double peak = 0.0;
        for (int d = 0; d < inst.day_count; ++d) {
          double load = 0.0;
          for (int i = 1; i <= n; ++i) load += inst.q(i, d);
          peak = std::max(peak, load);
        }
        result.best_bound = std::max(1, static_cast<int>(std::ceil(peak / inst.capacity - 1e-9)));
        return result;
      }
      const std::size_t block = sub | low;
      if (block_ok[block] && best[mask ^ block] != none && best[mask ^ block] + 1 < best[mask]) {
        best[mask] = best[mask ^ block] + 1;
        choice[mask] = block;
      }
      if (sub == 0) break;
    }
  }
  if (best[full] == none) {
    result.status = ExactStatus::infeasible;
    return result;
  }

  result.status = ExactStatus::optimal;
  result.optimum = best[full];
  result.best_bound = best[full];
  Plan plan(inst);
  int id = 1;
  for (std::size_t mask = full; mask != 0; mask ^= choice[mask]) {
    WorkTerritory t;
    t.id = id++;
    for (int i = 1; i <= n; ++i) {
      if (choice[mask] & (std::size_t{1} << (i - 1))) t.members.push_back(i);
    }
    t.routes.assign(static_cast<std::size_t>(inst.day_count), {});
    for (int d = 0; d < inst.day_count; ++d) {
      std::vector<int> active;
      for (int i : t.members) {
        if (inst.active(i, d)) active.push_back(i);
      }
      t.routes[d] = exact_route(active, d, inst).value();
    }
    t.shape = shape_of(t.members, inst.geometry);
    plan.add_territory(std::move(t));
  }
  result.solution = to_solution(plan, inst);
  return result;
}

OracleComparison verify_against_oracle(const Solution& solution, const Instance& inst,
                                       const ExactLimits& limits) {
  check_guard(inst);
  OracleComparison cmp;
  cmp.report = validate(inst, solution);
  const auto exact = exact_solve(inst, limits);
  cmp.optimum = exact.optimum;
  if (!cmp.report.ok()) {
    cmp.verdict = OracleVerdict::infeasible;
    return cmp;
  }
  if (exact.status != ExactStatus::optimal) {
    throw std::logic_error("oracle found no optimum for an instance with a valid solution");
  }
  const int count = solution.territory_count();
  if (count < exact.optimum) {
    throw std::logic_error("valid solution uses fewer territories than the oracle optimum");
  }
  cmp.gap = count - exact.optimum;
  cmp.verdict = cmp.gap == 0 ? OracleVerdict::optimal : OracleVerdict::suboptimal;
  return cmp;
}

}  // namespace tddmp
