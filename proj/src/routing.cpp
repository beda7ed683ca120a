#include "tddmp/routing.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace tddmp {

namespace {

constexpr double time_tol = 1e-6;
constexpr double load_tol = 1e-9;
constexpr double improve_eps = 1e-9;

Route schedule_relaxed(const std::vector<int>& visits, int day,
                       const Instance& inst) {
  Route r;
  r.day = day;
  int prev = 0;
  double clock = inst.windows[0].open;
  for (int j : visits) {
    const double arrival = clock + inst.t(prev, j);
    const double start = std::max(inst.windows[j].open, arrival);
    r.visits.push_back(j);
    r.starts.push_back(start);
    r.waits.push_back(start - arrival);
    clock = start + inst.service[j];
    prev = j;
  }
  return r;
}

double route_travel(const std::vector<int>& visits, const Instance& inst) {
  double total = 0.0;
  int prev = 0;
  for (int j : visits) {
    total += inst.t(prev, j);
    prev = j;
  }
  return visits.empty() ? 0.0 : total + inst.t(prev, 0);
}

std::vector<int> without(const std::vector<int>& visits, int customer) {
  std::vector<int> out;
  out.reserve(visits.size());
  for (int v : visits) {
    if (v != customer) out.push_back(v);
  }
  return out;
}

bool contiguous_without(const WorkTerritory& t, int customer,
                        const GeometryTable& geo) {
  std::vector<int> rest;
  rest.reserve(t.members.size());
  for (int m : t.members) {
    if (m != customer) rest.push_back(m);
  }
  return is_contiguous(rest, geo);
}

}  // namespace

bool RouteStats::feasible(double capacity) const {
  return load <= capacity + load_tol && lateness == 0.0 && overtime == 0.0;
}

RouteStats evaluate_route(const std::vector<int>& visits, int day,
                          const Instance& inst) {
  RouteStats s;
  int prev = 0;
  double clock = inst.windows[0].open;
  for (int j : visits) {
    s.load += inst.q(j, day);
    s.travel += inst.t(prev, j);
    const double arrival = clock + inst.t(prev, j);
    const double start = std::max(inst.windows[j].open, arrival);
    if (start - inst.windows[j].close > time_tol) {
      s.lateness += start - inst.windows[j].close;
    }
    clock = start + inst.service[j];
    prev = j;
  }
  if (!visits.empty()) {
    s.travel += inst.t(prev, 0);
    clock += inst.t(prev, 0);
  } else {
    clock = inst.windows[0].open;
  }
  s.completion = clock;
  if (clock - inst.workday > time_tol) {
    s.overtime = clock - inst.workday;
  }
  return s;
}

PenaltyBreakdown route_penalty(const RouteStats& stats, double capacity,
                               const PenaltyWeights& weights) {
  PenaltyBreakdown p;
  const double excess = stats.load - capacity;
  p.capacity = excess > load_tol ? excess : 0.0;
  p.overtime = stats.overtime;
  p.time_window = stats.lateness + stats.overtime;
  p.combined = weights.capacity * p.capacity + weights.time_window * p.time_window;
  return p;
}

// --- Plan -----------------------------------------------------------------

Plan::Plan(const Instance& instance)
    : owner_(static_cast<std::size_t>(instance.node_count()), -1) {}

bool Plan::has(int id) const {
  auto it = std::lower_bound(
      territories_.begin(), territories_.end(), id,
      [](const WorkTerritory& t, int key) { return t.id < key; });
  return it != territories_.end() && it->id == id;
}

const WorkTerritory& Plan::territory(int id) const {
  auto it = std::lower_bound(
      territories_.begin(), territories_.end(), id,
      [](const WorkTerritory& t, int key) { return t.id < key; });
  if (it == territories_.end() || it->id != id) {
    throw std::out_of_range("no territory " + std::to_string(id));
  }
  return *it;
}

WorkTerritory& Plan::territory(int id) {
  return const_cast<WorkTerritory&>(std::as_const(*this).territory(id));
}

int Plan::add_territory(WorkTerritory t) {
  if (has(t.id)) {
    throw std::invalid_argument("territory id " + std::to_string(t.id) + " in use");
  }
  for (int i : t.members) {
    if (owner_[i] >= 0) {
      throw std::invalid_argument("customer " + std::to_string(i) + " already assigned");
    }
    owner_[i] = t.id;
  }
  const int id = t.id;
  auto it = std::lower_bound(
      territories_.begin(), territories_.end(), id,
      [](const WorkTerritory& w, int key) { return w.id < key; });
  territories_.insert(it, std::move(t));
  return id;
}

WorkTerritory Plan::remove_territory(int id) {
  auto it = std::lower_bound(
      territories_.begin(), territories_.end(), id,
      [](const WorkTerritory& t, int key) { return t.id < key; });
  if (it == territories_.end() || it->id != id) {
    throw std::out_of_range("no territory " + std::to_string(id));
  }
  WorkTerritory out = std::move(*it);
  territories_.erase(it);
  for (int i : out.members) owner_[i] = -1;
  return out;
}

void Plan::add_member(int id, int customer, const GeometryTable& geo) {
  auto& t = territory(id);
  if (owner_[customer] >= 0) {
    throw std::invalid_argument("customer " + std::to_string(customer) + " already assigned");
  }
  const double shared = shared_with(id, customer, geo);
  t.shape = t.members.empty() ? ShapeAggregate{}.with_unit(geo.unit(customer), 0.0)
                              : t.shape.with_unit(geo.unit(customer), shared);
  t.members.insert(std::lower_bound(t.members.begin(), t.members.end(), customer), customer);
  owner_[customer] = id;
}

void Plan::remove_member(int id, int customer, const GeometryTable& geo) {
  auto& t = territory(id);
  auto it = std::lower_bound(t.members.begin(), t.members.end(), customer);
  if (it == t.members.end() || *it != customer) {
    throw std::invalid_argument("customer " + std::to_string(customer) +
                                " not in territory " + std::to_string(id));
  }
  t.members.erase(it);
  owner_[customer] = -1;
  t.shape = t.members.empty() ? ShapeAggregate{}
                              : t.shape.without_unit(geo.unit(customer),
                                                     shared_with(id, customer, geo));
}

double Plan::shared_with(int id, int customer, const GeometryTable& geo) const {
  double shared = 0.0;
  for (const auto& nb : geo.neighbors(customer)) {
    if (nb.unit < static_cast<int>(owner_.size()) && owner_[nb.unit] == id) {
      shared += nb.shared_length;
    }
  }
  return shared;
}

std::vector<int> Plan::adjacent_territories(int customer,
                                            const GeometryTable& geo) const {
  std::vector<int> ids;
  for (const auto& nb : geo.neighbors(customer)) {
    if (nb.unit > 0 && nb.unit < static_cast<int>(owner_.size()) && owner_[nb.unit] >= 0) {
      ids.push_back(owner_[nb.unit]);
    }
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

Plan singleton_plan(const Instance& inst) {
  Plan plan(inst);
  for (int i = 1; i <= inst.customer_count(); ++i) {
    WorkTerritory t;
    t.id = i;
    t.members = {i};
    t.routes.assign(static_cast<std::size_t>(inst.day_count), {});
    for (int d = 0; d < inst.day_count; ++d) {
      if (inst.active(i, d)) t.routes[d] = {i};
    }
    t.shape = ShapeAggregate{}.with_unit(inst.geometry.unit(i), 0.0);
    plan.add_territory(std::move(t));
  }
  return plan;
}

PenaltyBreakdown territory_penalty(const WorkTerritory& t, const Instance& inst,
                                   const PenaltyWeights& weights) {
  PenaltyBreakdown total;
  for (int d = 0; d < static_cast<int>(t.routes.size()); ++d) {
    if (t.routes[d].empty()) continue;
    const auto p = route_penalty(evaluate_route(t.routes[d], d, inst), inst.capacity, weights);
    total.capacity += p.capacity;
    total.time_window += p.time_window;
    total.overtime += p.overtime;
    total.combined += p.combined;
  }
  return total;
}

PenaltyBreakdown penalty(const Plan& plan, const Instance& inst,
                         const PenaltyWeights& weights) {
  PenaltyBreakdown total;
  for (const auto& t : plan.territories()) {
    const auto p = territory_penalty(t, inst, weights);
    total.capacity += p.capacity;
    total.time_window += p.time_window;
    total.overtime += p.overtime;
    total.combined += p.combined;
  }
  return total;
}

Solution to_solution(const Plan& plan, const Instance& inst) {
  Solution solution;
  for (const auto& wt : plan.territories()) {
    Territory t;
    t.id = wt.id;
    t.members = wt.members;
    for (int d = 0; d < static_cast<int>(wt.routes.size()); ++d) {
      if (!wt.routes[d].empty()) {
        t.routes.push_back(schedule_relaxed(wt.routes[d], d, inst));
      }
    }
    solution.territories.push_back(std::move(t));
  }
  refresh_shapes(solution, inst);
  return solution;
}

Plan plan_from_solution(const Solution& solution, const Instance& inst) {
  Plan plan(inst);
  for (const auto& t : solution.territories) {
    if (t.members.empty()) continue;
    WorkTerritory wt;
    wt.id = t.id;
    wt.members = t.members;
    std::sort(wt.members.begin(), wt.members.end());
    wt.routes.assign(static_cast<std::size_t>(inst.day_count), {});
    for (const auto& r : t.routes) wt.routes[r.day] = r.visits;
    wt.shape = shape_of(wt.members, inst.geometry);
    plan.add_territory(std::move(wt));
  }
  return plan;
}

// --- insertion -------------------------------------------------------------

namespace {

InsertionCandidate least_penalised(int customer, const std::vector<int>& route,
                                   int day, const Instance& inst,
                                   const PenaltyWeights& weights) {
  const double old_completion = evaluate_route(route, day, inst).completion;
  InsertionCandidate best;
  best.day = day;
  double best_pen = std::numeric_limits<double>::infinity();
  double best_completion = std::numeric_limits<double>::infinity();
  std::vector<int> trial(route.size() + 1);
  for (std::size_t p = 0; p <= route.size(); ++p) {
    std::copy(route.begin(), route.begin() + static_cast<std::ptrdiff_t>(p), trial.begin());
    trial[p] = customer;
    std::copy(route.begin() + static_cast<std::ptrdiff_t>(p), route.end(),
              trial.begin() + static_cast<std::ptrdiff_t>(p) + 1);
    const auto stats = evaluate_route(trial, day, inst);
    const auto pen = route_penalty(stats, inst.capacity, weights);
    if (pen.combined < best_pen - improve_eps ||
        (pen.combined <= best_pen + improve_eps && stats.completion < best_completion - improve_eps)) {
      best_pen = pen.combined;
      best_completion = stats.completion;
      best.position = static_cast<int>(p);
      best.delta_cost = stats.completion - old_completion;
      best.feasible = pen.feasible();
      best.capacity_excess = pen.capacity;
      best.lateness = pen.time_window;
    }
  }
  return best;
}

InsertionCandidate best_feasible_for_day(int u, const std::vector<int>& route,
                                         int day, const Instance& inst) {
  InsertionCandidate best;
  best.day = day;
  const std::size_t m = route.size();

  double load = inst.q(u, day);
  for (int v : route) load += inst.q(v, day);
  if (load > inst.capacity + load_tol) {
    return best;
  }

  std::vector<double> start(m), latest(m);
  double clock = inst.windows[0].open;
  int prev = 0;
  for (std::size_t k = 0; k < m; ++k) {
    const int v = route[k];
    start[k] = std::max(inst.windows[v].open, clock + inst.t(prev, v));
    clock = start[k] + inst.service[v];
    prev = v;
  }
  const double old_completion = m == 0 ? inst.windows[0].open : clock + inst.t(prev, 0);
  // Latest start at each visit that keeps the suffix feasible.
  for (std::size_t k = m; k-- > 0;) {
    const int v = route[k];
    const double next_latest = k + 1 == m
                                   ? inst.workday - inst.t(v, 0)
                                   : latest[k + 1] - inst.t(v, route[k + 1]);
    latest[k] = std::min(inst.windows[v].close, next_latest - inst.service[v]);
    if (start[k] > latest[k] + time_tol) {
      return best;  // the route itself is infeasible
    }
  }

  const auto& wu = inst.windows[u];
  for (std::size_t p = 0; p <= m; ++p) {
    const int before = p == 0 ? 0 : route[p - 1];
    const double departure =
        p == 0 ? inst.windows[0].open : start[p - 1] + inst.service[before];
    const double su = std::max(wu.open, departure + inst.t(before, u));
    if (su > wu.close + time_tol) {
      continue;
    }
    double completion = 0.0;
    if (p == m) {
      completion = su + inst.service[u] + inst.t(u, 0);
      if (completion > inst.workday + time_tol) continue;
    } else {
      const int after = route[p];
      double s_next = std::max(inst.windows[after].open, su + inst.service[u] + inst.t(u, after));
      if (s_next > latest[p] + time_tol) continue;
      // Propagate the push-forward until it vanishes.
      std::size_t k = p;
      double c = s_next + inst.service[after];
      bool merged = s_next == start[p];
      while (!merged && k + 1 < m) {
        ++k;
        const double s = std::max(inst.windows[route[k]].open, c + inst.t(route[k - 1], route[k]));
        merged = s == start[k];
        c = s + inst.service[route[k]];
      }
      completion = merged ? old_completion : c + inst.t(route[m - 1], 0);
    }
    const double delta = completion - old_completion;
    if (!best.feasible || delta < best.delta_cost - improve_eps) {
      best.feasible = true;
      best.position = static_cast<int>(p);
      best.delta_cost = delta;
    }
  }
  return best;
}

}  // namespace

InsertionPlan best_insertion(int customer, const WorkTerritory& territory,
                             const Instance& inst) {
  if (std::binary_search(territory.members.begin(), territory.members.end(), customer)) {
    throw std::invalid_argument("customer " + std::to_string(customer) +
                                " already belongs to territory " + std::to_string(territory.id));
  }
  InsertionPlan plan;
  plan.feasible = true;
  static const std::vector<int> empty;
  for (int d = 0; d < inst.day_count; ++d) {
    if (!inst.active(customer, d)) continue;
    const auto& route = d < static_cast<int>(territory.routes.size()) ? territory.routes[d] : empty;
    auto cand = best_feasible_for_day(customer, route, d, inst);
    if (!cand.feasible) {
      cand = least_penalised(customer, route, d, inst, PenaltyWeights{});
      plan.feasible = plan.feasible && cand.feasible;
    }
    plan.total_delta += cand.delta_cost;
    plan.per_day.push_back(cand);
  }
  return plan;
}

InsertionPlan penalized_insertion(int customer, const WorkTerritory& territory,
                                  const Instance& inst,
                                  const PenaltyWeights& weights) {
  InsertionPlan plan;
  plan.feasible = true;
  static const std::vector<int> empty;
  for (int d = 0; d < inst.day_count; ++d) {
    if (!inst.active(customer, d)) continue;
    const auto& route = d < static_cast<int>(territory.routes.size()) ? territory.routes[d] : empty;
    auto cand = least_penalised(customer, route, d, inst, weights);
    plan.feasible = plan.feasible && cand.feasible;
    plan.total_delta += cand.delta_cost;
    plan.per_day.push_back(cand);
  }
  return plan;
}

void apply_insertion(WorkTerritory& territory, int customer,
                     const InsertionPlan& plan) {
  for (const auto& c : plan.per_day) {
    if (territory.routes.size() <= static_cast<std::size_t>(c.day)) {
      territory.routes.resize(static_cast<std::size_t>(c.day) + 1);
    }
    auto& route = territory.routes[c.day];
    route.insert(route.begin() + c.position, customer);
  }
}

void remove_from_routes(WorkTerritory& territory, int customer,
                        const Instance& inst) {
  for (int d = 0; d < static_cast<int>(territory.routes.size()); ++d) {
    if (!inst.active(customer, d)) continue;
    auto& route = territory.routes[d];
    route.erase(std::remove(route.begin(), route.end(), customer), route.end());
  }
}

// --- 2-opt -----------------------------------------------------------------

std::vector<int> two_opt(const std::vector<int>& visits, int day,
                         const Instance& inst, RouteObjective objective,
                         const PenaltyWeights& weights) {
  std::vector<int> best = visits;
  if (best.size() < 2) {
    return best;
  }
  auto score = [&](const std::vector<int>& r) {
    const auto stats = evaluate_route(r, day, inst);
    return std::pair{route_penalty(stats, inst.capacity, weights).combined, stats.travel};
  };
  auto [best_pen, best_travel] = score(best);
  const bool start_feasible = best_pen <= improve_eps;

  auto better = [&](double pen, double travel) {
    if (objective == RouteObjective::travel_time) {
      if (pen > improve_eps) return false;
      return !start_feasible || travel < best_travel - improve_eps;
    }
    return pen < best_pen - improve_eps ||
           (pen <= best_pen + improve_eps && travel < best_travel - improve_eps);
  };

  const std::size_t m = best.size();
  bool improved = true;
  int guard = 0;
  std::vector<int> trial;
  while (improved && guard++ < 10000) {
    improved = false;
    for (std::size_t i = 0; i + 1 < m && !improved; ++i) {
      for (std::size_t j = i + 1; j < m && !improved; ++j) {
        trial = best;
        std::reverse(trial.begin() + static_cast<std::ptrdiff_t>(i),
                     trial.begin() + static_cast<std::ptrdiff_t>(j) + 1);
        const auto [pen, travel] = score(trial);
        if (better(pen, travel)) {
          best.swap(trial);
          best_pen = pen;
          best_travel = travel;
          improved = true;
        }
      }
    }
  }
  return best;
}

// --- relocation ------------------------------------------------------------

int relocate(Plan& plan, const Instance& inst, const RelocateOptions& options) {
  const auto& geo = inst.geometry;
  const double bound = inst.compactness_bound + 1e-9;
  int moves = 0;
  bool improved = true;
  while (improved && moves < options.max_moves) {
    improved = false;
    std::vector<int> sources = options.sources;
    if (sources.empty()) {
      for (const auto& t : plan.territories()) sources.push_back(t.id);
    }
    for (int src_id : sources) {
      if (!plan.has(src_id)) continue;
      const std::vector<int> candidates = plan.territory(src_id).members;
      for (int c : candidates) {
        if (moves >= options.max_moves) break;
        const auto& src = plan.territory(src_id);
        if (src.members.size() <= 1 || plan.owner(c) != src_id) continue;
        const double src_shared = plan.shared_with(src_id, c, geo);
        const ShapeAggregate src_shape = src.shape.without_unit(geo.unit(c), src_shared);
        if (src_shape.ratio(inst.mode) > bound) continue;

        WorkTerritory src_after = src;
        remove_from_routes(src_after, c, inst);
        std::optional<bool> src_contiguous;

        for (int tgt_id : plan.adjacent_territories(c, geo)) {
          if (tgt_id == src_id) continue;
          const auto& tgt = plan.territory(tgt_id);
          const ShapeAggregate tgt_shape =
              tgt.shape.with_unit(geo.unit(c), plan.shared_with(tgt_id, c, geo));
          if (tgt_shape.ratio(inst.mode) > bound) continue;

          InsertionPlan ins;
          if (options.objective == RelocateObjective::compactness) {
            const double before = src.shape.ratio(inst.mode) + tgt.shape.ratio(inst.mode);
            const double after = src_shape.ratio(inst.mode) + tgt_shape.ratio(inst.mode);
            if (after >= before - improve_eps) continue;
            if (!src_contiguous) src_contiguous = contiguous_without(src, c, geo);
            if (!*src_contiguous) break;
            if (territory_penalty(src_after, inst).combined > improve_eps) break;
            ins = best_insertion(c, tgt, inst);
            if (!ins.feasible) continue;
            if (options.forbid_travel_increase) {
              WorkTerritory tgt_after = tgt;
              apply_insertion(tgt_after, c, ins);
              double delta = 0.0;
              for (int d = 0; d < inst.day_count; ++d) {
                if (!inst.active(c, d)) continue;
                delta += route_travel(src_after.routes[d], inst) - route_travel(src.routes[d], inst);
                delta += route_travel(tgt_after.routes[d], inst) - route_travel(tgt.routes[d], inst);
              }
              if (delta > improve_eps) continue;
            }
          } else {
            ins = penalized_insertion(c, tgt, inst, options.weights);
            WorkTerritory tgt_after = tgt;
            apply_insertion(tgt_after, c, ins);
            const double before = territory_penalty(src, inst, options.weights).combined +
                                  territory_penalty(tgt, inst, options.weights).combined;
            const double after = territory_penalty(src_after, inst, options.weights).combined +
                                 territory_penalty(tgt_after, inst, options.weights).combined;
            if (after >= before - improve_eps) continue;
            if (!src_contiguous) src_contiguous = contiguous_without(src, c, geo);
            if (!*src_contiguous) break;
          }

          // Accept.
          WorkTerritory moved_src = std::move(src_after);
          plan.remove_member(src_id, c, geo);
          plan.territory(src_id).routes = std::move(moved_src.routes);
          apply_insertion(plan.territory(tgt_id), c, ins);
          plan.add_member(tgt_id, c, geo);
          ++moves;
          improved = true;
          break;
        }
      }
    }
  }
  return moves;
}

}  // namespace tddmp
