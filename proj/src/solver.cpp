#include "tddmp/solver.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <sstream>

namespace tddmp {

namespace {

constexpr double eps = 1e-9;

double ratio_bound(const Instance& inst) { return inst.compactness_bound + eps; }

bool audit_pool(const Plan& plan, const EjectionPool& pool, const Instance& inst) {
  std::vector<int> seen(static_cast<std::size_t>(inst.node_count()), 0);
  for (const auto& t : plan.territories()) {
    for (int i : t.members) {
      if (plan.owner(i) != t.id) return false;
      ++seen[i];
    }
  }
  for (int i : pool.units()) {
    if (plan.owner(i) != -1) return false;
    ++seen[i];
  }
  for (int i = 1; i <= inst.customer_count(); ++i) {
    if (seen[i] != 1) return false;
  }
  return seen[0] == 0;
}

std::vector<int> penalised_territories(const Plan& plan, const Instance& inst,
                                       const std::vector<int>& ids) {
  std::vector<int> out;
  for (int id : ids) {
    if (plan.has(id) && territory_penalty(plan.territory(id), inst).combined > eps) {
      out.push_back(id);
    }
  }
  return out;
}

std::vector<int> all_ids(const Plan& plan) {
  std::vector<int> ids;
  for (const auto& t : plan.territories()) ids.push_back(t.id);
  return ids;
}

}  // namespace

// --- parameters ------------------------------------------------------------

void SolverParams::check() const {
  if (eta < 1) throw std::invalid_argument("eta must be at least 1");
  if (p_max < 1) throw std::invalid_argument("p_max must be at least 1");
  if (k_max < 0) throw std::invalid_argument("k_max must be non-negative");
  if (!(ct_max_seconds > 0.0)) throw std::invalid_argument("ct_max must be positive");
  if (merge_attempt_factor < 1) throw std::invalid_argument("merge_attempt_factor must be positive");
  if (stage2_alternations < 0) throw std::invalid_argument("stage2_alternations must be non-negative");
  if (compactness_bound && !(*compactness_bound > 0.0)) {
    throw std::invalid_argument("F must be positive");
  }
  if (max_eliminations && *max_eliminations < 0) {
    throw std::invalid_argument("max_eliminations must be non-negative");
  }
}

SolverParams params_from_json(const nlohmann::json& doc) {
  SolverParams p;
  p.eta = doc.value("eta", p.eta);
  p.p_max = doc.value("p_max", p.p_max);
  p.k_max = doc.value("k_max", p.k_max);
  p.ct_max_seconds = doc.value("ct_max_seconds", p.ct_max_seconds);
  p.rng_seed = doc.value("seed", p.rng_seed);
  if (doc.contains("F")) p.compactness_bound = doc.at("F").get<double>();
  if (doc.contains("compactness_mode")) {
    p.mode = compactness_mode_from_string(doc.at("compactness_mode").get<std::string>());
  }
  p.merge_attempt_factor = doc.value("merge_attempt_factor", p.merge_attempt_factor);
  p.stage2_alternations = doc.value("stage2_alternations", p.stage2_alternations);
  if (doc.contains("max_eliminations")) p.max_eliminations = doc.at("max_eliminations").get<long>();
  p.reoptimize = doc.value("reoptimize", p.reoptimize);
  p.audit = doc.value("audit", p.audit);
  p.check();
  return p;
}

nlohmann::json to_json(const SolverParams& p) {
  nlohmann::json doc{{"eta", p.eta},
                     {"p_max", p.p_max},
                     {"k_max", p.k_max},
                     {"ct_max_seconds", p.ct_max_seconds},
                     {"seed", p.rng_seed},
                     {"merge_attempt_factor", p.merge_attempt_factor},
                     {"stage2_alternations", p.stage2_alternations},
                     {"reoptimize", p.reoptimize},
                     {"audit", p.audit}};
  if (p.compactness_bound) doc["F"] = *p.compactness_bound;
  if (p.mode) doc["compactness_mode"] = to_string(*p.mode);
  if (p.max_eliminations) doc["max_eliminations"] = *p.max_eliminations;
  return doc;
}

// --- initial solution ------------------------------------------------------

Plan initial_plan(const Instance& inst) {
  std::vector<int> bad;
  std::ostringstream why;
  for (int i = 1; i <= inst.customer_count(); ++i) {
    std::string reason;
    for (int d = 0; d < inst.day_count && reason.empty(); ++d) {
      if (!inst.active(i, d)) continue;
      const auto out = propagate_schedule({i}, d, inst);
      if (!out.feasible()) reason = out.reason + " on day " + std::to_string(d);
    }
    if (reason.empty()) {
      const int unit[] = {i};
      if (compactness_ratio(unit, inst.geometry, inst.mode) > ratio_bound(inst)) {
        reason = "own cell exceeds the compactness bound";
      }
    }
    if (!reason.empty()) {
      bad.push_back(i);
      why << (bad.size() > 1 ? "; " : "") << "customer " << i << ": " << reason;
    }
  }
  if (!bad.empty()) {
    throw IntrinsicInfeasibility(bad, "intrinsically infeasible customers: " + why.str());
  }
  return singleton_plan(inst);
}

Solution initial_solution(const Instance& inst) { return to_solution(initial_plan(inst), inst); }

// --- ejection pool ---------------------------------------------------------

EjectionPool::EjectionPool(const Instance& inst, std::vector<int> units)
    : units_(std::move(units)), penalty_(static_cast<std::size_t>(inst.node_count()), 1) {
  std::sort(units_.begin(), units_.end());
  units_.erase(std::unique(units_.begin(), units_.end()), units_.end());
}

bool EjectionPool::contains(int unit) const {
  return std::binary_search(units_.begin(), units_.end(), unit);
}

void EjectionPool::add(int unit) {
  auto it = std::lower_bound(units_.begin(), units_.end(), unit);
  if (it != units_.end() && *it == unit) {
    throw std::invalid_argument("unit " + std::to_string(unit) + " already pooled");
  }
  units_.insert(it, unit);
}

void EjectionPool::remove(int unit) {
  auto it = std::lower_bound(units_.begin(), units_.end(), unit);
  if (it == units_.end() || *it != unit) {
    throw std::invalid_argument("unit " + std::to_string(unit) + " not pooled");
  }
  units_.erase(it);
}

int EjectionPool::penalty_sum(const std::vector<int>& units) const {
  int total = 0;
  for (int u : units) total += penalty_[u];
  return total;
}

int EjectionPool::max_penalty() const {
  int best = 0;
  for (int u : units_) best = std::max(best, penalty_[u]);
  return best;
}

// --- stage 1 ---------------------------------------------------------------

std::optional<int> stage1_feasible_merge(int unit, Plan& plan, const Instance& inst) {
  const auto& geo = inst.geometry;
  const double bound = ratio_bound(inst);
  int best_id = -1;
  InsertionPlan best_plan;
  for (int id : plan.adjacent_territories(unit, geo)) {
    const auto& t = plan.territory(id);
    const auto shape = t.shape.with_unit(geo.unit(unit), plan.shared_with(id, unit, geo));
    if (shape.ratio(inst.mode) > bound) continue;
    auto ins = best_insertion(unit, t, inst);
    if (!ins.feasible) continue;
    if (best_id < 0 || ins.total_delta < best_plan.total_delta - eps) {
      best_id = id;
      best_plan = std::move(ins);
    }
  }
  if (best_id < 0) return std::nullopt;
  apply_insertion(plan.territory(best_id), unit, best_plan);
  plan.add_member(best_id, unit, geo);
  return best_id;
}

// --- stage 2 ---------------------------------------------------------------

std::optional<int> stage2_penalized_merge(int unit, Plan& plan, const Instance& inst,
                                          const SolverParams& params) {
  const auto& geo = inst.geometry;
  const double bound = ratio_bound(inst);
  int best_id = -1;
  double best_pen = std::numeric_limits<double>::infinity();
  double best_delta = std::numeric_limits<double>::infinity();
  InsertionPlan best_plan;
  for (int id : plan.adjacent_territories(unit, geo)) {
    const auto& t = plan.territory(id);
    const auto shape = t.shape.with_unit(geo.unit(unit), plan.shared_with(id, unit, geo));
    if (shape.ratio(inst.mode) > bound) continue;
    auto ins = penalized_insertion(unit, t, inst);
    WorkTerritory trial = t;
    apply_insertion(trial, unit, ins);
    const double pen = territory_penalty(trial, inst).combined;
    if (pen < best_pen - eps || (pen <= best_pen + eps && ins.total_delta < best_delta - eps)) {
      best_id = id;
      best_pen = pen;
      best_delta = ins.total_delta;
      best_plan = std::move(ins);
    }
  }
  if (best_id < 0) return std::nullopt;

  Plan work = plan;
  apply_insertion(work.territory(best_id), unit, best_plan);
  work.add_member(best_id, unit, geo);

  double current = penalty(work, inst).combined;
  for (int round = 0; round < params.stage2_alternations && current > eps; ++round) {
    const auto dirty = penalised_territories(work, inst, all_ids(work));
    for (int id : dirty) {
      auto& t = work.territory(id);
      for (int d = 0; d < static_cast<int>(t.routes.size()); ++d) {
        if (t.routes[d].size() > 1) {
          t.routes[d] = two_opt(t.routes[d], d, inst, RouteObjective::penalty);
        }
      }
    }
    double after = penalty(work, inst).combined;
    if (after > eps) {
      RelocateOptions opts;
      opts.objective = RelocateObjective::penalty;
      opts.sources = penalised_territories(work, inst, all_ids(work));
      relocate(work, inst, opts);
      after = penalty(work, inst).combined;
    }
    if (after >= current - eps) {
      current = after;
      break;
    }
    current = after;
  }
  if (current > eps) return std::nullopt;
  plan = std::move(work);
  return best_id;
}

// --- stage 3 ---------------------------------------------------------------

namespace {

// Members of the merged territory that may anchor an ejected component:
// the merged unit itself and units touching the pool.
std::vector<int> pool_touching(const std::vector<int>& merged, const EjectionPool& pool,
                               const GeometryTable& geo) {
  std::vector<int> out;
  for (int u : merged) {
    bool touch = pool.contains(u);
    for (const auto& nb : geo.neighbors(u)) {
      if (touch) break;
      touch = pool.contains(nb.unit);
    }
    if (touch) out.push_back(u);
  }
  return out;
}

bool components_anchored(const std::vector<int>& set, const std::vector<char>& anchor,
                         const GeometryTable& geo) {
  // Each connected component of `set` needs one anchor.
  std::vector<char> done(set.size(), 0);
  for (std::size_t s = 0; s < set.size(); ++s) {
    if (done[s]) continue;
    bool anchored = false;
    std::vector<std::size_t> stack{s};
    done[s] = 1;
    while (!stack.empty()) {
      const std::size_t k = stack.back();
      stack.pop_back();
      anchored = anchored || anchor[set[k]];
      for (std::size_t o = 0; o < set.size(); ++o) {
        if (!done[o] && geo.adjacent(set[k], set[o])) {
          done[o] = 1;
          stack.push_back(o);
        }
      }
    }
    if (!anchored) return false;
  }
  return true;
}

}  // namespace

std::optional<EjectionChoice> best_ejection(int unit, int territory, const Plan& plan,
                                            const EjectionPool& pool, int k_max,
                                            const Instance& inst) {
  const auto& geo = inst.geometry;
  const auto& base = plan.territory(territory);
  std::vector<int> merged = base.members;
  merged.insert(std::lower_bound(merged.begin(), merged.end(), unit), unit);

  std::vector<char> anchor(static_cast<std::size_t>(inst.node_count()), 0);
  for (int u : pool_touching(merged, pool, geo)) anchor[u] = 1;

  // Candidates lie within k_max - 1 hops of an anchor inside the territory.
  std::vector<int> hops(static_cast<std::size_t>(inst.node_count()), -1);
  std::vector<char> in_merged(static_cast<std::size_t>(inst.node_count()), 0);
  for (int u : merged) in_merged[u] = 1;
  std::deque<int> frontier;
  for (int u : merged) {
    if (anchor[u]) {
      hops[u] = 0;
      frontier.push_back(u);
    }
  }
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop_front();
    if (hops[u] + 1 >= k_max) continue;
    for (const auto& nb : geo.neighbors(u)) {
      if (in_merged[nb.unit] && hops[nb.unit] < 0) {
        hops[nb.unit] = hops[u] + 1;
        frontier.push_back(nb.unit);
      }
    }
  }
  std::vector<int> cand;
  for (int u : merged) {
    if (hops[u] >= 0 && k_max > 0) cand.push_back(u);
  }

  // Enumerate anchored subsets of size <= k_max, bucketed by penalty sum.
  std::map<int, std::vector<std::vector<int>>> buckets;
  buckets[0].push_back({});
  std::vector<int> chosen;
  auto rec = [&](auto&& self, std::size_t from) -> void {
    for (std::size_t k = from; k < cand.size(); ++k) {
      chosen.push_back(cand[k]);
      if (components_anchored(chosen, anchor, geo)) {
        buckets[pool.penalty_sum(chosen)].push_back(chosen);
      }
      if (static_cast<int>(chosen.size()) < k_max) self(self, k + 1);
      chosen.pop_back();
    }
  };
  rec(rec, 0);

  for (auto& [psum, sets] : buckets) {
    std::optional<EjectionChoice> best;
    for (const auto& e : sets) {
      std::vector<int> residual;
      std::set_difference(merged.begin(), merged.end(), e.begin(), e.end(),
                          std::back_inserter(residual));
      if (residual.empty() || !is_contiguous(residual, geo)) continue;
      const auto shape = shape_of(residual, geo);
      const double ratio = shape.ratio(inst.mode);
      if (ratio > ratio_bound(inst)) continue;
      if (best && ratio > best->ratio + eps) continue;

      WorkTerritory res;
      res.id = territory;
      res.routes = base.routes;
      const bool keeps_unit = !std::binary_search(e.begin(), e.end(), unit);
      for (int x : e) {
        if (x != unit) remove_from_routes(res, x, inst);
      }
      res.members = residual;
      if (keeps_unit) {
        res.members.erase(std::find(res.members.begin(), res.members.end(), unit));
      }
      if (territory_penalty(res, inst).combined > eps) continue;
      if (keeps_unit) {
        const auto ins = best_insertion(unit, res, inst);
        if (!ins.feasible) continue;
        apply_insertion(res, unit, ins);
        res.members = residual;
      }
      res.shape = shape;
      if (!best || ratio < best->ratio - eps) {
        best = EjectionChoice{e, psum, ratio, std::move(res)};
      }
    }
    if (best) return best;
  }
  return std::nullopt;
}

EjectionOutcome stage3_eject_merge(int unit, Plan& plan, EjectionPool& pool,
                                   const SolverParams& params, const Instance& inst,
                                   std::mt19937_64& rng) {
  EjectionOutcome out;
  auto ids = plan.adjacent_territories(unit, inst.geometry);
  if (ids.empty()) ids = all_ids(plan);
  if (ids.empty()) return out;
  std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
  const int id = ids[pick(rng)];
  out.territory = id;

  auto choice = best_ejection(unit, id, plan, pool, params.k_max, inst);
  if (!choice) return out;

  // Replace the territory by its residual and move the ejected units.
  plan.remove_territory(id);
  pool.remove(unit);
  plan.add_territory(std::move(choice->residual));
  for (int x : choice->ejected) pool.add(x);
  out.merged = !std::binary_search(choice->ejected.begin(), choice->ejected.end(), unit);
  out.ejected = std::move(choice->ejected);
  return out;
}

// --- merge heuristic -------------------------------------------------------

std::string to_string(MergeFailure failure) {
  switch (failure) {
    case MergeFailure::none: return "none";
    case MergeFailure::no_selectable_unit: return "no_selectable_unit";
    case MergeFailure::penalty_ceiling: return "penalty_ceiling";
    case MergeFailure::attempt_cap: return "attempt_cap";
    case MergeFailure::timeout: return "timeout";
  }
  return "unknown";
}

MergeResult merge_heuristic(Plan partial, EjectionPool pool, const SolverParams& params,
                            const Instance& inst, std::mt19937_64& rng,
                            std::optional<Clock::time_point> deadline,
                            MergeCounters* counters) {
  MergeCounters local;
  MergeCounters& c = counters ? *counters : local;
  pool = EjectionPool(inst, pool.units());  // counters start at 1
  const long cap = static_cast<long>(params.merge_attempt_factor) *
                   static_cast<long>(std::max<std::size_t>(pool.size(), 1));
  long attempts = 0;
  MergeResult result;

  while (!pool.empty()) {
    if (deadline && Clock::now() >= *deadline) {
      result.failure = MergeFailure::timeout;
      return result;
    }
    if (pool.max_penalty() > params.p_max) {
      result.failure = MergeFailure::penalty_ceiling;
      return result;
    }
    int v_in = -1;
    for (int u : pool.units()) {
      if (partial.adjacent_territories(u, inst.geometry).empty()) continue;
      if (v_in < 0 || pool.penalty(u) < pool.penalty(v_in)) v_in = u;
    }
    if (v_in < 0) {
      result.failure = MergeFailure::no_selectable_unit;
      return result;
    }

    if (stage1_feasible_merge(v_in, partial, inst)) {
      pool.remove(v_in);
      ++c.stage1;
    } else if (stage2_penalized_merge(v_in, partial, inst, params)) {
      pool.remove(v_in);
      ++c.stage2;
    } else {
      pool.bump(v_in);
      if (pool.penalty(v_in) > params.p_max) {
        result.failure = MergeFailure::penalty_ceiling;
        return result;
      }
      if (++attempts > cap) {
        result.failure = MergeFailure::attempt_cap;
        return result;
      }
      const auto out = stage3_eject_merge(v_in, partial, pool, params, inst, rng);
      ++c.stage3;
      if (!out.merged) ++c.stage3_undone;
    }
    if (params.audit && !audit_pool(partial, pool, inst)) ++c.audit_failures;
  }
  result.plan = std::move(partial);
  return result;
}

// --- elimination -----------------------------------------------------------

std::vector<int> elimination_order(const Plan& plan, const Instance& inst) {
  std::vector<std::pair<int, int>> keyed;
  for (const auto& t : plan.territories()) {
    int days = 0;
    for (int i : t.members) days += inst.active_days(i);
    keyed.emplace_back(days, t.id);
  }
  std::sort(keyed.begin(), keyed.end());
  std::vector<int> order;
  for (const auto& [days, id] : keyed) order.push_back(id);
  return order;
}

Plan reoptimize(Plan plan, const Instance& inst) {
  for (int round = 0; round < 100; ++round) {
    RelocateOptions opts;
    opts.objective = RelocateObjective::compactness;
    opts.forbid_travel_increase = true;
    bool improved = relocate(plan, inst, opts) > 0;
    for (const auto& t : plan.territories()) {
      auto& wt = plan.territory(t.id);
      for (int d = 0; d < static_cast<int>(wt.routes.size()); ++d) {
        if (wt.routes[d].size() < 2) continue;
        auto better = two_opt(wt.routes[d], d, inst, RouteObjective::travel_time);
        if (better != wt.routes[d]) {
          wt.routes[d] = std::move(better);
          improved = true;
        }
      }
    }
    if (!improved) break;
  }
  return plan;
}

namespace {

struct StackEntry {
  Plan plan;
  std::vector<int> order;
  std::size_t cursor{0};
};

}  // namespace

SolveResult eliminate_territories(const Plan& start, const SolverParams& params,
                                  const Instance& inst) {
  params.check();
  const auto began = Clock::now();
  const auto deadline = began + std::chrono::duration_cast<Clock::duration>(
                                    std::chrono::duration<double>(params.ct_max_seconds));
  std::mt19937_64 rng(params.rng_seed);
  SolveResult result;
  auto& stats = result.stats;
  auto& trace = result.trace;

  Plan incumbent = start;
  stats.initial_territories = static_cast<int>(start.size());
  stats.incumbent_history.push_back(static_cast<int>(start.size()));
  trace.push_back({{"event", "start"}, {"territories", start.size()}});

  std::deque<StackEntry> stack;
  stack.push_back({start, elimination_order(start, inst), 0});
  stats.max_stack = 1;
  std::optional<StackEntry> detached;

  while (true) {
    if (Clock::now() >= deadline) {
      stats.timed_out = true;
      trace.push_back({{"event", "timeout"}});
      break;
    }
    if (params.max_eliminations && stats.eliminations >= *params.max_eliminations) {
      trace.push_back({{"event", "budget"}});
      break;
    }
    StackEntry& entry = detached ? *detached : stack.back();
    if (entry.cursor >= entry.order.size()) {
      if (detached) {
        detached.reset();
      } else {
        stack.pop_back();
      }
      if (stack.empty()) {
        trace.push_back({{"event", "stack_empty"}});
        break;
      }
      const int back = static_cast<int>(stack.back().plan.size());
      const int distance = back - static_cast<int>(incumbent.size());
      stats.max_rollback = std::max(stats.max_rollback, distance);
      trace.push_back({{"event", "rollback"}, {"territories", back}});
      continue;
    }

    const int id = entry.order[entry.cursor++];
    Plan partial = entry.plan;
    const WorkTerritory removed = partial.remove_territory(id);
    EjectionPool pool(inst, removed.members);
    ++stats.eliminations;
    const auto before = stats.merges;
    auto merged = merge_heuristic(std::move(partial), std::move(pool), params, inst, rng,
                                  deadline, &stats.merges);
    nlohmann::json event{{"event", "eliminate"},
                         {"territory", id},
                         {"from", entry.plan.size()},
                         {"pool", removed.members.size()},
                         {"stage1", stats.merges.stage1 - before.stage1},
                         {"stage2", stats.merges.stage2 - before.stage2},
                         {"stage3", stats.merges.stage3 - before.stage3}};
    if (!merged.plan) {
      event["outcome"] = "failure";
      event["reason"] = to_string(merged.failure);
      trace.push_back(std::move(event));
      continue;
    }
    event["outcome"] = "success";
    trace.push_back(std::move(event));
    ++stats.successes;
    if (params.audit) {
      const auto report = validate(inst, to_solution(*merged.plan, inst));
      if (!report.ok()) ++stats.merges.audit_failures;
    }

    StackEntry next{std::move(*merged.plan), {}, 0};
    next.order = elimination_order(next.plan, inst);
    if (next.plan.size() < incumbent.size()) {
      incumbent = next.plan;
      stats.incumbent_history.push_back(static_cast<int>(incumbent.size()));
      trace.push_back({{"event", "incumbent"}, {"territories", incumbent.size()}});
      detached.reset();
      stack.push_back(std::move(next));
      if (static_cast<int>(stack.size()) > params.eta) stack.pop_front();
      stats.max_stack = std::max(stats.max_stack, static_cast<int>(stack.size()));
    } else {
      detached = std::move(next);
    }
  }

  stats.seconds = std::chrono::duration<double>(Clock::now() - began).count();
  Plan final_plan = std::move(incumbent);
  if (params.reoptimize) {
    const auto t0 = Clock::now();
    final_plan = reoptimize(std::move(final_plan), inst);
    stats.reoptimize_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    trace.push_back({{"event", "reoptimize"}});
  }
  stats.final_territories = static_cast<int>(final_plan.size());
  result.solution = to_solution(final_plan, inst);
  trace.push_back({{"event", "finish"}, {"territories", stats.final_territories}});
  return result;
}

SolveResult solve(const Instance& instance, const SolverParams& params) {
  params.check();
  if (!params.compactness_bound && !params.mode) {
    return eliminate_territories(initial_plan(instance), params, instance);
  }
  const Instance inst = with_overrides(instance, params);
  return eliminate_territories(initial_plan(inst), params, inst);
}

Instance with_overrides(const Instance& instance, const SolverParams& params) {
  Instance inst = instance;
  if (params.compactness_bound) inst.compactness_bound = *params.compactness_bound;
  if (params.mode) inst.mode = *params.mode;
  return inst;
}

}  // namespace tddmp
