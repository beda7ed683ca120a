#ifndef TDDMP_SOLVER_HPP
#define TDDMP_SOLVER_HPP

#include <chrono>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tddmp/model.hpp"
#include "tddmp/routing.hpp"

namespace tddmp {

struct SolverParams {
  int eta{5};                   // backtracking stack capacity
  int p_max{5};                 // penalty ceiling of the ejection pool
  int k_max{3};                 // ejections per stage-3 merge
  double ct_max_seconds{60.0};  // wall-clock budget of the elimination phase
  std::uint64_t rng_seed{1};
  std::optional<double> compactness_bound;  // overrides the instance's F
  std::optional<CompactnessMode> mode;      // overrides the instance's mode
  int merge_attempt_factor{50};  // stage-3 attempts per unit of the initial pool
  int stage2_alternations{50};
  // Deterministic work budget: stop after this many elimination attempts.
  std::optional<long> max_eliminations;
  bool reoptimize{true};
  // Check pool conservation and validate every pushed solution.
  bool audit{false};

  // Throws std::invalid_argument on out-of-range values.
  void check() const;
};

SolverParams params_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const SolverParams& params);

// Customers that cannot be served even by a territory of their own.
class IntrinsicInfeasibility : public std::runtime_error {
 public:
  IntrinsicInfeasibility(std::vector<int> customers, const std::string& what)
      : std::runtime_error(what), customers_(std::move(customers)) {}
  const std::vector<int>& customers() const { return customers_; }

 private:
  std::vector<int> customers_;
};

// One territory per customer. Throws IntrinsicInfeasibility listing every
// customer whose round trip misses its window or the workday, or whose own
// cell exceeds the compactness bound.
Plan initial_plan(const Instance& instance);
Solution initial_solution(const Instance& instance);

// Unassigned basic units with their penalty counters.
class EjectionPool {
 public:
  EjectionPool() = default;
  EjectionPool(const Instance& instance, std::vector<int> units);

  const std::vector<int>& units() const { return units_; }
  bool empty() const { return units_.empty(); }
  std::size_t size() const { return units_.size(); }
  bool contains(int unit) const;
  void add(int unit);
  void remove(int unit);

  int penalty(int unit) const { return penalty_[unit]; }
  void bump(int unit) { ++penalty_[unit]; }
  int penalty_sum(const std::vector<int>& units) const;
  int max_penalty() const;  // over pooled units; 0 when empty

 private:
  std::vector<int> units_;    // sorted
  std::vector<int> penalty_;  // indexed by node, starts at 1
};

// Feasible merge of `unit` into the adjacent territory with the smallest
// total insertion delta (ties: smaller id). Modifies `plan` only on success
// and returns the receiving territory.
std::optional<int> stage1_feasible_merge(int unit, Plan& plan,
                                         const Instance& instance);

// Least-F_p merge into an adjacent territory, repaired by alternating 2-opt
// and relocation. Modifies `plan` only if the repair reaches F_p = 0.
std::optional<int> stage2_penalized_merge(int unit, Plan& plan,
                                          const Instance& instance,
                                          const SolverParams& params);

struct EjectionChoice {
  std::vector<int> ejected;  // sorted, may contain the merged unit itself
  int penalty_sum{0};
  double ratio{0.0};  // compactness ratio of the residual territory
  WorkTerritory residual;
};

// Cheapest feasible ejection set after merging `unit` into `territory`:
// minimum penalty sum, then minimum residual ratio, then lexicographic.
// `pool` must still contain `unit`.
std::optional<EjectionChoice> best_ejection(int unit, int territory,
                                            const Plan& plan,
                                            const EjectionPool& pool,
                                            int k_max,
                                            const Instance& instance);

struct EjectionOutcome {
  bool merged{false};
  int territory{-1};
  std::vector<int> ejected;
};

// Merges `unit` into a uniformly drawn adjacent territory and ejects the
// best feasible set back into the pool. The caller bumps the unit's
// penalty first.
EjectionOutcome stage3_eject_merge(int unit, Plan& plan, EjectionPool& pool,
                                   const SolverParams& params,
                                   const Instance& instance,
                                   std::mt19937_64& rng);

using Clock = std::chrono::steady_clock;

struct MergeCounters {
  long stage1{0};
  long stage2{0};
  long stage3{0};
  long stage3_undone{0};
  long audit_failures{0};
};

enum class MergeFailure {
  none,
  no_selectable_unit,
  penalty_ceiling,
  attempt_cap,
  timeout,
};

std::string to_string(MergeFailure failure);

struct MergeResult {
  std::optional<Plan> plan;
  MergeFailure failure{MergeFailure::none};
};

// Reinserts every pooled unit. Penalty counters start at 1 for each call.
MergeResult merge_heuristic(Plan partial, EjectionPool pool,
                            const SolverParams& params,
                            const Instance& instance, std::mt19937_64& rng,
                            std::optional<Clock::time_point> deadline = {},
                            MergeCounters* counters = nullptr);

// Territory ids by ascending active customer-days (ties: smaller id).
std::vector<int> elimination_order(const Plan& plan, const Instance& instance);

// Relocation for compactness (never increasing travel) and 2-opt for travel
// time, alternated until neither improves.
Plan reoptimize(Plan plan, const Instance& instance);

struct SolverStats {
  int initial_territories{0};
  int final_territories{0};
  long eliminations{0};
  long successes{0};
  MergeCounters merges;
  std::vector<int> incumbent_history;
  int max_rollback{0};  // territories above the incumbent on rollback
  int max_stack{0};
  bool timed_out{false};
  double seconds{0.0};
  double reoptimize_seconds{0.0};
};

struct SolveResult {
  Solution solution;
  SolverStats stats;
  std::vector<nlohmann::json> trace;  // one event per line of the JSONL trace
};

// Territory elimination with bounded backtracking, starting from `start`.
SolveResult eliminate_territories(const Plan& start, const SolverParams& params,
                                  const Instance& instance);

// Full pipeline from the singleton solution; applies parameter overrides of
// F and the compactness mode.
SolveResult solve(const Instance& instance, const SolverParams& params);

// Copy of the instance with the F and mode overrides of `params` applied.
Instance with_overrides(const Instance& instance, const SolverParams& params);

}  // namespace tddmp

#endif
