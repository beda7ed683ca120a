#ifndef TDDMP_ROUTING_HPP
#define TDDMP_ROUTING_HPP

#include <optional>
#include <vector>

#include "tddmp/geometry.hpp"
#include "tddmp/model.hpp"

namespace tddmp {

// Relaxed evaluation of one day route: visits start at max(a_j, arrival);
// lateness and depot overtime are recorded rather than rejected.
struct RouteStats {
  double load{0.0};
  double lateness{0.0};    // sum of max(0, s_j - b_j)
  double overtime{0.0};    // max(0, return - h)
  double completion{0.0};  // arrival back at the depot
  double travel{0.0};

  double capacity_excess(double capacity) const {
    return load > capacity ? load - capacity : 0.0;
  }
  bool feasible(double capacity) const;
};

RouteStats evaluate_route(const std::vector<int>& visits, int day,
                          const Instance& instance);

struct PenaltyWeights {
  double capacity{1.0};
  double time_window{1.0};
};

struct PenaltyBreakdown {
  double capacity{0.0};     // P_c, kg
  double time_window{0.0};  // P_tw, minutes (lateness + depot overtime)
  double overtime{0.0};     // part of P_tw due to late depot returns
  double combined{0.0};     // F_p

  bool feasible() const { return combined <= 1e-9; }
};

PenaltyBreakdown route_penalty(const RouteStats& stats, double capacity,
                               const PenaltyWeights& weights = {});

// Working territory used by the heuristics: members plus one visit list per
// day of the horizon (empty on days without active members).
struct WorkTerritory {
  int id{0};
  std::vector<int> members;  // sorted
  std::vector<std::vector<int>> routes;
  ShapeAggregate shape;

  friend bool operator==(const WorkTerritory&, const WorkTerritory&) = default;
};

// Partial or complete assignment of customers to territories.
// owner[i] is a territory id, or -1 while customer i is unassigned.
class Plan {
 public:
  Plan() = default;
  explicit Plan(const Instance& instance);

  const std::vector<WorkTerritory>& territories() const { return territories_; }
  std::size_t size() const { return territories_.size(); }
  int owner(int customer) const { return owner_[customer]; }
  const std::vector<int>& owners() const { return owner_; }
  bool has(int id) const;
  const WorkTerritory& territory(int id) const;
  WorkTerritory& territory(int id);

  int add_territory(WorkTerritory t);  // takes ownership of its members
  WorkTerritory remove_territory(int id);

  // Membership edits; routes are the caller's responsibility.
  void add_member(int id, int customer, const GeometryTable& geo);
  void remove_member(int id, int customer, const GeometryTable& geo);

  // Boundary length customer `i` shares with territory `id`.
  double shared_with(int id, int customer, const GeometryTable& geo) const;
  // Ids of territories owning a neighbour of `customer` (sorted, unique).
  std::vector<int> adjacent_territories(int customer,
                                        const GeometryTable& geo) const;

  friend bool operator==(const Plan&, const Plan&) = default;

 private:
  std::vector<WorkTerritory> territories_;  // sorted by id
  std::vector<int> owner_;
};

// Singleton territory per customer with a round trip on each active day.
Plan singleton_plan(const Instance& instance);

PenaltyBreakdown penalty(const Plan& plan, const Instance& instance,
                         const PenaltyWeights& weights = {});
PenaltyBreakdown territory_penalty(const WorkTerritory& territory,
                                   const Instance& instance,
                                   const PenaltyWeights& weights = {});

// Schedules every route with the earliest-start rule. Routes that are not
// schedule-feasible keep their relaxed starts.
Solution to_solution(const Plan& plan, const Instance& instance);
Plan plan_from_solution(const Solution& solution, const Instance& instance);

struct InsertionCandidate {
  int day{0};
  int position{-1};
  double delta_cost{0.0};  // increase in completion time, minutes
  bool feasible{false};
  double capacity_excess{0.0};
  double lateness{0.0};  // includes depot overtime
};

struct InsertionPlan {
  std::vector<InsertionCandidate> per_day;  // one per active day of customer
  bool feasible{false};
  double total_delta{0.0};
};

// Minimum-delta feasible position on every active day of `customer`; when a
// day has no feasible position, the least-penalised position is reported.
// Throws std::invalid_argument if the customer already belongs to the
// territory.
InsertionPlan best_insertion(int customer, const WorkTerritory& territory,
                             const Instance& instance);

// Per active day, the position minimising the route's F_p after insertion
// (ties: smaller completion time, then smaller position).
InsertionPlan penalized_insertion(int customer, const WorkTerritory& territory,
                                  const Instance& instance,
                                  const PenaltyWeights& weights = {});

void apply_insertion(WorkTerritory& territory, int customer,
                     const InsertionPlan& plan);
void remove_from_routes(WorkTerritory& territory, int customer,
                        const Instance& instance);

enum class RouteObjective {
  travel_time,  // feasible moves only, minimise travel time
  penalty,      // minimise (F_p, travel time) lexicographically
};

// First-improvement 2-opt (segment reversal) to local optimality.
std::vector<int> two_opt(const std::vector<int>& visits, int day,
                         const Instance& instance, RouteObjective objective,
                         const PenaltyWeights& weights = {});

enum class RelocateObjective {
  penalty,      // total F_p
  compactness,  // sum of the two territories' ratios
};

struct RelocateOptions {
  RelocateObjective objective{RelocateObjective::compactness};
  // Reject moves that increase total travel time (compactness objective).
  bool forbid_travel_increase{false};
  // Only customers of these territories are moved; empty means all.
  std::vector<int> sources;
  int max_moves{10000};
  PenaltyWeights weights{};
};

// Single-customer moves between adjacent territories. A move keeps both
// territories non-empty, contiguous and within the compactness bound, moves
// the customer on all days at once, and must strictly improve the
// objective. Returns the number of accepted moves.
int relocate(Plan& plan, const Instance& instance,
             const RelocateOptions& options);

}  // namespace tddmp

#endif
