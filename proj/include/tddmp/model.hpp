#ifndef TDDMP_MODEL_HPP
#define TDDMP_MODEL_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tddmp/geometry.hpp"

namespace tddmp {

inline constexpr const char* schema_tag = "tddmp-1";

struct TimeWindow {
  double open{0.0};
  double close{0.0};

  friend bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

// Node 0 is the depot, nodes 1..n are customers. Times are minutes, demands
// kg, coordinates planar distance units.
struct Instance {
  std::string name;
  int day_count{1};
  std::vector<Point> coords;
  // Stable external customer keys; used to pair customers across months.
  std::vector<std::uint64_t> keys;
  GeometryTable geometry;
  std::vector<double> travel;                // (n+1) x (n+1), row-major
  std::vector<std::vector<double>> demand;   // [node][day]; depot row zero
  std::vector<double> service;               // g_i; depot 0
  std::vector<TimeWindow> windows;           // [a_i, b_i]; depot [0, h]
  double capacity{0.0};
  double workday{0.0};
  double compactness_bound{10.0};
  CompactnessMode mode{CompactnessMode::sqrt_of_sum};

  int customer_count() const { return static_cast<int>(coords.size()) - 1; }
  int node_count() const { return static_cast<int>(coords.size()); }
  double t(int i, int j) const {
    return travel[static_cast<std::size_t>(i) * coords.size() +
                  static_cast<std::size_t>(j)];
  }
  double q(int i, int d) const { return demand[i][d]; }
  bool active(int i, int d) const { return demand[i][d] > 0.0; }
  bool valid_customer(int i) const { return i >= 1 && i <= customer_count(); }
  int active_days(int i) const;

  friend bool operator==(const Instance&, const Instance&) = default;
};

struct InstanceDiagnostics {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  bool ok() const { return errors.empty(); }
};

// Checks the data-model invariants (sizes, q <= c, window sanity, travel
// matrix sign/diagonal). Triangle-inequality violations are warnings.
InstanceDiagnostics check_instance(const Instance& instance);

// Euclidean travel-time matrix over the coordinates (time unit = distance).
std::vector<double> euclidean_travel(const std::vector<Point>& coords);

struct Route {
  int day{0};
  std::vector<int> visits;
  std::vector<double> starts;
  std::vector<double> waits;

  friend bool operator==(const Route&, const Route&) = default;
};

struct Territory {
  int id{0};
  std::vector<int> members;  // sorted
  std::vector<Route> routes;  // one per day with an active member, by day
  double perimeter{0.0};
  double area{0.0};
  double ratio{0.0};

  friend bool operator==(const Territory&, const Territory&) = default;
};

struct Solution {
  std::vector<Territory> territories;

  int territory_count() const;

  friend bool operator==(const Solution&, const Solution&) = default;
};

// Recomputes the cached perimeter/area/ratio of each territory.
void refresh_shapes(Solution& solution, const Instance& instance);

struct ScheduleOutcome {
  std::optional<Route> route;
  std::string reason;
  int customer{-1};   // offending customer, -1 for the depot return
  double amount{0.0};  // minutes late

  bool feasible() const { return route.has_value(); }
};

// Earliest-start schedule: leave the depot at a_0 and start every visit at
// max(a_j, arrival). Throws std::invalid_argument for customers inactive on
// `day` or unknown ids.
ScheduleOutcome propagate_schedule(const std::vector<int>& visits, int day,
                                   const Instance& instance);

enum class ConstraintFamily {
  partition,    // every customer in exactly one territory
  capacity,     // daily load per vehicle
  compactness,  // perimeter ratio bound F
  contiguity,   // territories connected through shared sides
  assignment,   // routes visit own members on their active days
  schedule,     // start times, windows and the workday
};

std::string to_string(ConstraintFamily family);

struct Violation {
  ConstraintFamily family;
  int territory{-1};
  int day{-1};
  int customer{-1};
  double magnitude{0.0};
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::size_t count(ConstraintFamily family) const;
};

// A solution referencing unknown customers or days.
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ValidateOptions {
  // Contiguity and compactness of the territories.
  bool check_design{true};
  // (customer, day) pairs that may be absent from the routes.
  std::vector<std::pair<int, int>> unserved;
};

ValidationReport validate(const Instance& instance, const Solution& solution,
                          const ValidateOptions& options = {});

struct SolutionCost {
  int territories{0};
  double travel_hours{0.0};
  std::optional<double> average_ratio;
  int active_customer_days{0};
};

SolutionCost solution_cost(const Solution& solution, const Instance& instance);

nlohmann::json to_json(const Instance& instance);
Instance instance_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const Solution& solution);
Solution solution_from_json(const nlohmann::json& doc);

Instance read_instance(const std::string& path);
void write_instance(const Instance& instance, const std::string& path);
Solution read_solution(const std::string& path);
void write_solution(const Solution& solution, const std::string& path);

nlohmann::json read_json_file(const std::string& path);
// Writes to a sibling temporary file and renames it into place.
void write_text_atomic(const std::string& path, const std::string& text);

// GeoJSON FeatureCollection with one dissolved polygon per territory.
nlohmann::json territories_to_geojson(const Solution& solution,
                                      const Instance& instance);

}  // namespace tddmp

#endif
