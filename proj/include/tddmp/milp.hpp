#ifndef TDDMP_MILP_HPP
#define TDDMP_MILP_HPP

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "tddmp/model.hpp"

namespace tddmp {

enum class VarKind { binary, continuous };

struct MilpVar {
  std::string name;   // e.g. x_0_3_1_2
  std::string group;  // x, y, z, zh, zb, w, s, e, u
  VarKind kind{VarKind::binary};
  double lower{0.0};
  double upper{1.0};  // infinity for unbounded continuous variables
};

struct MilpTerm {
  int var{0};
  double coef{0.0};
};

enum class RowSense { le, ge, eq };

struct MilpRow {
  std::string name;
  std::string family;  // "2" ... "20", or "sym"
  std::vector<MilpTerm> terms;
  RowSense sense{RowSense::le};
  double rhs{0.0};
};

struct MilpOptions {
  // z_k >= z_{k+1}; the model itself has no symmetry breaking.
  bool symmetry_breaking{false};
  // Depot rows with sum_j x_0jkd = z_k for every day, so a used vehicle
  // leaves the depot even on days without active customers. The default
  // bounds departures by z_k instead.
  bool literal_depot_flow{false};
  // Larger big-M than the default h + max g + max t.
  std::optional<double> big_m;
};

// In-memory MILP over |K| = n vehicles. Customers are 1..n, vehicles 1..n.
struct MilpModel {
  std::vector<MilpVar> vars;
  std::vector<MilpRow> rows;
  std::vector<MilpTerm> objective;
  double big_m{0.0};
  int vehicles{0};
  MilpOptions options;

  int var(const std::string& name) const;  // throws std::out_of_range
  bool has_var(const std::string& name) const { return index_.count(name) > 0; }
  std::map<std::string, std::size_t> row_counts() const;  // by family
  std::map<std::string, std::size_t> var_counts() const;  // by group

  int add_var(MilpVar v);

 private:
  std::unordered_map<std::string, int> index_;
};

// Throws std::invalid_argument in sqrt_of_sum mode, which has no linear form.
MilpModel build_milp(const Instance& instance, const MilpOptions& options = {});

// CPLEX LP text of the model.
std::string to_lp(const MilpModel& model);

struct MilpArtifacts {
  MilpModel model;
  std::string lp;
  nlohmann::json registry;  // counts by family and group, big-M
};

MilpArtifacts emit_milp(const Instance& instance, const MilpOptions& options = {});

nlohmann::json registry_json(const MilpModel& model);

// Parses `name value` lines; blank lines and lines starting with '#' are
// skipped. Throws std::invalid_argument on malformed lines.
std::unordered_map<std::string, double> parse_milp_values(const std::string& text);

// Dense assignment in model variable order; missing names are zero.
std::vector<double> dense_values(const MilpModel& model,
                                 const std::unordered_map<std::string, double>& values);

// Territories from z/zh, routes from the x arcs, schedules recomputed by
// the earliest-start rule.
Solution decode_solution(const MilpModel& model, const std::vector<double>& values,
                         const Instance& instance);

// Feasible assignment for a solution: territories map to vehicles in order,
// the first member is the sink and flows follow a breadth-first tree.
std::vector<double> encode_solution(const MilpModel& model, const Solution& solution,
                                    const Instance& instance);

double objective_value(const MilpModel& model, const std::vector<double>& values);

struct RowViolation {
  std::string row;
  double lhs{0.0};
  double rhs{0.0};
};

// Rows and bounds violated by `values` beyond `tolerance`; integrality of
// binaries is checked too.
std::vector<RowViolation> check_assignment(const MilpModel& model,
                                           const std::vector<double>& values,
                                           double tolerance = 1e-6);

}  // namespace tddmp

#endif
