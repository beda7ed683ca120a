#ifndef TDDMP_OPS_HPP
#define TDDMP_OPS_HPP

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tddmp/model.hpp"
#include "tddmp/solver.hpp"

namespace tddmp {

// --- next-month evaluation -------------------------------------------------

struct InfeasibleVisit {
  int day{0};
  int customer{0};  // node in the second month
  std::uint64_t key{0};
  int territory{0};
  bool new_customer{false};
  double demand{0.0};
  double lateness{0.0};  // minutes, least-penalised position
  double capacity_excess{0.0};
};

struct NextMonthReport {
  int tic{0};          // new customers infeasible on at least one day
  int tid{0};          // days with at least one infeasible new customer
  double iac{0.0};     // kg over infeasible new customer-days
  double iatw{0.0};    // mean lateness over those customer-days, hours
  int old_infeasible{0};  // infeasible customer-days of old customers
  int new_customers{0};
  std::vector<InfeasibleVisit> rows;
  Solution plan;  // second-month routes without the infeasible visits
  std::vector<std::pair<int, int>> unserved;
};

// Old customers keep their territory; each new customer joins the territory
// of its nearest old customer by travel time (ties: smaller node). Every
// territory-day is routed by cheapest feasible insertion (old customers
// first) and 2-opt. Throws std::invalid_argument on an inconsistent map or
// a first-month solution that does not validate.
NextMonthReport next_month(const Solution& first_solution, const Instance& first,
                           const Instance& second,
                           const std::vector<std::pair<int, int>>& shared);

// TIC/TID/IAC/IATW recomputed from the rows alone.
NextMonthReport summarize_rows(const std::vector<InfeasibleVisit>& rows);

nlohmann::json to_json(const NextMonthReport& report);
std::string rows_to_csv(const std::vector<InfeasibleVisit>& rows);

// --- benchmark -------------------------------------------------------------

struct BenchRow {
  std::string instance;
  std::string group;  // instance class, e.g. C1 or R2
  std::uint64_t seed{0};
  int initial{0};
  int nv{0};
  double tt_hours{0.0};
  std::optional<double> acr;
  double cpu_seconds{0.0};
  std::optional<double> delta_tt;  // % travel-time reduction vs baseline
  bool valid{false};
};

struct BenchAggregate {
  std::string group;
  int count{0};
  double anv{0.0};
  double att{0.0};
  std::optional<double> acr;
  double acpu{0.0};
  std::optional<double> delta_tt;
  int invalid{0};
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::vector<BenchAggregate> aggregates;  // by group, then "all"
};

// Class of an instance name: leading letters plus the next digit for
// Solomon-style names (C101 -> C1), else the text before the first '-'.
std::string instance_group(const std::string& name);

std::vector<BenchAggregate> aggregate(const std::vector<BenchRow>& rows);

struct BenchJob {
  std::string label;
  std::function<Instance()> load;
  std::optional<Solution> baseline;
};

struct BenchOptions {
  SolverParams params;
  int repetitions{1};
  int workers{1};
  std::string out_dir;  // solutions written here when non-empty
};

BenchReport run_bench(const std::vector<BenchJob>& jobs, const BenchOptions& options);

nlohmann::json to_json(const BenchReport& report);
std::string to_csv(const BenchReport& report);

// Sorted paths matching a shell pattern; empty when nothing matches.
std::vector<std::string> expand_glob(const std::string& pattern);

// --- maps ------------------------------------------------------------------

// Throws std::invalid_argument unless the solution covers exactly the
// instance's customers.
void check_matches(const Solution& solution, const Instance& instance);

std::string render_svg(const Solution& solution, const Instance& instance,
                       double width = 800.0);

}  // namespace tddmp

#endif
