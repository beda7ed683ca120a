#ifndef TDDMP_EXACT_HPP
#define TDDMP_EXACT_HPP

#include <optional>
#include <string>
#include <vector>

#include "tddmp/model.hpp"

namespace tddmp {

inline constexpr int exact_max_customers = 8;
inline constexpr int exact_max_days = 3;

struct ExactLimits {
  long node_cap{10'000'000};  // partition-search nodes before giving up
};

enum class ExactStatus { optimal, infeasible, unknown };

std::string to_string(ExactStatus status);

struct ExactResult {
  ExactStatus status{ExactStatus::unknown};
  std::optional<Solution> solution;  // set when optimal
  int optimum{0};     // territory count when optimal
  int best_bound{0};  // valid lower bound in every status
  long nodes{0};
};

// Exhaustive optimum over set partitions for tiny instances (at most
// exact_max_customers customers and exact_max_days days). Throws
// std::invalid_argument past the guard.
ExactResult exact_solve(const Instance& instance, const ExactLimits& limits = {});

// Minimum-completion visit order of `customers` on `day` that respects the
// time windows, the workday and the capacity; nullopt if none exists.
// Exact bitmask dynamic programme over visit subsets (at most 16 visits).
std::optional<std::vector<int>> exact_route(const std::vector<int>& customers,
                                            int day, const Instance& instance);

enum class OracleVerdict { optimal, suboptimal, infeasible };

std::string to_string(OracleVerdict verdict);

struct OracleComparison {
  OracleVerdict verdict{OracleVerdict::infeasible};
  int gap{0};  // territories above the optimum
  int optimum{0};
  ValidationReport report;
};

// Validates `solution` and compares its territory count with exact_solve.
// Throws std::invalid_argument past the oracle guard and std::logic_error if
// a valid solution beats the oracle.
OracleComparison verify_against_oracle(const Solution& solution,
                                       const Instance& instance,
                                       const ExactLimits& limits = {});

}  // namespace tddmp

#endif
