#ifndef TDDMP_GENERATORS_HPP
#define TDDMP_GENERATORS_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tddmp/model.hpp"

namespace tddmp {

struct SolomonRow {
  int id{0};
  double x{0.0};
  double y{0.0};
  double demand{0.0};
  double ready{0.0};
  double due{0.0};
  double service{0.0};
};

struct SolomonFile {
  std::string name;
  int vehicle_count{0};
  double capacity{0.0};
  std::vector<SolomonRow> rows;  // rows[0] is the depot
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

SolomonFile parse_solomon(const std::string& text);
SolomonFile read_solomon(const std::string& path);

struct GeneratorParams {
  int customer_count{10};
  int horizon_days{5};
  double service_frequency{0.7};
  double capacity_factor{0.5};
  std::uint64_t rng_seed{1};
  double compactness_bound{10.0};
  CompactnessMode mode{CompactnessMode::sum_of_sqrts};
};

// First `customer_count` customers kept verbatim; per customer-day demand is
// the Solomon demand with probability `service_frequency`, else zero.
Instance make_small_instance(const SolomonFile& solomon,
                             const GeneratorParams& params);

// Solomon-like random instance (uniform coordinates, narrow windows),
// used for oracle checks and fuzzing.
struct RandomInstanceParams {
  int customer_count{6};
  int horizon_days{3};
  double service_frequency{0.7};
  double capacity{100.0};
  double max_demand{40.0};
  double horizon{240.0};
  double window_width{60.0};
  double service_time{10.0};
  double extent{100.0};
  std::uint64_t rng_seed{1};
  double compactness_bound{10.0};
  CompactnessMode mode{CompactnessMode::sum_of_sqrts};
};

Instance make_random_instance(const RandomInstanceParams& params);

// Monthly profile in the style of the large real-world instances.
struct MonthlyProfile {
  int days{23};
  int customers{1784};
  double active_fraction{0.192};
  double active_std{0.039};       // day-to-day spread of the active share
  double new_customer_rate{0.115};
  double capacity{5000.0};
  double workday{600.0};
  double extent{120.0};           // side of the square region, minutes
  double service_time{8.0};
  double mean_demand{250.0};
  double compactness_bound{10.0};
  CompactnessMode mode{CompactnessMode::sqrt_of_sum};
};

MonthlyProfile profile_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const MonthlyProfile& profile);

Instance make_monthly_instance(const MonthlyProfile& profile,
                               std::uint64_t rng_seed);

struct MonthPair {
  Instance first;
  Instance second;
  // (node in first, node in second) for customers present in both months.
  std::vector<std::pair<int, int>> shared;
};

MonthPair make_month_pair(const MonthlyProfile& profile, std::uint64_t rng_seed);

nlohmann::json shared_map_to_json(const std::vector<std::pair<int, int>>& shared);
std::vector<std::pair<int, int>> shared_map_from_json(const nlohmann::json& doc);

}  // namespace tddmp

#endif
