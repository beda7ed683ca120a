#include "tddmp/generators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace tddmp {

namespace {

std::vector<std::string> tokens(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

bool is_number(const std::string& tok) {
  char* end = nullptr;
  std::strtod(tok.c_str(), &end);
  return end != tok.c_str() && *end == '\0';
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  return s;
}

Instance assemble(std::string name, int days, std::vector<Point> coords,
                  std::vector<std::vector<double>> demand,
                  std::vector<double> service, std::vector<TimeWindow> windows,
                  double capacity, double workday, double bound,
                  CompactnessMode mode, std::vector<std::uint64_t> keys = {}) {
  Instance inst;
  inst.name = std::move(name);
  inst.day_count = days;
  inst.coords = std::move(coords);
  if (keys.empty()) {
    keys.resize(inst.coords.size());
    std::iota(keys.begin(), keys.end(), std::uint64_t{0});
  }
  inst.keys = std::move(keys);
  inst.geometry = GeometryTable::from_sites(inst.coords, inflated_hull(inst.coords));
  inst.travel = euclidean_travel(inst.coords);
  inst.demand = std::move(demand);
  inst.service = std::move(service);
  inst.windows = std::move(windows);
  inst.capacity = capacity;
  inst.workday = workday;
  inst.compactness_bound = bound;
  inst.mode = mode;
  const auto diag = check_instance(inst);
  if (!diag.ok()) {
    throw std::invalid_argument("generated instance is invalid: " + diag.errors.front());
  }
  return inst;
}

}  // namespace

SolomonFile parse_solomon(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  SolomonFile file;
  std::size_t k = 0;
  auto skip_blank = [&] {
    while (k < lines.size() && tokens(lines[k]).empty()) ++k;
  };
  skip_blank();
  if (k == lines.size()) {
    throw ParseError("empty Solomon file");
  }
  file.name = tokens(lines[k])[0];
  ++k;

  skip_blank();
  if (k == lines.size() || upper(tokens(lines[k])[0]) != "VEHICLE") {
    throw ParseError("missing VEHICLE section");
  }
  ++k;
  for (; k < lines.size(); ++k) {
    const auto tok = tokens(lines[k]);
    if (tok.empty() || !is_number(tok[0])) continue;
    if (tok.size() < 2 || !is_number(tok[1])) {
      throw ParseError("line " + std::to_string(k + 1) + ": malformed VEHICLE row");
    }
    file.vehicle_count = std::stoi(tok[0]);
    file.capacity = std::stod(tok[1]);
    ++k;
    break;
  }
  if (file.capacity <= 0.0) {
    throw ParseError("missing VEHICLE section data");
  }

  skip_blank();
  if (k == lines.size() || upper(tokens(lines[k])[0]) != "CUSTOMER") {
    throw ParseError("missing CUSTOMER section");
  }
  ++k;
  for (; k < lines.size(); ++k) {
    const auto tok = tokens(lines[k]);
    if (tok.empty() || !is_number(tok[0])) continue;
    if (tok.size() != 7 || !std::all_of(tok.begin(), tok.end(), is_number)) {
      throw ParseError("line " + std::to_string(k + 1) + ": malformed customer row");
    }
    SolomonRow row{std::stoi(tok[0]), std::stod(tok[1]), std::stod(tok[2]),
                   std::stod(tok[3]), std::stod(tok[4]), std::stod(tok[5]),
                   std::stod(tok[6])};
    if (row.id != static_cast<int>(file.rows.size())) {
      throw ParseError("line " + std::to_string(k + 1) + ": customer rows out of sequence");
    }
    file.rows.push_back(row);
  }
  if (file.rows.size() < 2) {
    throw ParseError("CUSTOMER section has no customer rows");
  }
  return file;
}

SolomonFile read_solomon(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open " + path);
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_solomon(buffer.str());
}

Instance make_small_instance(const SolomonFile& solomon,
                             const GeneratorParams& params) {
  const int n = params.customer_count;
  if (n < 1 || n + 1 > static_cast<int>(solomon.rows.size())) {
    throw std::invalid_argument("customer_count exceeds the Solomon file");
  }
  if (!(params.service_frequency > 0.0 && params.service_frequency <= 1.0)) {
    throw std::invalid_argument("service_frequency must be in (0, 1]");
  }
  std::mt19937_64 rng(params.rng_seed);
  std::bernoulli_distribution serve(params.service_frequency);

  std::vector<Point> coords;
  std::vector<double> service;
  std::vector<TimeWindow> windows;
  std::vector<std::vector<double>> demand(n + 1, std::vector<double>(params.horizon_days, 0.0));
  const auto& depot = solomon.rows[0];
  const double workday = depot.due;
  for (int i = 0; i <= n; ++i) {
    const auto& row = solomon.rows[i];
    coords.push_back({row.x, row.y});
    service.push_back(i == 0 ? 0.0 : row.service);
    windows.push_back(i == 0 ? TimeWindow{0.0, workday} : TimeWindow{row.ready, row.due});
  }
  for (int d = 0; d < params.horizon_days; ++d) {
    for (int i = 1; i <= n; ++i) {
      demand[i][d] = serve(rng) ? solomon.rows[i].demand : 0.0;
    }
  }
  const double capacity = std::floor(params.capacity_factor * solomon.capacity);
  return assemble(solomon.name + "-n" + std::to_string(n) + "-d" +
                      std::to_string(params.horizon_days) + "-s" +
                      std::to_string(params.rng_seed),
                  params.horizon_days, std::move(coords), std::move(demand),
                  std::move(service), std::move(windows), capacity, workday,
                  params.compactness_bound, params.mode);
}

Instance make_random_instance(const RandomInstanceParams& p) {
  if (p.customer_count < 1 || p.horizon_days < 1) {
    throw std::invalid_argument("random instance needs customers and days");
  }
  if (!(p.service_frequency > 0.0 && p.service_frequency <= 1.0)) {
    throw std::invalid_argument("service_frequency must be in (0, 1]");
  }
  std::mt19937_64 rng(p.rng_seed);
  std::uniform_real_distribution<double> coord(0.0, p.extent);
  std::uniform_int_distribution<int> size(1, std::max(1, static_cast<int>(p.max_demand)));
  std::bernoulli_distribution serve(p.service_frequency);

  const Point depot{p.extent / 2.0, p.extent / 2.0};
  std::vector<Point> coords{depot};
  std::vector<double> service{0.0};
  std::vector<TimeWindow> windows{{0.0, p.horizon}};
  while (static_cast<int>(coords.size()) <= p.customer_count) {
    const Point c{coord(rng), coord(rng)};
    const double t = distance(depot, c);
    const double latest = p.horizon - p.service_time - t;
    if (latest < t) continue;  // unreachable even alone
    std::uniform_real_distribution<double> centre(t, latest);
    const double mid = centre(rng);
    const double open = std::clamp(mid - p.window_width / 2.0, 0.0, p.horizon);
    const double close = std::min(mid + p.window_width / 2.0, latest);
    coords.push_back(c);
    service.push_back(p.service_time);
    windows.push_back({open, close});
  }
  const int n = p.customer_count;
  std::vector<std::vector<double>> demand(n + 1, std::vector<double>(p.horizon_days, 0.0));
  for (int i = 1; i <= n; ++i) {
    const double q = std::min<double>(size(rng), p.capacity);
    for (int d = 0; d < p.horizon_days; ++d) {
      demand[i][d] = serve(rng) ? q : 0.0;
    }
  }
  return assemble("random-n" + std::to_string(n) + "-d" + std::to_string(p.horizon_days) +
                      "-s" + std::to_string(p.rng_seed),
                  p.horizon_days, std::move(coords), std::move(demand), std::move(service),
                  std::move(windows), p.capacity, p.horizon, p.compactness_bound, p.mode);
}

// --- monthly instances ------------------------------------------------------

namespace {

struct CustomerTraits {
  Point location;
  double propensity{0.0};    // relative ordering frequency, mean 1
  double demand_scale{0.0};  // kg per order
  double service{0.0};
  TimeWindow window;
};

struct SpatialProcess {
  std::vector<Point> centres;
  double spread{0.0};
};

SpatialProcess make_spatial_process(const MonthlyProfile& p, std::mt19937_64& rng) {
  SpatialProcess sp;
  const int clusters = std::max(1, static_cast<int>(std::ceil(p.customers / 150.0)));
  std::uniform_real_distribution<double> u(0.15 * p.extent, 0.85 * p.extent);
  for (int c = 0; c < clusters; ++c) sp.centres.push_back({u(rng), u(rng)});
  sp.spread = 0.06 * p.extent;
  return sp;
}

CustomerTraits draw_customer(const MonthlyProfile& p, const SpatialProcess& sp,
                             Point depot, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> anywhere(0.02 * p.extent, 0.98 * p.extent);
  std::normal_distribution<double> jitter(0.0, sp.spread);
  std::uniform_int_distribution<std::size_t> pick(0, sp.centres.size() - 1);
  std::lognormal_distribution<double> propensity(-0.18, 0.6);  // mean ~1
  std::lognormal_distribution<double> scale(std::log(p.mean_demand) - 0.18, 0.6);

  CustomerTraits c;
  // Clustered stores plus a scattered background.
  if (u01(rng) < 0.7) {
    const Point centre = sp.centres[pick(rng)];
    c.location = {std::clamp(centre.x + jitter(rng), 0.02 * p.extent, 0.98 * p.extent),
                  std::clamp(centre.y + jitter(rng), 0.02 * p.extent, 0.98 * p.extent)};
  } else {
    c.location = {anywhere(rng), anywhere(rng)};
  }
  c.propensity = std::min(propensity(rng), 0.95 / p.active_fraction);
  c.demand_scale = std::clamp(scale(rng), 10.0, 0.5 * p.capacity);
  c.service = p.service_time * (0.5 + u01(rng));

  const double h = p.workday;
  const double r = u01(rng);
  if (r < 0.4) {
    c.window = {0.0, h};
  } else if (r < 0.7) {
    c.window = {0.0, 0.45 * h};
  } else if (r < 0.9) {
    c.window = {0.3 * h, 0.8 * h};
  } else {
    c.window = {0.5 * h, h};
  }
  const double t = distance(depot, c.location);
  const double latest = h - c.service - t;
  c.window.close = std::min(c.window.close, latest);
  if (c.window.open > c.window.close || c.window.close < t) {
    c.window = {0.0, latest};
  }
  return c;
}

Instance realize_month(const MonthlyProfile& p, const std::vector<CustomerTraits>& customers,
                       const std::vector<std::uint64_t>& keys, Point depot,
                       std::mt19937_64& rng, const std::string& name) {
  const int n = static_cast<int>(customers.size());
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> day_noise(0.0, p.active_std / p.active_fraction);
  std::lognormal_distribution<double> order_noise(-0.045, 0.3);

  // Day factors with mean exactly one so the realised share tracks the profile.
  std::vector<double> factor(p.days);
  for (auto& f : factor) f = std::clamp(1.0 + day_noise(rng), 0.3, 1.7);
  const double mean = std::accumulate(factor.begin(), factor.end(), 0.0) / p.days;
  for (auto& f : factor) f /= mean;

  std::vector<std::vector<double>> demand(n + 1, std::vector<double>(p.days, 0.0));
  std::vector<std::pair<double, int>> keyed(n);
  for (int d = 0; d < p.days; ++d) {
    const int target = std::clamp(
        static_cast<int>(std::lround(p.active_fraction * factor[d] * n)), 0, n);
    // Weighted sampling without replacement (exponential keys).
    for (int i = 0; i < n; ++i) {
      const double u = std::max(u01(rng), 1e-300);
      keyed[i] = {std::log(u) / customers[i].propensity, i};
    }
    std::partial_sort(keyed.begin(), keyed.begin() + target, keyed.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    for (int k = 0; k < target; ++k) {
      const int i = keyed[k].second;
      const double q = std::round(customers[i].demand_scale * order_noise(rng) * 10.0) / 10.0;
      demand[i + 1][d] = std::clamp(q, 1.0, p.capacity);
    }
  }

  std::vector<Point> coords{depot};
  std::vector<double> service{0.0};
  std::vector<TimeWindow> windows{{0.0, p.workday}};
  for (const auto& c : customers) {
    coords.push_back(c.location);
    service.push_back(c.service);
    windows.push_back(c.window);
  }
  std::vector<std::uint64_t> all_keys{0};
  all_keys.insert(all_keys.end(), keys.begin(), keys.end());
  return assemble(name, p.days, std::move(coords), std::move(demand), std::move(service),
                  std::move(windows), p.capacity, p.workday, p.compactness_bound, p.mode,
                  std::move(all_keys));
}

void check_profile(const MonthlyProfile& p) {
  if (!(p.active_fraction > 0.0 && p.active_fraction <= 1.0)) {
    throw std::invalid_argument("active_fraction must be in (0, 1]");
  }
  if (p.days < 1 || p.customers < 1) {
    throw std::invalid_argument("profile needs at least one day and one customer");
  }
  if (!(p.new_customer_rate >= 0.0 && p.new_customer_rate <= 1.0)) {
    throw std::invalid_argument("new_customer_rate must be in [0, 1]");
  }
  if (!(p.capacity > 0.0 && p.workday > 0.0 && p.extent > 0.0)) {
    throw std::invalid_argument("capacity, workday and extent must be positive");
  }
  if (std::sqrt(2.0) * p.extent + p.service_time * 1.5 > p.workday) {
    throw std::invalid_argument("region too large for the workday");
  }
}

std::vector<CustomerTraits> draw_customers(const MonthlyProfile& p, const SpatialProcess& sp,
                                           Point depot, int count, std::mt19937_64& rng) {
  std::vector<CustomerTraits> out;
  const double min_gap = 1e-6 * p.extent;
  while (static_cast<int>(out.size()) < count) {
    auto c = draw_customer(p, sp, depot, rng);
    if (distance(c.location, depot) <= min_gap) continue;
    out.push_back(c);
  }
  return out;
}

}  // namespace

MonthlyProfile profile_from_json(const nlohmann::json& doc) {
  MonthlyProfile p;
  p.days = doc.value("days", p.days);
  p.customers = doc.value("customers", p.customers);
  p.active_fraction = doc.value("active_fraction", p.active_fraction);
  p.active_std = doc.value("active_std", p.active_std);
  p.new_customer_rate = doc.value("new_customer_rate", p.new_customer_rate);
  p.capacity = doc.value("capacity", p.capacity);
  p.workday = doc.value("workday", p.workday);
  p.extent = doc.value("extent", p.extent);
  p.service_time = doc.value("service_time", p.service_time);
  p.mean_demand = doc.value("mean_demand", p.mean_demand);
  p.compactness_bound = doc.value("compactness_bound", p.compactness_bound);
  if (doc.contains("compactness_mode")) {
    p.mode = compactness_mode_from_string(doc.at("compactness_mode").get<std::string>());
  }
  return p;
}

nlohmann::json to_json(const MonthlyProfile& p) {
  return {{"days", p.days},
          {"customers", p.customers},
          {"active_fraction", p.active_fraction},
          {"active_std", p.active_std},
          {"new_customer_rate", p.new_customer_rate},
          {"capacity", p.capacity},
          {"workday", p.workday},
          {"extent", p.extent},
          {"service_time", p.service_time},
          {"mean_demand", p.mean_demand},
          {"compactness_bound", p.compactness_bound},
          {"compactness_mode", to_string(p.mode)}};
}

Instance make_monthly_instance(const MonthlyProfile& profile, std::uint64_t rng_seed) {
  check_profile(profile);
  std::mt19937_64 rng(rng_seed);
  const Point depot{profile.extent / 2.0, profile.extent / 2.0};
  const auto sp = make_spatial_process(profile, rng);
  const auto customers = draw_customers(profile, sp, depot, profile.customers, rng);
  std::vector<std::uint64_t> keys(customers.size());
  std::iota(keys.begin(), keys.end(), std::uint64_t{1});
  return realize_month(profile, customers, keys, depot, rng,
                       "month-n" + std::to_string(profile.customers) + "-s" + std::to_string(rng_seed));
}

MonthPair make_month_pair(const MonthlyProfile& profile, std::uint64_t rng_seed) {
  check_profile(profile);
  std::mt19937_64 rng(rng_seed);
  const Point depot{profile.extent / 2.0, profile.extent / 2.0};
  const auto sp = make_spatial_process(profile, rng);
  const int n = profile.customers;
  const auto customers = draw_customers(profile, sp, depot, n, rng);
  std::vector<std::uint64_t> keys(n);
  std::iota(keys.begin(), keys.end(), std::uint64_t{1});

  MonthPair pair;
  pair.first = realize_month(profile, customers, keys, depot, rng,
                             "month1-n" + std::to_string(n) + "-s" + std::to_string(rng_seed));

  const int kept = static_cast<int>(std::lround((1.0 - profile.new_customer_rate) * n));
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(kept);
  std::sort(order.begin(), order.end());

  std::vector<CustomerTraits> second;
  std::vector<std::uint64_t> second_keys;
  for (int idx : order) {
    second.push_back(customers[idx]);
    second_keys.push_back(keys[idx]);
    pair.shared.emplace_back(idx + 1, static_cast<int>(second.size()));
  }
  auto fresh = draw_customers(profile, sp, depot, n - kept, rng);
  std::uint64_t next_key = static_cast<std::uint64_t>(n) + 1;
  for (auto& c : fresh) {
    second.push_back(c);
    second_keys.push_back(next_key++);
  }
  pair.second = realize_month(profile, second, second_keys, depot, rng,
                              "month2-n" + std::to_string(n) + "-s" + std::to_string(rng_seed));
  return pair;
}

nlohmann::json shared_map_to_json(const std::vector<std::pair<int, int>>& shared) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& [a, b] : shared) pairs.push_back({a, b});
  return {{"schema", schema_tag}, {"kind", "shared_map"}, {"pairs", pairs}};
}

std::vector<std::pair<int, int>> shared_map_from_json(const nlohmann::json& doc) {
  if (doc.value("kind", "") != "shared_map") {
    throw std::invalid_argument("not a shared customer map");
  }
  std::vector<std::pair<int, int>> out;
  for (const auto& p : doc.at("pairs")) {
    out.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
  }
  return out;
}

}  // namespace tddmp
