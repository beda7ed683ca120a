#include "tddmp/ops.hpp"

#include <glob.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "tddmp/routing.hpp"

namespace tddmp {

namespace {

std::string fmt(double v, int precision = 4) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(precision);
  out << v;
  return out.str();
}

std::string fmt(const std::optional<double>& v, int precision = 4) {
  return v ? fmt(*v, precision) : std::string{};
}

nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

void check_shared_map(const Instance& first, const Instance& second,
                      const std::vector<std::pair<int, int>>& shared) {
  std::set<int> seen_first;
  std::set<int> seen_second;
  for (const auto& [a, b] : shared) {
    if (!first.valid_customer(a) || !second.valid_customer(b)) {
      throw std::invalid_argument("shared map pair (" + std::to_string(a) + ", " +
                                  std::to_string(b) + ") names an unknown customer");
    }
    if (!seen_first.insert(a).second || !seen_second.insert(b).second) {
      throw std::invalid_argument("shared map lists customer pair (" + std::to_string(a) + ", " +
                                  std::to_string(b) + ") more than once");
    }
    if (first.keys[a] != second.keys[b]) {
      throw std::invalid_argument("shared map pairs customers with different keys: " +
                                  std::to_string(a) + " and " + std::to_string(b));
    }
  }
  if (second.day_count < 1) throw std::invalid_argument("second month has no days");
}

// Inserts `customer` on `day` at its cheapest feasible position, or returns
// the least-penalised candidate when no position is feasible.
InsertionCandidate insert_day(WorkTerritory& scratch, int customer, int day, const Instance& inst) {
  const auto plan = best_insertion(customer, scratch, inst);
  for (const auto& cand : plan.per_day) {
    if (cand.day != day) continue;
    if (cand.feasible) {
      auto& route = scratch.routes[day];
      route.insert(route.begin() + cand.position, customer);
    }
    return cand;
  }
  throw std::logic_error("customer inactive on the requested day");
}

void polish(WorkTerritory& scratch, const Instance& inst) {
  for (int d = 0; d < inst.day_count; ++d) {
    auto& route = scratch.routes[d];
    if (route.size() > 2) route = two_opt(route, d, inst, RouteObjective::travel_time);
  }
}

}  // namespace

NextMonthReport next_month(const Solution& first_solution, const Instance& first,
                           const Instance& second,
                           const std::vector<std::pair<int, int>>& shared) {
  check_shared_map(first, second, shared);
  const auto report = validate(first, first_solution);
  if (!report.ok()) {
    throw std::invalid_argument("first-month solution is not feasible: " +
                                report.violations.front().message);
  }

  std::vector<int> owner_first(static_cast<std::size_t>(first.node_count()), -1);
  for (const auto& t : first_solution.territories) {
    for (int i : t.members) owner_first[i] = t.id;
  }
  const int n2 = second.customer_count();
  std::vector<int> owner(static_cast<std::size_t>(n2) + 1, -1);
  std::vector<char> is_new(static_cast<std::size_t>(n2) + 1, 1);
  std::vector<int> old_customers;
  for (const auto& [a, b] : shared) {
    owner[b] = owner_first[a];
    is_new[b] = 0;
    old_customers.push_back(b);
  }
  std::sort(old_customers.begin(), old_customers.end());
  if (old_customers.empty()) {
    throw std::invalid_argument("no customers carry over to the second month");
  }
  std::vector<int> new_customers;
  for (int i = 1; i <= n2; ++i) {
    if (!is_new[i]) continue;
    new_customers.push_back(i);
    int nearest = old_customers.front();
    for (int j : old_customers) {
      if (second.t(i, j) < second.t(i, nearest)) nearest = j;
    }
    owner[i] = owner[nearest];
  }

  std::map<int, WorkTerritory> scratch;
  for (int i = 1; i <= n2; ++i) {
    auto& wt = scratch[owner[i]];
    wt.id = owner[i];
    wt.routes.resize(static_cast<std::size_t>(second.day_count));
  }

  struct Pending {
    int customer;
    int day;
    InsertionCandidate cand;
  };
  std::vector<Pending> rejected;
  auto insert_all = [&](const std::vector<int>& customers) {
    for (int c : customers) {
      for (int d = 0; d < second.day_count; ++d) {
        if (!second.active(c, d)) continue;
        auto cand = insert_day(scratch[owner[c]], c, d, second);
        if (!cand.feasible) rejected.push_back({c, d, cand});
      }
    }
    for (auto& [id, wt] : scratch) polish(wt, second);
  };
  insert_all(old_customers);
  insert_all(new_customers);
  // One retry after 2-opt has shortened the routes.
  auto first_pass = std::move(rejected);
  rejected.clear();
  for (const auto& p : first_pass) {
    auto cand = insert_day(scratch[owner[p.customer]], p.customer, p.day, second);
    if (!cand.feasible) rejected.push_back({p.customer, p.day, cand});
  }
  for (auto& [id, wt] : scratch) polish(wt, second);

  std::vector<InfeasibleVisit> rows;
  for (const auto& p : rejected) {
    InfeasibleVisit row;
    row.day = p.day;
    row.customer = p.customer;
    row.key = second.keys[p.customer];
    row.territory = owner[p.customer];
    row.new_customer = is_new[p.customer] != 0;
    row.demand = second.q(p.customer, p.day);
    row.lateness = p.cand.lateness;
    row.capacity_excess = p.cand.capacity_excess;
    rows.push_back(row);
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.day, a.customer) < std::tie(b.day, b.customer);
  });

  auto result = summarize_rows(rows);
  result.new_customers = static_cast<int>(new_customers.size());

  Plan plan(second);
  for (int i = 1; i <= n2; ++i) scratch[owner[i]].members.push_back(i);
  for (auto& [id, wt] : scratch) {
    wt.shape = shape_of(wt.members, second.geometry);
    plan.add_territory(std::move(wt));
  }
  result.plan = to_solution(plan, second);
  for (const auto& row : rows) result.unserved.emplace_back(row.customer, row.day);
  return result;
}

NextMonthReport summarize_rows(const std::vector<InfeasibleVisit>& rows) {
  NextMonthReport report;
  report.rows = rows;
  std::set<int> customers;
  std::set<int> days;
  double lateness = 0.0;
  int count = 0;
  for (const auto& row : rows) {
    if (!row.new_customer) {
      ++report.old_infeasible;
      continue;
    }
    customers.insert(row.customer);
    days.insert(row.day);
    report.iac += row.demand;
    lateness += row.lateness;
    ++count;
  }
  report.tic = static_cast<int>(customers.size());
  report.tid = static_cast<int>(days.size());
  report.iatw = count > 0 ? lateness / count / 60.0 : 0.0;
  return report;
}

nlohmann::json to_json(const NextMonthReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"day", r.day},
                    {"customer", r.customer},
                    {"key", r.key},
                    {"territory", r.territory},
                    {"new", r.new_customer},
                    {"demand", r.demand},
                    {"lateness", r.lateness},
                    {"capacity_excess", r.capacity_excess}});
  }
  return {{"schema", schema_tag},
          {"kind", "next_month"},
          {"TIC", report.tic},
          {"TID", report.tid},
          {"IAC", report.iac},
          {"IATW", report.iatw},
          {"old_infeasible", report.old_infeasible},
          {"new_customers", report.new_customers},
          {"rows", rows}};
}

std::string rows_to_csv(const std::vector<InfeasibleVisit>& rows) {
  std::string out = "day,customer,key,territory,new,demand,lateness,capacity_excess\n";
  for (const auto& r : rows) {
    out += std::to_string(r.day) + ',' + std::to_string(r.customer) + ',' + std::to_string(r.key) +
           ',' + std::to_string(r.territory) + ',' + (r.new_customer ? "1" : "0") + ',' +
           fmt(r.demand) + ',' + fmt(r.lateness) + ',' + fmt(r.capacity_excess) + '\n';
  }
  return out;
}

// --- benchmark -------------------------------------------------------------

std::string instance_group(const std::string& name) {
  std::size_t letters = 0;
  while (letters < name.size() && std::isalpha(static_cast<unsigned char>(name[letters]))) {
    ++letters;
  }
  if (letters > 0 && letters < name.size() &&
      std::isdigit(static_cast<unsigned char>(name[letters]))) {
    return name.substr(0, letters + 1);
  }
  return name.substr(0, name.find('-'));
}

std::vector<BenchAggregate> aggregate(const std::vector<BenchRow>& rows) {
  struct Acc {
    BenchAggregate agg;
    double acr_sum{0.0};
    int acr_count{0};
    double delta_sum{0.0};
    int delta_count{0};
  };
  std::map<std::string, Acc> groups;
  auto add = [](Acc& acc, const BenchRow& row) {
    if (!row.valid) {
      ++acc.agg.invalid;
      return;
    }
    ++acc.agg.count;
    acc.agg.anv += row.nv;
    acc.agg.att += row.tt_hours;
    acc.agg.acpu += row.cpu_seconds;
    if (row.acr) {
      acc.acr_sum += *row.acr;
      ++acc.acr_count;
    }
    if (row.delta_tt) {
      acc.delta_sum += *row.delta_tt;
      ++acc.delta_count;
    }
  };
  Acc all;
  for (const auto& row : rows) {
    add(groups[row.group], row);
    add(all, row);
  }
  std::vector<BenchAggregate> out;
  auto finish = [&out](Acc acc, const std::string& name) {
    auto agg = acc.agg;
    agg.group = name;
    if (agg.count > 0) {
      agg.anv /= agg.count;
      agg.att /= agg.count;
      agg.acpu /= agg.count;
    }
    if (acc.acr_count > 0) agg.acr = acc.acr_sum / acc.acr_count;
    if (acc.delta_count > 0) agg.delta_tt = acc.delta_sum / acc.delta_count;
    out.push_back(agg);
  };
  for (auto& [name, acc] : groups) finish(acc, name);
  finish(all, "all");
  return out;
}

BenchReport run_bench(const std::vector<BenchJob>& jobs, const BenchOptions& options) {
  if (options.repetitions < 1) throw std::invalid_argument("repetitions must be at least 1");
  if (options.workers < 1) throw std::invalid_argument("workers must be at least 1");
  options.params.check();
  const std::size_t total = jobs.size() * static_cast<std::size_t>(options.repetitions);
  std::vector<BenchRow> rows(total);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;

  auto work = [&] {
    for (;;) {
      const std::size_t task = next++;
      if (task >= total) return;
      const auto& job = jobs[task / static_cast<std::size_t>(options.repetitions)];
      const auto rep = task % static_cast<std::size_t>(options.repetitions);
      try {
        const Instance inst = with_overrides(job.load(), options.params);
        auto params = options.params;
        params.rng_seed = options.params.rng_seed + rep;
        const auto result = solve(inst, params);
        const auto cost = solution_cost(result.solution, inst);
        BenchRow& row = rows[task];
        row.instance = job.label;
        row.group = instance_group(inst.name.empty() ? job.label : inst.name);
        row.seed = params.rng_seed;
        row.initial = result.stats.initial_territories;
        row.nv = cost.territories;
        row.tt_hours = cost.travel_hours;
        row.acr = cost.average_ratio;
        row.cpu_seconds = result.stats.seconds;
        row.valid = validate(inst, result.solution).ok();
        if (job.baseline) {
          const double base = solution_cost(*job.baseline, inst).travel_hours;
          if (base > 0.0) row.delta_tt = (base - cost.travel_hours) / base * 100.0;
        }
        if (!options.out_dir.empty()) {
          const auto path = std::filesystem::path(options.out_dir) /
                            (job.label + "-r" + std::to_string(rep) + ".solution.json");
          write_solution(result.solution, path.string());
        }
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int count = std::min<int>(options.workers, static_cast<int>(std::max<std::size_t>(total, 1)));
  std::vector<std::thread> pool;
  for (int w = 1; w < count; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);

  BenchReport report;
  report.rows = std::move(rows);
  report.aggregates = aggregate(report.rows);
  return report;
}

nlohmann::json to_json(const BenchReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"instance", r.instance},
                    {"group", r.group},
                    {"seed", r.seed},
                    {"initial", r.initial},
                    {"NV", r.nv},
                    {"TT", r.tt_hours},
                    {"ACR", opt_json(r.acr)},
                    {"CPU", r.cpu_seconds},
                    {"delta_TT", opt_json(r.delta_tt)},
                    {"valid", r.valid}});
  }
  nlohmann::json aggs = nlohmann::json::array();
  for (const auto& a : report.aggregates) {
    aggs.push_back({{"group", a.group},
                    {"count", a.count},
                    {"invalid", a.invalid},
                    {"ANV", a.anv},
                    {"ATT", a.att},
                    {"ACR", opt_json(a.acr)},
                    {"ACPU", a.acpu},
                    {"delta_TT", opt_json(a.delta_tt)}});
  }
  return {{"schema", schema_tag}, {"kind", "bench"}, {"rows", rows}, {"aggregates", aggs}};
}

std::string to_csv(const BenchReport& report) {
  std::string out = "instance,group,seed,initial,NV,TT,ACR,CPU,delta_TT,valid\n";
  for (const auto& r : report.rows) {
    out += r.instance + ',' + r.group + ',' + std::to_string(r.seed) + ',' +
           std::to_string(r.initial) + ',' + std::to_string(r.nv) + ',' + fmt(r.tt_hours) + ',' +
           fmt(r.acr) + ',' + fmt(r.cpu_seconds) + ',' + fmt(r.delta_tt, 2) + ',' +
           (r.valid ? "1" : "0") + '\n';
  }
  return out;
}

std::vector<std::string> expand_glob(const std::string& pattern) {
  glob_t found{};
  std::vector<std::string> paths;
  if (::glob(pattern.c_str(), 0, nullptr, &found) == 0) {
    for (std::size_t i = 0; i < found.gl_pathc; ++i) paths.emplace_back(found.gl_pathv[i]);
  }
  ::globfree(&found);
  std::sort(paths.begin(), paths.end());
  return paths;
}

// --- maps ------------------------------------------------------------------

void check_matches(const Solution& solution, const Instance& instance) {
  std::vector<int> count(static_cast<std::size_t>(instance.node_count()), 0);
  for (const auto& t : solution.territories) {
    for (int i : t.members) {
      if (!instance.valid_customer(i)) {
        throw std::invalid_argument("solution names customer " + std::to_string(i) +
                                    ", unknown to instance " + instance.name);
      }
      ++count[i];
    }
    for (const auto& r : t.routes) {
      if (r.day < 0 || r.day >= instance.day_count) {
        throw std::invalid_argument("solution routes day " + std::to_string(r.day) +
                                    ", outside the instance horizon");
      }
    }
  }
  for (int i = 1; i <= instance.customer_count(); ++i) {
    if (count[i] != 1) {
      throw std::invalid_argument("customer " + std::to_string(i) + " appears in " +
                                  std::to_string(count[i]) + " territories of the solution");
    }
  }
}

std::string render_svg(const Solution& solution, const Instance& instance, double width) {
  check_matches(solution, instance);
  const Box& box = instance.geometry.box();
  const double scale = width / box.width();
  const double height = box.height() * scale;
  auto px = [&](Point p) {
    return fmt((p.x - box.min_x) * scale, 2) + ',' + fmt((box.max_y - p.y) * scale, 2);
  };
  auto path_of = [&](const std::vector<Point>& ring) {
    std::string d = "M";
    for (std::size_t k = 0; k < ring.size(); ++k) d += (k ? " L" : "") + px(ring[k]);
    return d + " Z";
  };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width, 0) +
                    "\" height=\"" + fmt(height, 0) + "\" viewBox=\"0 0 " + fmt(width, 2) + ' ' +
                    fmt(height, 2) + "\">\n";
  svg += "<title>" + instance.name + "</title>\n";
  svg += "<g fill=\"none\" stroke=\"#bbbbbb\" stroke-width=\"0.5\">\n";
  for (int i = 1; i <= instance.customer_count(); ++i) {
    svg += "<path d=\"" + path_of(instance.geometry.unit(i).polygon) + "\"/>\n";
  }
  svg += "</g>\n";
  for (const auto& t : solution.territories) {
    const double hue = std::fmod(t.id * 137.508, 360.0);
    std::string d;
    for (const auto& ring : dissolve(t.members, instance.geometry)) d += path_of(ring) + ' ';
    svg += "<path id=\"territory-" + std::to_string(t.id) + "\" d=\"" + d +
           "\" fill=\"hsl(" + fmt(hue, 1) +
           ",60%,70%)\" fill-opacity=\"0.6\" fill-rule=\"evenodd\" stroke=\"#333333\" "
           "stroke-width=\"1.5\"/>\n";
  }
  svg += "<g fill=\"#222222\">\n";
  for (int i = 1; i <= instance.customer_count(); ++i) {
    const auto p = instance.coords[i];
    svg += "<circle cx=\"" + fmt((p.x - box.min_x) * scale, 2) + "\" cy=\"" +
           fmt((box.max_y - p.y) * scale, 2) + "\" r=\"2\"/>\n";
  }
  svg += "</g>\n";
  const auto depot = instance.coords[0];
  svg += "<rect x=\"" + fmt((depot.x - box.min_x) * scale - 5, 2) + "\" y=\"" +
         fmt((box.max_y - depot.y) * scale - 5, 2) +
         "\" width=\"10\" height=\"10\" fill=\"#cc0000\"/>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace tddmp
