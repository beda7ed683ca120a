// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "test_support.hpp"
#include "tddmp/exact.hpp"
#include "tddmp/generators.hpp"
#include "tddmp/milp.hpp"
#include "tddmp/ops.hpp"
#include "tddmp/routing.hpp"
#include "tddmp/solver.hpp"

using namespace tddmp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass{false};
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Instance oracle_instance(int seed) {
  RandomInstanceParams p;
  p.customer_count = 6;
  p.horizon_days = 3;
  p.service_frequency = 0.7;
  p.rng_seed = static_cast<std::uint64_t>(seed);
  return make_random_instance(p);
}

bool territories_sound(const Plan& plan, const Instance& inst) {
  for (const auto& t : plan.territories()) {
    if (t.members.empty() || !is_contiguous(t.members, inst.geometry)) return false;
    if (compactness_ratio(t.members, inst.geometry, inst.mode) > inst.compactness_bound + 1e-9) {
      return false;
    }
  }
  return true;
}

// 1. Heuristic territory count equals the exact optimum.
Outcome heuristic_matches_oracle() {
  int match = 0, below = 0, skipped = 0;
  for (int seed = 1; seed <= 30; ++seed) {
    const auto inst = oracle_instance(seed);
    const auto exact = exact_solve(inst);
    if (exact.status != ExactStatus::optimal) {
      ++skipped;
      continue;
    }
    SolverParams params;
    params.ct_max_seconds = 60;
    params.rng_seed = static_cast<std::uint64_t>(seed);
    const auto out = solve(inst, params);
    const int nv = static_cast<int>(out.solution.territories.size());
    if (!validate(inst, out.solution).ok()) continue;
    if (nv == exact.optimum) ++match;
    if (nv < exact.optimum) ++below;
  }
  return {match >= 28 && below == 0 && skipped == 0,
          fmt("%d/30 equal to the exact optimum, %d below, %d without optimum", match, below,
              skipped)};
}

// 2. HiGHS on the emitted LP agrees with the exact optimum.
Outcome milp_matches_oracle() {
  const fs::path dir = fs::temp_directory_path() / "tddmp-acceptance-milp";
  fs::create_directories(dir);
  const std::string script = std::string(TDDMP_TOOLS) + "/milp_solve.py";
  int agree = 0;
  std::string note;
  for (int seed = 1; seed <= 10; ++seed) {
    const auto inst = oracle_instance(seed);
    const auto exact = exact_solve(inst);
    const auto lp = dir / fmt("m%d.lp", seed);
    const auto values = dir / fmt("m%d.txt", seed);
    std::ofstream(lp) << emit_milp(inst).lp;
    const std::string cmd = "python3 '" + script + "' '" + lp.string() + "' '" + values.string() +
                            "' --time-limit 60 > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    const int rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    if (rc != 0) {
      note = fmt(" (seed %d: solver exit %d)", seed, rc);
      continue;
    }
    std::ifstream in(values);
    std::string header;
    std::getline(in, header);
    const auto pos = header.find("objective ");
    if (pos == std::string::npos) continue;
    const double objective = std::stod(header.substr(pos + 10));
    if (exact.status == ExactStatus::optimal && std::lround(objective) == exact.optimum &&
        std::abs(objective - exact.optimum) < 1e-6) {
      ++agree;
    } else {
      note = fmt(" (seed %d: MILP %.3f vs exact %d)", seed, objective, exact.optimum);
    }
  }
  return {agree == 10, fmt("%d/10 MILP optima equal to the exact optimum", agree) + note};
}

// 3. Solomon-derived 10-customer, 5-day instances solve within a second.
Outcome small_instances_fast() {
  const std::string data = std::string(TDDMP_TEST_DATA) + "/solomon/";
  double worst = 0.0;
  int count = 0;
  bool clean = true;
  for (const char* name : {"C101", "R101", "RC101"}) {
    const auto file = read_solomon(data + name + ".txt");
    for (int seed = 1; seed <= 10; ++seed) {
      GeneratorParams g;
      g.rng_seed = static_cast<std::uint64_t>(seed);
      const auto inst = make_small_instance(file, g);
      SolverParams params;
      params.rng_seed = static_cast<std::uint64_t>(seed);
      const auto t0 = std::chrono::steady_clock::now();
      const auto out = solve(inst, params);
      worst = std::max(worst, seconds_since(t0));
      clean = clean && validate(inst, out.solution).ok();
      ++count;
    }
  }
  return {worst <= 1.0 && clean, fmt("%d instances, slowest %.3f s", count, worst)};
}

// 4. Compactness constants of a square and a 64-gon.
Outcome compactness_constants() {
  const auto square = GeometryTable::from_sites(std::vector<Point>{{0.5, 0.5}}, Box{0, 0, 1, 1});
  const std::vector<int> unit{0};
  const double cr_square = compactness_ratio(unit, square, CompactnessMode::sqrt_of_sum);

  BasicUnitGeometry gon;
  for (int k = 0; k < 64; ++k) {
    const double a = 2 * std::numbers::pi * k / 64;
    gon.polygon.push_back({2 + std::cos(a), 2 + std::sin(a)});
  }
  gon.area = polygon_area(gon.polygon);
  gon.perimeter = polygon_perimeter(gon.polygon);
  gon.sqrt_area = std::sqrt(gon.area);
  const GeometryTable table({gon}, Box{0, 0, 4, 4});
  const double cr_gon = compactness_ratio(unit, table, CompactnessMode::sqrt_of_sum);
  const double target = 2 * std::sqrt(std::numbers::pi);
  const double rel = std::abs(cr_gon - target) / target;
  return {cr_square == 4.0 && rel <= 0.005,
          fmt("square %.12g, 64-gon %.6f vs %.6f (%.4f%%)", cr_square, cr_gon, target, 100 * rel)};
}

struct CorpusEntry {
  Instance instance;
  Solution solution;
  ValidateOptions options;
  std::string source;
};

struct Corpus {
  std::vector<CorpusEntry> entries;
  int invariant_failures{0};
  std::string first_failure;
};

Instance fuzz_instance(std::mt19937_64& rng) {
  RandomInstanceParams p;
  p.customer_count = 4 + static_cast<int>(rng() % 10);
  p.horizon_days = 1 + static_cast<int>(rng() % 4);
  p.service_frequency = 0.4 + 0.1 * static_cast<double>(rng() % 7);
  p.capacity = 60 + 20 * static_cast<double>(rng() % 5);
  p.window_width = 30 + 10 * static_cast<double>(rng() % 10);
  p.compactness_bound = 6 + static_cast<double>(rng() % 5);
  p.mode = rng() % 2 ? CompactnessMode::sqrt_of_sum : CompactnessMode::sum_of_sqrts;
  p.rng_seed = rng();
  return make_random_instance(p);
}

// Solutions from solve, bench and next-month over random instances and
// seeds, with the solver invariants checked along the way.
Corpus build_corpus() {
  Corpus c;
  std::mt19937_64 rng(2024);
  auto fail = [&c](const std::string& what) {
    if (c.invariant_failures++ == 0) c.first_failure = what;
  };
  while (c.entries.size() < 900) {
    const auto inst = fuzz_instance(rng);
    SolverParams params;
    params.rng_seed = rng();
    params.k_max = static_cast<int>(rng() % 4);
    params.eta = 1 + static_cast<int>(rng() % 5);
    params.audit = true;
    SolveResult a, b;
    try {
      a = solve(inst, params);
      b = solve(inst, params);
    } catch (const IntrinsicInfeasibility&) {
      continue;
    }
    const auto& h = a.stats.incumbent_history;
    if (!std::is_sorted(h.rbegin(), h.rend())) fail(inst.name + ": incumbent increased");
    if (a.stats.max_stack > params.eta) fail(inst.name + ": stack above eta");
    if (a.stats.merges.audit_failures != 0) fail(inst.name + ": pool audit failed");
    if (to_json(a.solution) != to_json(b.solution) || a.trace != b.trace) {
      fail(inst.name + ": not deterministic");
    }
    c.entries.push_back({inst, a.solution, {}, "solve"});
  }

  const fs::path dir = fs::temp_directory_path() / "tddmp-acceptance-bench";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::vector<BenchJob> jobs;
  std::vector<Instance> bench_instances;
  while (jobs.size() < 25) {
    auto inst = fuzz_instance(rng);
    try {
      initial_plan(inst);
    } catch (const IntrinsicInfeasibility&) {
      continue;
    }
    inst.name = fmt("fuzz%zu", jobs.size());
    bench_instances.push_back(inst);
    jobs.push_back({inst.name, [inst] { return inst; }, std::nullopt});
  }
  BenchOptions opt;
  opt.repetitions = 2;
  opt.workers = 2;
  opt.out_dir = dir.string();
  opt.params.rng_seed = rng();
  run_bench(jobs, opt);
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    for (int r = 0; r < 2; ++r) {
      std::ifstream in(dir / fmt("%s-r%d.solution.json", jobs[j].label.c_str(), r));
      c.entries.push_back(
          {bench_instances[j], solution_from_json(nlohmann::json::parse(in)), {}, "bench"});
    }
  }

  MonthlyProfile profile;
  profile.customers = 40;
  profile.days = 3;
  profile.new_customer_rate = 0.1;
  for (std::uint64_t seed = 1; c.entries.size() < 1000; ++seed) {
    const auto pair = make_month_pair(profile, seed);
    SolverParams params;
    params.rng_seed = seed;
    const auto first = solve(pair.first, params).solution;
    const auto report = next_month(first, pair.first, pair.second, pair.shared);
    ValidateOptions vo;
    vo.check_design = false;
    vo.unserved = report.unserved;
    c.entries.push_back({pair.second, report.plan, vo, "next-month"});
  }
  return c;
}

// 5. Every emitted solution validates.
Outcome corpus_feasible(const Corpus& c) {
  int clean = 0;
  std::string first;
  for (const auto& e : c.entries) {
    if (validate(e.instance, e.solution, e.options).ok()) {
      ++clean;
    } else if (first.empty()) {
      first = " (first: " + e.source + " " + e.instance.name + ")";
    }
  }
  return {clean == int(c.entries.size()),
          fmt("%d/%zu solutions validator-clean", clean, c.entries.size()) + first};
}

// 6. Solver invariants over the corpus runs.
Outcome corpus_invariants(const Corpus& c) {
  return {c.invariant_failures == 0,
          fmt("%d invariant failures over the solver runs", c.invariant_failures) +
              (c.first_failure.empty() ? "" : " (first: " + c.first_failure + ")")};
}

// 7. Territory reduction on a 300-customer, 10-day monthly instance.
Outcome monthly_shape() {
  MonthlyProfile p;
  p.customers = 300;
  p.days = 10;
  const auto inst = make_monthly_instance(p, 1);
  SolverParams params;
  params.ct_max_seconds = 60;
  const auto t0 = std::chrono::steady_clock::now();
  const auto out = solve(inst, params);
  const double secs = seconds_since(t0);
  const int nv = static_cast<int>(out.solution.territories.size());
  const double reduction = 1.0 - double(nv) / out.stats.initial_territories;
  double worst_cr = 0.0;
  for (const auto& t : out.solution.territories) {
    worst_cr = std::max(worst_cr, compactness_ratio(t.members, inst.geometry, inst.mode));
  }
  const bool clean = validate(inst, out.solution).ok();
  return {reduction >= 0.30 && worst_cr <= 10.0 && clean,
          fmt("%d -> %d territories (%.1f%% fewer), max CR %.3f, %s, %.1f s",
              out.stats.initial_territories, nv, 100 * reduction, worst_cr,
              clean ? "validator-clean" : "INVALID", secs)};
}

// 8. Next-month rule on generated month pairs.
Outcome next_month_pairs() {
  MonthlyProfile p;
  p.customers = 300;
  p.days = 10;
  p.new_customer_rate = 0.10;
  int zero = 0;
  bool consistent = true;
  std::string tics;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto pair = make_month_pair(p, seed);
    SolverParams params;
    params.ct_max_seconds = 20;
    params.rng_seed = seed;
    const auto first = solve(pair.first, params).solution;
    const auto r = next_month(first, pair.first, pair.second, pair.shared);
    if (r.tic == 0) ++zero;
    tics += (tics.empty() ? "" : ",") + std::to_string(r.tic);
    double iac = 0.0, late = 0.0;
    int n = 0;
    for (const auto& row : r.rows) {
      if (!row.new_customer) continue;
      iac += row.demand;
      late += row.lateness;
      ++n;
    }
    const double iatw = n ? late / n / 60.0 : 0.0;
    consistent = consistent && std::abs(iac - r.iac) <= 1e-6 * std::max(1.0, iac) &&
                 std::abs(iatw - r.iatw) <= 1e-9;
  }
  return {zero >= 7 && consistent, fmt("TIC = 0 in %d/10 pairs (TIC %s), recompute %s", zero,
                                       tics.c_str(), consistent ? "consistent" : "INCONSISTENT")};
}

// 9. 2-opt reaches the optimum from every order; relocate keeps territories sound.
Outcome local_search_sound(const Corpus& c) {
  auto line = testing::custom_instance({{0, 0}, {10, 0}, {20, 0}, {30, 0}, {40, 0}}, 1, 100, 1000);
  for (int i = 1; i <= 4; ++i) line.demand[i][0] = 1;
  std::vector<int> perm{1, 2, 3, 4};
  double optimum = 1e300;
  do {
    optimum = std::min(optimum, evaluate_route(perm, 0, line).travel);
  } while (std::next_permutation(perm.begin(), perm.end()));
  int reached = 0;
  perm = {1, 2, 3, 4};
  do {
    const auto out = two_opt(perm, 0, line, RouteObjective::travel_time);
    if (std::abs(evaluate_route(out, 0, line).travel - optimum) < 1e-9) ++reached;
  } while (std::next_permutation(perm.begin(), perm.end()));

  int broken = 0, checked = 0;
  for (const auto& e : c.entries) {
    if (e.source != "solve") continue;
    for (auto objective : {RelocateObjective::compactness, RelocateObjective::penalty}) {
      auto plan = plan_from_solution(e.solution, e.instance);
      RelocateOptions opt;
      opt.objective = objective;
      relocate(plan, e.instance, opt);
      ++checked;
      if (!territories_sound(plan, e.instance)) ++broken;
    }
  }
  return {reached == 24 && broken == 0,
          fmt("2-opt optimal from %d/24 orders; relocate broke %d of %d plans", reached, broken,
              checked)};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&failures](int id, const std::function<Outcome()>& check) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << o.detail
              << fmt(" [%.1f s]", seconds_since(t0)) << std::endl;
  };
  report(1, heuristic_matches_oracle);
  report(2, milp_matches_oracle);
  report(3, small_instances_fast);
  report(4, compactness_constants);
  Corpus corpus;
  report(5, [&] {
    corpus = build_corpus();
    return corpus_feasible(corpus);
  });
  report(6, [&] { return corpus_invariants(corpus); });
  report(7, monthly_shape);
  report(8, next_month_pairs);
  report(9, [&] { return local_search_sound(corpus); });
  return failures == 0 ? 0 : 1;
}
