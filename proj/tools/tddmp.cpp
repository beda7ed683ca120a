#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <string>
#include <thread>

#include "tddmp/exact.hpp"
#include "tddmp/generators.hpp"
#include "tddmp/milp.hpp"
#include "tddmp/model.hpp"
#include "tddmp/ops.hpp"
#include "tddmp/solver.hpp"

namespace fs = std::filesystem;
using namespace tddmp;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_input = 2;
constexpr int exit_infeasible = 3;
constexpr int exit_timeout = 4;

// "90", "90s", "1.5m" or "2h" in seconds.
double parse_duration(const std::string& text) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad duration '" + text + "'");
  }
  const std::string unit = text.substr(used);
  if (unit.empty() || unit == "s") return value;
  if (unit == "m") return value * 60.0;
  if (unit == "h") return value * 3600.0;
  throw std::invalid_argument("bad duration unit in '" + text + "'");
}

struct SolverFlags {
  std::string params_file;
  std::optional<std::uint64_t> seed;
  std::string ct_max;
  std::optional<int> eta;
  std::optional<int> p_max;
  std::optional<int> k_max;
  std::optional<double> f;
  std::string mode;
  std::optional<long> max_eliminations;
  bool audit{false};
  bool no_reoptimize{false};

  void attach(CLI::App* app) {
    app->add_option("--params", params_file, "JSON parameter file");
    app->add_option("--seed", seed, "RNG seed");
    app->add_option("--ct-max", ct_max, "time budget, e.g. 60s or 2m");
    app->add_option("--eta", eta, "backtracking stack capacity");
    app->add_option("--pmax", p_max, "ejection penalty ceiling");
    app->add_option("--kmax", k_max, "ejections per merge");
    app->add_option("--F", f, "compactness bound");
    app->add_option("--compactness-mode", mode, "sqrt_of_sum or sum_of_sqrts");
    app->add_option("--max-eliminations", max_eliminations, "elimination attempt budget");
    app->add_flag("--audit", audit, "check invariants after every step");
    app->add_flag("--no-reoptimize", no_reoptimize, "skip the final local search");
  }

  SolverParams resolve() const {
    SolverParams p = params_file.empty() ? SolverParams{} : params_from_json(read_json_file(params_file));
    if (seed) p.rng_seed = *seed;
    if (!ct_max.empty()) p.ct_max_seconds = parse_duration(ct_max);
    if (eta) p.eta = *eta;
    if (p_max) p.p_max = *p_max;
    if (k_max) p.k_max = *k_max;
    if (f) p.compactness_bound = *f;
    if (!mode.empty()) p.mode = compactness_mode_from_string(mode);
    if (max_eliminations) p.max_eliminations = *max_eliminations;
    if (audit) p.audit = true;
    if (no_reoptimize) p.reoptimize = false;
    p.check();
    return p;
  }
};

std::string stem_of(const std::string& path) {
  std::string stem = fs::path(path).filename().string();
  for (const char* suffix : {".solution.json", ".json"}) {
    const std::string s = suffix;
    if (stem.size() > s.size() && stem.compare(stem.size() - s.size(), s.size(), s) == 0) {
      return stem.substr(0, stem.size() - s.size());
    }
  }
  return fs::path(path).stem().string();
}

void ensure_dir(const std::string& dir) {
  if (!dir.empty()) fs::create_directories(dir);
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void print_report(const ValidationReport& report) {
  for (const auto& v : report.violations) {
    std::cout << to_string(v.family) << ": " << v.message << '\n';
  }
  std::cout << (report.ok() ? "valid" : "invalid") << " (" << report.violations.size()
            << " violations)\n";
}

void print_cost(const Solution& solution, const Instance& inst) {
  const auto cost = solution_cost(solution, inst);
  std::printf("NV %d  TT %.4f h  ACR %s\n", cost.territories, cost.travel_hours,
              cost.average_ratio ? std::to_string(*cost.average_ratio).c_str() : "-");
}

// --- subcommands -----------------------------------------------------------

struct GenerateFlags {
  std::string out;
  std::string solomon;
  std::string profile;
  std::string out_dir{"."};
  std::uint64_t seed{1};
  std::optional<int> customers;
  std::optional<int> days;
  std::optional<double> frequency;
  std::optional<double> capacity_factor;
  std::optional<double> f;
  std::string mode;
};

MonthlyProfile load_profile(const GenerateFlags& g) {
  MonthlyProfile p = g.profile.empty() ? MonthlyProfile{} : profile_from_json(read_json_file(g.profile));
  if (g.customers) p.customers = *g.customers;
  if (g.days) p.days = *g.days;
  if (g.f) p.compactness_bound = *g.f;
  if (!g.mode.empty()) p.mode = compactness_mode_from_string(g.mode);
  return p;
}

int run_generate(const std::string& kind, const GenerateFlags& g) {
  if (kind == "pair") {
    const auto pair = make_month_pair(load_profile(g), g.seed);
    ensure_dir(g.out_dir);
    write_instance(pair.first, join(g.out_dir, "month1.json"));
    write_instance(pair.second, join(g.out_dir, "month2.json"));
    write_text_atomic(join(g.out_dir, "shared.json"), shared_map_to_json(pair.shared).dump(2) + "\n");
    std::cout << "month1 " << pair.first.customer_count() << " customers, month2 "
              << pair.second.customer_count() << " customers, " << pair.shared.size()
              << " shared\n";
    return exit_ok;
  }
  if (g.out.empty()) throw std::invalid_argument("--out is required");
  Instance inst;
  if (kind == "small") {
    if (g.solomon.empty()) throw std::invalid_argument("--solomon is required");
    GeneratorParams p;
    p.rng_seed = g.seed;
    if (g.customers) p.customer_count = *g.customers;
    if (g.days) p.horizon_days = *g.days;
    if (g.frequency) p.service_frequency = *g.frequency;
    if (g.capacity_factor) p.capacity_factor = *g.capacity_factor;
    if (g.f) p.compactness_bound = *g.f;
    if (!g.mode.empty()) p.mode = compactness_mode_from_string(g.mode);
    inst = make_small_instance(read_solomon(g.solomon), p);
  } else if (kind == "random") {
    RandomInstanceParams p;
    p.rng_seed = g.seed;
    if (g.customers) p.customer_count = *g.customers;
    if (g.days) p.horizon_days = *g.days;
    if (g.frequency) p.service_frequency = *g.frequency;
    if (g.f) p.compactness_bound = *g.f;
    if (!g.mode.empty()) p.mode = compactness_mode_from_string(g.mode);
    inst = make_random_instance(p);
  } else {
    inst = make_monthly_instance(load_profile(g), g.seed);
  }
  write_instance(inst, g.out);
  std::cout << inst.name << ": " << inst.customer_count() << " customers, " << inst.day_count
            << " days\n";
  return exit_ok;
}

int run_solve(const std::string& path, const SolverFlags& flags, const std::string& out_dir) {
  const Instance original = read_instance(path);
  const auto params = flags.resolve();
  const Instance inst = with_overrides(original, params);
  const auto result = solve(inst, params);
  const auto report = validate(inst, result.solution);
  ensure_dir(out_dir);
  const std::string stem = stem_of(path);
  write_solution(result.solution, join(out_dir, stem + ".solution.json"));
  std::string trace;
  for (const auto& event : result.trace) trace += event.dump() + '\n';
  write_text_atomic(join(out_dir, stem + ".trace.jsonl"), trace);
  const auto& s = result.stats;
  nlohmann::json stats{{"initial", s.initial_territories},
                       {"final", s.final_territories},
                       {"eliminations", s.eliminations},
                       {"successes", s.successes},
                       {"stage1", s.merges.stage1},
                       {"stage2", s.merges.stage2},
                       {"stage3", s.merges.stage3},
                       {"max_rollback", s.max_rollback},
                       {"max_stack", s.max_stack},
                       {"timed_out", s.timed_out},
                       {"seconds", s.seconds},
                       {"valid", report.ok()},
                       {"params", to_json(params)}};
  write_text_atomic(join(out_dir, stem + ".stats.json"), stats.dump(2) + "\n");
  std::printf("%s: %d -> %d territories in %.3f s%s\n", inst.name.c_str(), s.initial_territories,
              s.final_territories, s.seconds, s.timed_out ? " (time budget reached)" : "");
  print_cost(result.solution, inst);
  if (!report.ok()) {
    print_report(report);
    return exit_infeasible;
  }
  return exit_ok;
}

int run_validate(const std::string& inst_path, const std::string& sol_path, bool no_design,
                 std::optional<double> f, const std::string& mode) {
  Instance inst = read_instance(inst_path);
  if (f) inst.compactness_bound = *f;
  if (!mode.empty()) inst.mode = compactness_mode_from_string(mode);
  const Solution solution = read_solution(sol_path);
  ValidateOptions options;
  options.check_design = !no_design;
  const auto report = validate(inst, solution, options);
  print_cost(solution, inst);
  print_report(report);
  return report.ok() ? exit_ok : exit_infeasible;
}

MilpOptions milp_options(bool symmetry, bool literal) {
  MilpOptions o;
  o.symmetry_breaking = symmetry;
  o.literal_depot_flow = literal;
  return o;
}

int run_export_milp(const std::string& path, const std::string& out, const std::string& registry,
                    bool symmetry, bool literal) {
  const auto artifacts = emit_milp(read_instance(path), milp_options(symmetry, literal));
  write_text_atomic(out, artifacts.lp);
  if (!registry.empty()) write_text_atomic(registry, artifacts.registry.dump(2) + "\n");
  std::cout << artifacts.model.vars.size() << " variables, " << artifacts.model.rows.size()
            << " rows\n";
  return exit_ok;
}

int run_check_milp(const std::string& path, const std::string& values_path,
                   const std::string& out, bool symmetry, bool literal) {
  const Instance inst = read_instance(path);
  const auto model = build_milp(inst, milp_options(symmetry, literal));
  std::ifstream in(values_path);
  if (!in) throw std::invalid_argument("cannot read " + values_path);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto values = dense_values(model, parse_milp_values(text));
  const auto violations = check_assignment(model, values);
  for (const auto& v : violations) {
    std::cout << "row " << v.row << ": lhs " << v.lhs << " rhs " << v.rhs << '\n';
  }
  const Solution solution = decode_solution(model, values, inst);
  if (!out.empty()) write_solution(solution, out);
  const auto report = validate(inst, solution);
  std::cout << "objective " << objective_value(model, values) << ", " << violations.size()
            << " row violations\n";
  print_cost(solution, inst);
  print_report(report);
  if (inst.customer_count() <= exact_max_customers && inst.day_count <= exact_max_days &&
      report.ok()) {
    const auto cmp = verify_against_oracle(solution, inst);
    std::cout << "oracle optimum " << cmp.optimum << ": " << to_string(cmp.verdict) << '\n';
  }
  return violations.empty() && report.ok() ? exit_ok : exit_infeasible;
}

int run_exact(const std::string& path, const std::string& out, long node_cap) {
  const Instance inst = read_instance(path);
  ExactLimits limits;
  limits.node_cap = node_cap;
  const auto result = exact_solve(inst, limits);
  std::cout << to_string(result.status);
  if (result.status == ExactStatus::optimal) std::cout << " " << result.optimum;
  std::cout << '\n';
  if (result.solution && !out.empty()) write_solution(*result.solution, out);
  if (result.status == ExactStatus::infeasible) return exit_infeasible;
  return result.status == ExactStatus::optimal ? exit_ok : exit_timeout;
}

struct BenchFlags {
  std::string instances;
  std::string solomon;
  std::string profile;
  int count{10};
  int repetitions{1};
  int workers{static_cast<int>(std::max(1u, std::thread::hardware_concurrency()))};
  std::string baseline;
  std::string out_dir{"."};
  bool save_solutions{false};
};

int run_bench_cmd(const BenchFlags& b, const SolverFlags& flags) {
  BenchOptions options;
  options.params = flags.resolve();
  options.repetitions = b.repetitions;
  options.workers = b.workers;
  ensure_dir(b.out_dir);
  if (b.save_solutions) options.out_dir = b.out_dir;
  const int sources = !b.instances.empty() + !b.solomon.empty() + !b.profile.empty();
  if (sources != 1) throw std::invalid_argument("give exactly one of --instances, --solomon, --profile");

  std::vector<BenchJob> jobs;
  if (!b.instances.empty()) {
    const auto paths = expand_glob(b.instances);
    if (paths.empty()) throw std::invalid_argument("no instance matches " + b.instances);
    for (const auto& path : paths) {
      BenchJob job;
      job.label = stem_of(path);
      job.load = [path] { return read_instance(path); };
      if (!b.baseline.empty()) {
        const auto base = join(b.baseline, job.label + ".solution.json");
        if (fs::exists(base)) job.baseline = read_solution(base);
      }
      jobs.push_back(std::move(job));
    }
  } else if (!b.solomon.empty()) {
    const auto paths = expand_glob(b.solomon);
    if (paths.empty()) throw std::invalid_argument("no Solomon file matches " + b.solomon);
    for (const auto& path : paths) {
      const auto file = read_solomon(path);
      for (int s = 1; s <= b.count; ++s) {
        GeneratorParams p;
        p.rng_seed = static_cast<std::uint64_t>(s);
        const Instance inst = make_small_instance(file, p);
        jobs.push_back({inst.name, [inst] { return inst; }, std::nullopt});
      }
    }
  } else {
    const auto profile = profile_from_json(read_json_file(b.profile));
    for (int s = 1; s <= b.count; ++s) {
      jobs.push_back({"monthly-s" + std::to_string(s),
                      [profile, s] { return make_monthly_instance(profile, static_cast<std::uint64_t>(s)); },
                      std::nullopt});
    }
  }

  const auto report = run_bench(jobs, options);
  write_text_atomic(join(b.out_dir, "bench.json"), to_json(report).dump(2) + "\n");
  write_text_atomic(join(b.out_dir, "bench.csv"), to_csv(report));
  std::printf("%-10s %6s %8s %10s %8s %8s %9s\n", "group", "count", "ANV", "ATT(h)", "ACR", "ACPU",
              "dTT(%)");
  bool all_valid = true;
  for (const auto& a : report.aggregates) {
    std::printf("%-10s %6d %8.2f %10.3f %8s %8.3f %9s\n", a.group.c_str(), a.count, a.anv, a.att,
                a.acr ? std::to_string(*a.acr).substr(0, 6).c_str() : "-", a.acpu,
                a.delta_tt ? std::to_string(*a.delta_tt).substr(0, 6).c_str() : "-");
    if (a.group == "all") all_valid = a.invalid == 0;
  }
  return all_valid ? exit_ok : exit_infeasible;
}

int run_next_month(const std::string& month1, const std::string& solution, const std::string& month2,
                   const std::string& shared, const std::string& out_dir) {
  const Instance first = read_instance(month1);
  const Instance second = read_instance(month2);
  const auto map = shared_map_from_json(read_json_file(shared));
  const auto report = next_month(read_solution(solution), first, second, map);
  ensure_dir(out_dir);
  write_text_atomic(join(out_dir, "next_month.json"), to_json(report).dump(2) + "\n");
  write_text_atomic(join(out_dir, "next_month.csv"), rows_to_csv(report.rows));
  write_solution(report.plan, join(out_dir, "month2.solution.json"));
  ValidateOptions options;
  options.check_design = false;
  options.unserved = report.unserved;
  const auto check = validate(second, report.plan, options);
  std::printf("new customers %d  TIC %d  TID %d  IAC %.1f kg  IATW %.3f h  old infeasible %d\n",
              report.new_customers, report.tic, report.tid, report.iac, report.iatw,
              report.old_infeasible);
  if (!check.ok()) {
    print_report(check);
    return exit_infeasible;
  }
  return exit_ok;
}

int run_render(const std::string& inst_path, const std::string& sol_path, const std::string& geojson,
               const std::string& svg) {
  const Instance inst = read_instance(inst_path);
  const Solution solution = read_solution(sol_path);
  check_matches(solution, inst);
  if (geojson.empty() && svg.empty()) throw std::invalid_argument("give --geojson or --svg");
  if (!geojson.empty()) {
    write_text_atomic(geojson, territories_to_geojson(solution, inst).dump(2) + "\n");
  }
  if (!svg.empty()) write_text_atomic(svg, render_svg(solution, inst));
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Territory design with multi-period vehicle routing"};
  app.require_subcommand(1);
  int code = exit_ok;

  // generate
  auto* gen = app.add_subcommand("generate", "write a generated instance");
  gen->require_subcommand(1);
  GenerateFlags g;
  for (const char* kind : {"small", "random", "monthly", "pair"}) {
    auto* sub = gen->add_subcommand(kind);
    sub->add_option("--seed", g.seed, "generator seed");
    sub->add_option("--customers", g.customers, "customer count");
    sub->add_option("--days", g.days, "horizon in days");
    sub->add_option("--F", g.f, "compactness bound");
    sub->add_option("--compactness-mode", g.mode, "sqrt_of_sum or sum_of_sqrts");
    const std::string k = kind;
    if (k == "pair") {
      sub->add_option("--out-dir", g.out_dir, "directory for month1/month2/shared");
    } else {
      sub->add_option("-o,--out", g.out, "instance file")->required();
    }
    if (k == "small") {
      sub->add_option("--solomon", g.solomon, "Solomon file")->required();
      sub->add_option("--capacity-factor", g.capacity_factor, "capacity multiplier");
    }
    if (k == "small" || k == "random") sub->add_option("--frequency", g.frequency, "service frequency");
    if (k == "monthly" || k == "pair") sub->add_option("--profile", g.profile, "profile JSON");
    sub->callback([&code, &g, k] { code = run_generate(k, g); });
  }

  // solve
  auto* solve_cmd = app.add_subcommand("solve", "design territories for an instance");
  std::string inst_path;
  std::string out_dir{"."};
  SolverFlags solver_flags;
  solve_cmd->add_option("instance", inst_path, "instance file")->required();
  solve_cmd->add_option("--out-dir", out_dir, "output directory");
  solver_flags.attach(solve_cmd);
  solve_cmd->callback([&] { code = run_solve(inst_path, solver_flags, out_dir); });

  // validate
  auto* val = app.add_subcommand("validate", "check a solution against its instance");
  std::string sol_path;
  bool no_design = false;
  std::optional<double> val_f;
  std::string val_mode;
  val->add_option("instance", inst_path)->required();
  val->add_option("solution", sol_path)->required();
  val->add_flag("--no-design", no_design, "skip contiguity and compactness");
  val->add_option("--F", val_f, "compactness bound");
  val->add_option("--compactness-mode", val_mode, "sqrt_of_sum or sum_of_sqrts");
  val->callback([&] { code = run_validate(inst_path, sol_path, no_design, val_f, val_mode); });

  // export-milp / check-milp
  std::string lp_out;
  std::string registry_out;
  bool symmetry = false;
  bool literal = false;
  auto* exp = app.add_subcommand("export-milp", "write the MILP in LP format");
  exp->add_option("instance", inst_path)->required();
  exp->add_option("-o,--out", lp_out, "LP file")->required();
  exp->add_option("--registry", registry_out, "row/variable count registry JSON");
  exp->add_flag("--symmetry-breaking", symmetry);
  exp->add_flag("--literal-depot-flow", literal);
  exp->callback([&] { code = run_export_milp(inst_path, lp_out, registry_out, symmetry, literal); });

  auto* chk = app.add_subcommand("check-milp", "decode and validate an external MILP solution");
  std::string values_path;
  std::string decoded_out;
  chk->add_option("instance", inst_path)->required();
  chk->add_option("values", values_path, "name value lines")->required();
  chk->add_option("-o,--out", decoded_out, "decoded solution file");
  chk->add_flag("--symmetry-breaking", symmetry);
  chk->add_flag("--literal-depot-flow", literal);
  chk->callback([&] { code = run_check_milp(inst_path, values_path, decoded_out, symmetry, literal); });

  // exact
  auto* ex = app.add_subcommand("exact", "solve a tiny instance to optimality");
  std::string exact_out;
  long node_cap = ExactLimits{}.node_cap;
  ex->add_option("instance", inst_path)->required();
  ex->add_option("-o,--out", exact_out, "solution file");
  ex->add_option("--node-cap", node_cap, "search node limit");
  ex->callback([&] { code = run_exact(inst_path, exact_out, node_cap); });

  // bench
  auto* bench = app.add_subcommand("bench", "solve a batch and aggregate");
  BenchFlags b;
  SolverFlags bench_flags;
  bench->add_option("--instances", b.instances, "glob of instance files");
  bench->add_option("--solomon", b.solomon, "glob of Solomon files (small instances)");
  bench->add_option("--profile", b.profile, "monthly profile JSON");
  bench->add_option("--count", b.count, "generated instances per source");
  bench->add_option("--repetitions", b.repetitions, "runs per instance");
  bench->add_option("--workers", b.workers, "parallel workers");
  bench->add_option("--baseline", b.baseline, "directory of baseline solutions");
  bench->add_option("--out-dir", b.out_dir, "output directory");
  bench->add_flag("--save-solutions", b.save_solutions, "write every solution");
  bench_flags.attach(bench);
  bench->callback([&] { code = run_bench_cmd(b, bench_flags); });

  // next-month
  auto* nm = app.add_subcommand("next-month", "apply a plan to the following month");
  std::string month1;
  std::string month2;
  std::string shared;
  std::string nm_out{"."};
  nm->add_option("--month1", month1, "first-month instance")->required();
  nm->add_option("--solution", sol_path, "first-month solution")->required();
  nm->add_option("--month2", month2, "second-month instance")->required();
  nm->add_option("--shared", shared, "shared customer map")->required();
  nm->add_option("--out-dir", nm_out, "output directory");
  nm->callback([&] { code = run_next_month(month1, sol_path, month2, shared, nm_out); });

  // render
  auto* render = app.add_subcommand("render", "draw territories");
  std::string geojson_out;
  std::string svg_out;
  render->add_option("instance", inst_path)->required();
  render->add_option("solution", sol_path)->required();
  render->add_option("--geojson", geojson_out, "GeoJSON file");
  render->add_option("--svg", svg_out, "SVG file");
  render->callback([&] { code = run_render(inst_path, sol_path, geojson_out, svg_out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? exit_ok : exit_input;
  } catch (const IntrinsicInfeasibility& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return exit_infeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_input;
  }
  return code;
}
