#include "tddmp/milp.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "tddmp/routing.hpp"

namespace tddmp {

namespace {

constexpr double unbounded = std::numeric_limits<double>::infinity();

std::string name_of(const char* group, std::initializer_list<int> idx) {
  std::string s = group;
  for (int i : idx) {
    s += '_';
    s += std::to_string(i);
  }
  return s;
}

std::string number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

class Builder {
 public:
  Builder(MilpModel& m) : m_(m) {}

  int var(const char* group, std::initializer_list<int> idx, VarKind kind,
          double lo = 0.0, double hi = 1.0) {
    return m_.add_var({name_of(group, idx), group, kind, lo, hi});
  }
  int at(const char* group, std::initializer_list<int> idx) const {
    return m_.var(name_of(group, idx));
  }
  void row(std::string name, const char* family, std::vector<MilpTerm> terms,
           RowSense sense, double rhs) {
    m_.rows.push_back({std::move(name), family, std::move(terms), sense, rhs});
  }

 private:
  MilpModel& m_;
};

}  // namespace

int MilpModel::var(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no variable " + name);
  return it->second;
}

int MilpModel::add_var(MilpVar v) {
  const int id = static_cast<int>(vars.size());
  if (!index_.emplace(v.name, id).second) {
    throw std::invalid_argument("duplicate variable " + v.name);
  }
  vars.push_back(std::move(v));
  return id;
}

std::map<std::string, std::size_t> MilpModel::row_counts() const {
  std::map<std::string, std::size_t> out;
  for (const auto& r : rows) ++out[r.family];
  return out;
}

std::map<std::string, std::size_t> MilpModel::var_counts() const {
  std::map<std::string, std::size_t> out;
  for (const auto& v : vars) ++out[v.group];
  return out;
}

MilpModel build_milp(const Instance& inst, const MilpOptions& options) {
  if (inst.mode != CompactnessMode::sum_of_sqrts) {
    throw std::invalid_argument(
        "the MILP needs sum_of_sqrts compactness: the square root of a summed area "
        "is not linear in the assignment variables");
  }
  const int n = inst.customer_count();
  const int K = n;
  const int D = inst.day_count;
  const auto& geo = inst.geometry;
  MilpModel m;
  m.vehicles = K;
  m.options = options;
  double max_g = 0.0, max_t = 0.0;
  for (int i = 0; i <= n; ++i) {
    max_g = std::max(max_g, inst.service[i]);
    for (int j = 0; j <= n; ++j) max_t = std::max(max_t, inst.t(i, j));
  }
  m.big_m = inst.workday + max_g + max_t;
  if (options.big_m) {
    if (*options.big_m < m.big_m) {
      throw std::invalid_argument("big-M below h + max g + max t is not valid");
    }
    m.big_m = *options.big_m;
  }
  const double T = m.big_m;
  Builder b(m);

  auto neighbours = [&](int i) {
    std::vector<int> out;
    for (const auto& nb : geo.neighbors(i)) {
      if (nb.unit >= 1 && nb.unit <= n) out.push_back(nb.unit);
    }
    return out;
  };
  auto o = [&](int i, int d) { return inst.active(i, d) ? 1.0 : 0.0; };

  // Variables.
  for (int d = 0; d < D; ++d)
    for (int k = 1; k <= K; ++k)
      for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j)
          if (i != j) b.var("x", {i, j, k, d}, VarKind::binary);
  for (int d = 0; d < D; ++d)
    for (int k = 1; k <= K; ++k)
      for (int i = 1; i <= n; ++i) b.var("y", {i, k, d}, VarKind::binary);
  for (int k = 1; k <= K; ++k) b.var("z", {k}, VarKind::binary);
  for (int k = 1; k <= K; ++k)
    for (int i = 1; i <= n; ++i) b.var("zh", {i, k}, VarKind::binary);
  for (int k = 1; k <= K; ++k)
    for (int i = 1; i <= n; ++i)
      for (int j = 1; j <= n; ++j)
        if (i != j) b.var("zb", {i, j, k}, VarKind::binary);
  for (int k = 1; k <= K; ++k)
    for (int i = 1; i <= n; ++i) b.var("w", {i, k}, VarKind::binary);
  for (int d = 0; d < D; ++d)
    for (int i = 0; i <= n; ++i)
      b.var("s", {i, d}, VarKind::continuous, 0.0, i == 0 ? 0.0 : unbounded);
  for (int d = 0; d < D; ++d)
    for (int j = 1; j <= n; ++j) b.var("e", {j, d}, VarKind::continuous, 0.0, unbounded);
  for (int k = 1; k <= K; ++k)
    for (int i = 1; i <= n; ++i)
      for (int j : neighbours(i)) b.var("u", {i, j, k}, VarKind::continuous, 0.0, unbounded);

  for (int k = 1; k <= K; ++k) m.objective.push_back({b.at("z", {k}), 1.0});

  // Every customer served on its active days.
  for (int d = 0; d < D; ++d)
    for (int i = 1; i <= n; ++i) {
      std::vector<MilpTerm> t;
      for (int k = 1; k <= K; ++k) t.push_back({b.at("y", {i, k, d}), 1.0});
      b.row(name_of("c2", {i, d}), "2", std::move(t), RowSense::eq, o(i, d));
    }
  // Capacity.
  for (int d = 0; d < D; ++d)
    for (int k = 1; k <= K; ++k) {
      std::vector<MilpTerm> t;
      for (int i = 1; i <= n; ++i) t.push_back({b.at("y", {i, k, d}), inst.q(i, d)});
      b.row(name_of("c3", {k, d}), "3", std::move(t), RowSense::le, inst.capacity);
    }
  // Vehicle use and territory membership.
  for (int k = 1; k <= K; ++k)
    for (int i = 1; i <= n; ++i)
      b.row(name_of("c4", {i, k}), "4", {{b.at("z", {k}), 1.0}, {b.at("zh", {i, k}), -1.0}},
            RowSense::ge, 0.0);
  for (int d = 0; d < D; ++d)
    for (int k = 1; k <= K; ++k)
      for (int i = 1; i <= n; ++i)
        b.row(name_of("c5", {i, k, d}), "5",
              {{b.at("zh", {i, k}), 1.0}, {b.at("y", {i, k, d}), -1.0}}, RowSense::ge, 0.0);
  for (int i = 1; i <= n; ++i) {
    if (inst.active_days(i) == 0) {
      // Never active: membership cannot follow from the daily assignment.
      std::vector<MilpTerm> t;
      for (int k = 1; k <= K; ++k) t.push_back({b.at("zh", {i, k}), 1.0});
      b.row(name_of("c6", {i}), "6", std::move(t), RowSense::eq, 1.0);
      continue;
    }
    for (int k = 1; k <= K; ++k) {
      std::vector<MilpTerm> t{{b.at("zh", {i, k}), 1.0}};
      for (int d = 0; d < D; ++d) t.push_back({b.at("y", {i, k, d}), -1.0});
      b.row(name_of("c6", {i, k}), "6", std::move(t), RowSense::le, 0.0);
    }
  }
  for (int k = 1; k <= K; ++k)
    for (int i = 1; i <= n; ++i)
      for (int j = 1; j <= n; ++j) {
        if (i == j) continue;
        const int zb = b.at("zb", {i, j, k});
        b.row(name_of("c7", {i, j, k}), "7", {{zb, 1.0}, {b.at("zh", {i, k}), -1.0}},
              RowSense::le, 0.0);
        b.row(name_of("c8", {i, j, k}), "8", {{zb, 1.0}, {b.at("zh", {j, k}), -1.0}},
              RowSense::le, 0.0);
        b.row(name_of("c9", {i, j, k}), "9",
              {{b.at("zh", {i, k}), 1.0}, {b.at("zh", {j, k}), 1.0}, {zb, -1.0}}, RowSense::le,
              1.0);
      }
  // Compactness: perimeter <= F * sum of sqrt areas.
  for (int k = 1; k <= K; ++k) {
    std::vector<MilpTerm> t;
    for (int i = 1; i <= n; ++i) {
      const auto& u = geo.unit(i);
      t.push_back({b.at("zh", {i, k}), u.perimeter - inst.compactness_bound * u.sqrt_area});
    }
    for (int i = 1; i <= n; ++i)
      for (const auto& nb : geo.neighbors(i)) {
        if (nb.unit < 1 || nb.unit > n) continue;
        t.push_back({b.at("zb", {i, nb.unit, k}), -nb.shared_length});
      }
    b.row(name_of("c10", {k}), "10", std::move(t), RowSense::le, 0.0);
  }
  // Contiguity by single-commodity flow into one sink per territory.
  for (int k = 1; k <= K; ++k) {
    for (int i = 1; i <= n; ++i) {
      std::vector<MilpTerm> t;
      for (int j : neighbours(i)) {
        t.push_back({b.at("u", {i, j, k}), 1.0});
        t.push_back({b.at("u", {j, i, k}), -1.0});
      }
      t.push_back({b.at("zh", {i, k}), -1.0});
      t.push_back({b.at("w", {i, k}), static_cast<double>(n)});
      b.row(name_of("c11", {i, k}), "11", std::move(t), RowSense::ge, 0.0);
    }
    std::vector<MilpTerm> sink;
    for (int i = 1; i <= n; ++i) sink.push_back({b.at("w", {i, k}), 1.0});
    b.row(name_of("c12", {k}), "12", std::move(sink), RowSense::eq, 1.0);
    for (int i = 1; i <= n; ++i) {
      std::vector<MilpTerm> t;
      for (int j : neighbours(i)) t.push_back({b.at("u", {j, i, k}), 1.0});
      t.push_back({b.at("zh", {i, k}), -static_cast<double>(n)});
      b.row(name_of("c13", {i, k}), "13", std::move(t), RowSense::le, 0.0);
    }
  }
  // Degrees and depot flow.
  for (int d = 0; d < D; ++d)
    for (int k = 1; k <= K; ++k) {
      for (int j = 1; j <= n; ++j) {
        std::vector<MilpTerm> in, out;
        for (int i = 0; i <= n; ++i) {
          if (i == j) continue;
          in.push_back({b.at("x", {i, j, k, d}), 1.0});
          out.push_back({b.at("x", {j, i, k, d}), 1.0});
        }
        in.push_back({b.at("y", {j, k, d}), -1.0});
        out.push_back({b.at("y", {j, k, d}), -1.0});
        b.row(name_of("c14in", {j, k, d}), "14", std::move(in), RowSense::eq, 0.0);
        b.row(name_of("c14out", {j, k, d}), "14", std::move(out), RowSense::eq, 0.0);
      }
      std::vector<MilpTerm> leave, back;
      for (int j = 1; j <= n; ++j) {
        leave.push_back({b.at("x", {0, j, k, d}), 1.0});
        back.push_back({b.at("x", {j, 0, k, d}), 1.0});
      }
      const int z = b.at("z", {k});
      if (options.literal_depot_flow) {
        leave.push_back({z, -1.0});
        back.push_back({z, -1.0});
        b.row(name_of("c15out", {k, d}), "15", std::move(leave), RowSense::eq, 0.0);
        b.row(name_of("c15in", {k, d}), "15", std::move(back), RowSense::eq, 0.0);
      } else {
        std::vector<MilpTerm> balance = leave;
        for (const auto& t : back) balance.push_back({t.var, -1.0});
        leave.push_back({z, -1.0});
        b.row(name_of("c15out", {k, d}), "15", std::move(leave), RowSense::le, 0.0);
        b.row(name_of("c15bal", {k, d}), "15", std::move(balance), RowSense::eq, 0.0);
      }
    }
  // Person consistency across every ordered pair of days.
  for (int k = 1; k <= K; ++k)
    for (int i = 1; i <= n; ++i)
      for (int a = 0; a < D; ++a)
        for (int c = 0; c < D; ++c) {
          if (a == c) continue;
          b.row(name_of("c16", {i, k, a, c}), "16",
                {{b.at("y", {i, k, a}), 1.0}, {b.at("y", {i, k, c}), -1.0}}, RowSense::ge,
                o(i, a) + o(i, c) - 2.0);
        }
  // Start times along used arcs (big-M), return and windows.
  for (int d = 0; d < D; ++d)
    for (int k = 1; k <= K; ++k)
      for (int i = 0; i <= n; ++i)
        for (int j = 1; j <= n; ++j) {
          if (i == j) continue;
          const int x = b.at("x", {i, j, k, d});
          const int si = b.at("s", {i, d});
          const int sj = b.at("s", {j, d});
          const double lag = inst.service[i] + inst.t(i, j);
          b.row(name_of("c17", {i, j, k, d}), "17", {{si, 1.0}, {sj, -1.0}, {x, lag + T}},
                RowSense::le, T);
          b.row(name_of("c18", {i, j, k, d}), "18",
                {{si, 1.0}, {sj, -1.0}, {b.at("e", {j, d}), 1.0}, {x, lag - T}}, RowSense::ge,
                -T);
        }
  for (int d = 0; d < D; ++d)
    for (int i = 1; i <= n; ++i)
      b.row(name_of("c19", {i, d}), "19", {{b.at("s", {i, d}), 1.0}}, RowSense::le,
            o(i, d) * (inst.workday - inst.service[i] - inst.t(i, 0)));
  for (int d = 0; d < D; ++d)
    for (int i = 1; i <= n; ++i) {
      const int s = b.at("s", {i, d});
      b.row(name_of("c20lo", {i, d}), "20", {{s, 1.0}}, RowSense::ge,
            inst.windows[i].open * o(i, d));
      b.row(name_of("c20hi", {i, d}), "20", {{s, 1.0}}, RowSense::le,
            inst.windows[i].close * o(i, d));
    }
  if (options.symmetry_breaking) {
    for (int k = 1; k < K; ++k)
      b.row(name_of("sym", {k}), "sym", {{b.at("z", {k}), 1.0}, {b.at("z", {k + 1}), -1.0}},
            RowSense::ge, 0.0);
  }
  return m;
}

namespace {

void write_terms(std::ostringstream& out, const MilpModel& m, const std::vector<MilpTerm>& terms,
                 std::size_t indent) {
  std::size_t col = indent;
  bool first = true;
  if (terms.empty()) {
    out << "0 " << m.vars.front().name;
    return;
  }
  for (const auto& t : terms) {
    std::string piece;
    const double a = std::abs(t.coef);
    if (first) {
      piece = t.coef < 0 ? "- " : "";
    } else {
      piece = t.coef < 0 ? " - " : " + ";
    }
    if (a != 1.0) piece += number(a) + " ";
    piece += m.vars[t.var].name;
    if (col + piece.size() > 78 && !first) {
      out << "\n   ";
      col = 3;
    }
    out << piece;
    col += piece.size();
    first = false;
  }
}

const char* family_note(const std::string& family) {
  static const std::map<std::string, const char*> notes{
      {"2", "each customer served on each active day"},
      {"3", "vehicle capacity per day"},
      {"4", "vehicle used if any customer assigned"},
      {"5", "daily assignment implies territory membership"},
      {"6", "membership implies a daily assignment (set partition for never-active customers)"},
      {"7", "pair indicator below first membership"},
      {"8", "pair indicator below second membership"},
      {"9", "pair indicator forced by both memberships"},
      {"10", "perimeter at most F times the summed square roots of areas"},
      {"11", "net flow out of every non-sink member"},
      {"12", "one sink per territory"},
      {"13", "flow enters members only"},
      {"14", "one predecessor and one successor per served customer"},
      {"15", "depot departures and returns"},
      {"16", "person consistency across days"},
      {"17", "start times increase along used arcs (big-M)"},
      {"18", "start times bounded along used arcs with waiting e (big-M)"},
      {"19", "return to the depot by h"},
      {"20", "time windows"},
      {"sym", "symmetry breaking z_k >= z_k+1"},
  };
  auto it = notes.find(family);
  return it == notes.end() ? "" : it->second;
}

}  // namespace

std::string to_lp(const MilpModel& m) {
  std::ostringstream out;
  out << "\\ TD-DMPVRPTW territory design model, " << m.vehicles << " vehicles\n";
  out << "\\ big-M T = " << number(m.big_m) << "\n";
  for (const auto& [family, count] : m.row_counts()) {
    out << "\\ " << (family == "sym" ? family : "c" + family) << ": " << count << " rows, "
        << family_note(family) << "\n";
  }
  out << "Minimize\n obj: ";
  write_terms(out, m, m.objective, 6);
  out << "\nSubject To\n";
  for (const auto& r : m.rows) {
    out << " " << r.name << ": ";
    write_terms(out, m, r.terms, r.name.size() + 3);
    switch (r.sense) {
      case RowSense::le: out << " <= "; break;
      case RowSense::ge: out << " >= "; break;
      case RowSense::eq: out << " = "; break;
    }
    out << number(r.rhs == 0.0 ? 0.0 : r.rhs) << "\n";
  }
  out << "Bounds\n";
  for (const auto& v : m.vars) {
    if (v.kind != VarKind::continuous) continue;
    if (v.upper == unbounded) {
      if (v.lower != 0.0) out << " " << v.name << " >= " << number(v.lower) << "\n";
    } else {
      out << " " << number(v.lower) << " <= " << v.name << " <= " << number(v.upper) << "\n";
    }
  }
  out << "Binaries\n";
  std::size_t col = 0;
  for (const auto& v : m.vars) {
    if (v.kind != VarKind::binary) continue;
    if (col + v.name.size() + 1 > 78) {
      out << "\n";
      col = 0;
    }
    out << " " << v.name;
    col += v.name.size() + 1;
  }
  out << "\nEnd\n";
  return out.str();
}

nlohmann::json registry_json(const MilpModel& m) {
  nlohmann::json rows = nlohmann::json::object();
  for (const auto& [f, c] : m.row_counts()) rows[f] = c;
  nlohmann::json vars = nlohmann::json::object();
  for (const auto& [g, c] : m.var_counts()) vars[g] = c;
  return {{"vehicles", m.vehicles},
          {"big_m", m.big_m},
          {"rows", rows},
          {"variables", vars},
          {"symmetry_breaking", m.options.symmetry_breaking},
          {"literal_depot_flow", m.options.literal_depot_flow}};
}

MilpArtifacts emit_milp(const Instance& inst, const MilpOptions& options) {
  MilpArtifacts a;
  a.model = build_milp(inst, options);
  a.lp = to_lp(a.model);
  a.registry = registry_json(a.model);
  return a;
}

std::unordered_map<std::string, double> parse_milp_values(const std::string& text) {
  std::unordered_map<std::string, double> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string name, value, extra;
    if (!(ls >> name) || name[0] == '#') continue;
    if (!(ls >> value) || (ls >> extra)) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": expected `name value`");
    }
    double v = 0.0;
    auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": bad number " + value);
    }
    out[name] = v;
  }
  return out;
}

std::vector<double> dense_values(const MilpModel& m,
                                 const std::unordered_map<std::string, double>& values) {
  std::vector<double> out(m.vars.size(), 0.0);
  for (const auto& [name, v] : values) {
    if (m.has_var(name)) out[static_cast<std::size_t>(m.var(name))] = v;
  }
  return out;
}

double objective_value(const MilpModel& m, const std::vector<double>& values) {
  double total = 0.0;
  for (const auto& t : m.objective) total += t.coef * values[t.var];
  return total;
}

Solution decode_solution(const MilpModel& m, const std::vector<double>& values,
                         const Instance& inst) {
  const int n = inst.customer_count();
  auto on = [&](const std::string& name) { return values[m.var(name)] > 0.5; };
  Plan plan(inst);
  int id = 1;
  for (int k = 1; k <= m.vehicles; ++k) {
    if (!on(name_of("z", {k}))) continue;
    WorkTerritory t;
    t.id = id;
    for (int i = 1; i <= n; ++i) {
      if (on(name_of("zh", {i, k}))) t.members.push_back(i);
    }
    if (t.members.empty()) continue;
    t.routes.assign(static_cast<std::size_t>(inst.day_count), {});
    for (int d = 0; d < inst.day_count; ++d) {
      int at = 0;
      for (int step = 0; step <= n; ++step) {
        int next = -1;
        for (int j = 0; j <= n && next < 0; ++j) {
          if (j != at && on(name_of("x", {at, j, k, d}))) next = j;
        }
        if (next <= 0) break;
        t.routes[d].push_back(next);
        at = next;
      }
    }
    t.shape = shape_of(t.members, inst.geometry);
    plan.add_territory(std::move(t));
    ++id;
  }
  return to_solution(plan, inst);
}

std::vector<double> encode_solution(const MilpModel& m, const Solution& solution,
                                    const Instance& inst) {
  const int n = inst.customer_count();
  const auto& geo = inst.geometry;
  std::vector<double> v(m.vars.size(), 0.0);
  auto set = [&](const std::string& name, double value) { v[m.var(name)] = value; };
  if (solution.territory_count() > m.vehicles) {
    throw std::invalid_argument("more territories than vehicles");
  }
  int k = 0;
  for (const auto& t : solution.territories) {
    if (t.members.empty()) continue;
    ++k;
    set(name_of("z", {k}), 1.0);
    for (int i : t.members) {
      set(name_of("zh", {i, k}), 1.0);
      for (int j : t.members) {
        if (i != j) set(name_of("zb", {i, j, k}), 1.0);
      }
    }
    for (const auto& r : t.routes) {
      int prev = 0;
      for (std::size_t p = 0; p < r.visits.size(); ++p) {
        const int j = r.visits[p];
        set(name_of("y", {j, k, r.day}), 1.0);
        set(name_of("x", {prev, j, k, r.day}), 1.0);
        set(name_of("s", {j, r.day}), r.starts[p]);
        set(name_of("e", {j, r.day}), r.waits[p]);
        prev = j;
      }
      if (prev != 0) set(name_of("x", {prev, 0, k, r.day}), 1.0);
    }
    // Sink at the first member; flow along a breadth-first tree.
    const int sink = t.members.front();
    set(name_of("w", {sink, k}), 1.0);
    std::vector<int> parent(static_cast<std::size_t>(n) + 1, -1);
    std::vector<int> order{sink};
    std::vector<char> member(static_cast<std::size_t>(n) + 1, 0), seen(member);
    for (int i : t.members) member[i] = 1;
    seen[sink] = 1;
    for (std::size_t h = 0; h < order.size(); ++h) {
      for (const auto& nb : geo.neighbors(order[h])) {
        if (nb.unit < 1 || nb.unit > n || !member[nb.unit] || seen[nb.unit]) continue;
        seen[nb.unit] = 1;
        parent[nb.unit] = order[h];
        order.push_back(nb.unit);
      }
    }
    std::vector<double> subtree(static_cast<std::size_t>(n) + 1, 1.0);
    for (std::size_t h = order.size(); h-- > 1;) {
      const int i = order[h];
      set(name_of("u", {i, parent[i], k}), subtree[i]);
      subtree[parent[i]] += subtree[i];
    }
  }
  // Unused vehicles still name a sink.
  for (int rest = k + 1; rest <= m.vehicles; ++rest) set(name_of("w", {1, rest}), 1.0);
  return v;
}

std::vector<RowViolation> check_assignment(const MilpModel& m, const std::vector<double>& values,
                                           double tol) {
  std::vector<RowViolation> out;
  for (const auto& r : m.rows) {
    double lhs = 0.0;
    for (const auto& t : r.terms) lhs += t.coef * values[t.var];
    const bool ok = r.sense == RowSense::le   ? lhs <= r.rhs + tol
                    : r.sense == RowSense::ge ? lhs >= r.rhs - tol
                                              : std::abs(lhs - r.rhs) <= tol;
    if (!ok) out.push_back({r.name, lhs, r.rhs});
  }
  for (std::size_t i = 0; i < m.vars.size(); ++i) {
    const auto& var = m.vars[i];
    const double x = values[i];
    if (x < var.lower - tol || x > var.upper + tol ||
        (var.kind == VarKind::binary && std::abs(x - std::round(x)) > tol)) {
      out.push_back({"bound:" + var.name, x, x < var.lower ? var.lower : var.upper});
    }
  }
  return out;
}

}  // namespace tddmp
