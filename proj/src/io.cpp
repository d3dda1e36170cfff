#include "btlab/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <unistd.h>

namespace btlab::io {

namespace {

std::string field(const std::string& where, const std::string& key) {
  return where.empty() ? key : where + "." + key;
}

std::string item(const std::string& where, std::size_t i) { return where + "[" + std::to_string(i) + "]"; }

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw SchemaError((where.empty() ? std::string("<document>") : where) + ": " + what);
}

void expect_object(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(where, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) fail(field(where, k), "unknown field");
}

const json& require(const json& j, const std::string& key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) fail(field(where, key), "missing");
  return *it;
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(where, "not finite");
  return x;
}

double number_or(const json& j, const std::string& key, const std::string& where, double dflt) {
  const auto it = j.find(key);
  return it == j.end() ? dflt : number(*it, field(where, key));
}

long long integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) fail(where, "expected an integer");
  return v.get<long long>();
}

std::uint64_t seed_of(const json& v, const std::string& where) {
  if (!v.is_number_unsigned()) fail(where, "expected a nonnegative integer");
  return v.get<std::uint64_t>();
}

int dimension_of(const json& j, const std::string& where) {
  const long long d = integer(require(j, "dimension", where), field(where, "dimension"));
  if (d != 2 && d != 3) fail(field(where, "dimension"), "must be 2 or 3");
  return static_cast<int>(d);
}

json num(double x) { return round12(x); }

std::string fmt(double x, const char* spec = "%.12g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, x);
  return buf;
}

}  // namespace

double round12(double x) {
  if (!std::isfinite(x)) return x;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return std::strtod(buf, nullptr);
}

json to_json(const Point& p) {
  json a = json::array();
  for (int k = 0; k < p.dim; ++k) a.push_back(num(p[k]));
  return a;
}

json to_json(const AtomicMeasure& m) {
  json a = json::array();
  for (const Atom& x : m.atoms()) a.push_back({{"at", to_json(x.at)}, {"mass", num(x.mass)}});
  return a;
}

json to_json(const TrafficPath& T) {
  json v = json::array(), e = json::array();
  for (const Point& p : T.vertices) v.push_back(to_json(p));
  for (const Edge& x : T.edges) e.push_back({{"tail", x.tail}, {"head", x.head}, {"theta", num(x.theta)}});
  return {{"vertices", v}, {"edges", e}};
}

json to_json(const PathMeasure& pi) {
  json a = json::array();
  for (const WeightedCurve& c : pi.entries) {
    json w = json::array();
    for (const Point& p : c.curve.waypoints) w.push_back(to_json(p));
    a.push_back({{"weight", num(c.weight)}, {"waypoints", w}});
  }
  return a;
}

json to_json(const InstanceFile& f) {
  json j = {{"dimension", f.config.dimension},
            {"ambient_radius", num(f.config.ambient_radius)},
            {"mu_minus", to_json(f.mu_minus)},
            {"mu_plus", to_json(f.mu_plus)}};
  if (f.has_alpha) j["alpha"] = num(f.config.alpha);
  if (f.path) j["path"] = to_json(*f.path);
  return j;
}

json to_json(const MeasureSpec& s) {
  if (s.kind == "cantor")
    return {{"kind", "cantor"}, {"from", to_json(s.from)}, {"to", to_json(s.to)}, {"mass", num(s.mass)}};
  return {{"kind", "atoms"}, {"atoms", to_json(s.atoms)}, {"shift", num(s.shift)}, {"seed", s.seed}};
}

json to_json(const ExperimentConfig& cfg) {
  return {{"name", cfg.name},
          {"dimension", cfg.config.dimension},
          {"alpha", num(cfg.config.alpha)},
          {"ambient_radius", num(cfg.config.ambient_radius)},
          {"minus", to_json(cfg.minus)},
          {"plus", to_json(cfg.plus)},
          {"schedule", cfg.schedule},
          {"seed", cfg.seed},
          {"optimality_tol", num(cfg.optimality_tol)},
          {"convergence_tol", num(cfg.convergence_tol)},
          {"grid_h", num(cfg.grid_h)},
          {"threads", cfg.threads}};
}

json to_json(const TrialReport& r) {
  json rows = json::array();
  for (const TrialRow& x : r.rows)
    rows.push_back({{"n", x.n},
                    {"cost_n", num(x.cost_n)},
                    {"boundary_gap_minus", num(x.boundary_gap_minus)},
                    {"boundary_gap_plus", num(x.boundary_gap_plus)},
                    {"flat_gap_T", num(x.flat_gap_T)},
                    {"flat_gap_error", num(x.flat_gap_error)},
                    {"topology", x.topology}});
  return {{"name", r.name},
          {"flat_method", r.flat_method},
          {"rows", rows},
          {"limit", to_json(r.limit)},
          {"limit_cost", num(r.limit_cost)},
          {"limit_gap", num(r.limit_gap)},
          {"tolerance", num(r.tolerance)},
          {"costs_bounded", r.costs_bounded},
          {"gaps_vanish", r.gaps_vanish},
          {"limit_optimal", r.limit_optimal},
          {"liminf_cost", num(r.liminf_cost)},
          {"lsc_holds", r.lsc_holds},
          {"verdict", r.verdict}};
}

json to_json(const CompetitorReport& r) {
  json ledger = json::array();
  for (const LedgerLine& l : r.ledger)
    ledger.push_back({{"name", l.name}, {"lhs", num(l.lhs)}, {"rhs", num(l.rhs)}, {"holds", l.holds}});
  auto weights = [](const std::vector<double>& w) {
    json a = json::array();
    for (double x : w) a.push_back(num(x));
    return a;
  };
  return {{"cost_T_n", num(r.cost_T_n)},
          {"cost_T_bar", num(r.cost_T_bar)},
          {"cheaper", r.cheaper},
          {"C_meas", num(r.C_meas)},
          {"boundary_residual_sel", num(r.boundary_residual_sel)},
          {"boundary_residual_bar", num(r.boundary_residual_bar)},
          {"alpha_minus", weights(r.alpha_minus)},
          {"alpha_plus", weights(r.alpha_plus)},
          {"sigma_minus", to_json(r.sigma_minus)},
          {"sigma_plus", to_json(r.sigma_plus)},
          {"nu_n_minus", to_json(r.nu_n_minus)},
          {"nu_n_plus", to_json(r.nu_n_plus)},
          {"ledger", ledger},
          {"paths",
           {{"T_sel", to_json(r.T_sel)},
            {"T_sel_minus", to_json(r.T_sel_minus)},
            {"T_sel_plus", to_json(r.T_sel_plus)},
            {"T_opt_restr", to_json(r.T_opt_restr)},
            {"T_conn_minus", to_json(r.T_conn_minus)},
            {"T_conn_plus", to_json(r.T_conn_plus)},
            {"T_back", to_json(r.T_back)},
            {"T_tilde_sel", to_json(r.T_tilde_sel)},
            {"T_bar", to_json(r.T_bar)}}}};
}

json to_json(const DecompositionCheck& c) {
  return {{"mass_residual", num(c.mass_residual)},
          {"boundary_residual", num(c.boundary_residual)},
          {"density_residual", num(c.density_residual)},
          {"reconstruction_residual", num(c.reconstruction_residual)},
          {"endpoints_ok", c.endpoints_ok},
          {"curves_simple", c.curves_simple}};
}

json to_json(const FlatDistance& d) {
  return {{"value", num(d.value)}, {"error_bound", num(d.error_bound)}, {"method", d.method}};
}

Point parse_point(const json& j, int dim, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of coordinates");
  if (static_cast<int>(j.size()) != dim) fail(where, "expected " + std::to_string(dim) + " coordinates");
  double c[3] = {0, 0, 0};
  for (int k = 0; k < dim; ++k) c[k] = number(j[k], item(where, k));
  return dim == 2 ? Point(c[0], c[1]) : Point(c[0], c[1], c[2]);
}

AtomicMeasure parse_measure(const json& j, int dim, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of atoms");
  std::vector<Atom> atoms;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string w = item(where, i);
    expect_object(j[i], w, {"at", "mass"});
    Atom a;
    a.at = parse_point(require(j[i], "at", w), dim, field(w, "at"));
    a.mass = number(require(j[i], "mass", w), field(w, "mass"));
    if (!(a.mass > 0)) fail(field(w, "mass"), "must be positive");
    atoms.push_back(a);
  }
  return AtomicMeasure(std::move(atoms));
}

TrafficPath parse_path(const json& j, int dim, const std::string& where) {
  expect_object(j, where, {"vertices", "edges"});
  TrafficPath T;
  const json& v = require(j, "vertices", where);
  if (!v.is_array()) fail(field(where, "vertices"), "expected an array");
  for (std::size_t i = 0; i < v.size(); ++i) T.vertices.push_back(parse_point(v[i], dim, item(field(where, "vertices"), i)));
  const json& e = require(j, "edges", where);
  if (!e.is_array()) fail(field(where, "edges"), "expected an array");
  for (std::size_t i = 0; i < e.size(); ++i) {
    const std::string w = item(field(where, "edges"), i);
    expect_object(e[i], w, {"tail", "head", "theta"});
    const long long a = integer(require(e[i], "tail", w), field(w, "tail"));
    const long long b = integer(require(e[i], "head", w), field(w, "head"));
    const double th = number(require(e[i], "theta", w), field(w, "theta"));
    const long long nv = static_cast<long long>(T.vertices.size());
    if (a < 0 || a >= nv) fail(field(w, "tail"), "vertex index out of range");
    if (b < 0 || b >= nv) fail(field(w, "head"), "vertex index out of range");
    if (!(th > 0)) fail(field(w, "theta"), "must be positive");
    T.edges.push_back({static_cast<std::size_t>(a), static_cast<std::size_t>(b), th});
  }
  try {
    T.validate();
  } catch (const DomainError& ex) {
    fail(where, ex.what());
  }
  return T;
}

InstanceFile parse_instance(const json& j) {
  expect_object(j, "", {"dimension", "alpha", "ambient_radius", "mu_minus", "mu_plus", "path"});
  InstanceFile f;
  f.config.dimension = dimension_of(j, "");
  f.has_alpha = j.contains("alpha");
  f.config.alpha = number_or(j, "alpha", "", 0.5);
  if (f.config.alpha < 0 || f.config.alpha > 1) fail("alpha", "must lie in [0, 1]");
  f.config.ambient_radius = number_or(j, "ambient_radius", "", f.config.ambient_radius);
  if (!(f.config.ambient_radius > 0)) fail("ambient_radius", "must be positive");
  const int d = f.config.dimension;
  f.mu_minus = parse_measure(require(j, "mu_minus", ""), d, "mu_minus");
  f.mu_plus = parse_measure(require(j, "mu_plus", ""), d, "mu_plus");
  if (f.mu_minus.empty()) fail("mu_minus", "no atoms");
  if (f.mu_plus.empty()) fail("mu_plus", "no atoms");
  if (std::abs(f.mu_plus.total() - f.mu_minus.total()) > 1e-9)
    fail("mu_plus", "total mass " + fmt(f.mu_plus.total()) + " differs from mu_minus total " +
                        fmt(f.mu_minus.total()));
  if (j.contains("path")) {
    f.path = parse_path(j["path"], d, "path");
    if (!approx_equal(boundary(*f.path), f.mu_plus - f.mu_minus, 1e-9))
      fail("path", "boundary differs from mu_plus - mu_minus");
  }
  return f;
}

namespace {

MeasureSpec parse_spec(const json& j, int dim, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  MeasureSpec s;
  const auto k = j.find("kind");
  s.kind = k == j.end() ? "atoms" : (k->is_string() ? k->get<std::string>() : "");
  if (s.kind == "atoms") {
    expect_object(j, where, {"kind", "atoms", "shift", "seed"});
    s.atoms = parse_measure(require(j, "atoms", where), dim, field(where, "atoms"));
    s.shift = number_or(j, "shift", where, 0.0);
    if (s.shift < 0) fail(field(where, "shift"), "must be nonnegative");
    if (j.contains("seed")) s.seed = seed_of(j["seed"], field(where, "seed"));
  } else if (s.kind == "cantor") {
    expect_object(j, where, {"kind", "from", "to", "mass"});
    s.from = parse_point(require(j, "from", where), dim, field(where, "from"));
    s.to = parse_point(require(j, "to", where), dim, field(where, "to"));
    s.mass = number_or(j, "mass", where, 1.0);
    if (!(s.mass > 0)) fail(field(where, "mass"), "must be positive");
  } else {
    fail(field(where, "kind"), "expected \"atoms\" or \"cantor\"");
  }
  return s;
}

}  // namespace

ExperimentConfig parse_experiment(const json& j) {
  expect_object(j, "", {"name", "dimension", "alpha", "ambient_radius", "minus", "plus", "schedule", "seed",
                        "optimality_tol", "convergence_tol", "grid_h", "threads"});
  ExperimentConfig cfg;
  if (j.contains("name")) {
    if (!j["name"].is_string()) fail("name", "expected a string");
    cfg.name = j["name"].get<std::string>();
  }
  cfg.config.dimension = dimension_of(j, "");
  cfg.config.alpha = number(require(j, "alpha", ""), "alpha");
  if (cfg.config.alpha < 0 || cfg.config.alpha > 1) fail("alpha", "must lie in [0, 1]");
  cfg.config.ambient_radius = number_or(j, "ambient_radius", "", cfg.config.ambient_radius);
  cfg.minus = parse_spec(require(j, "minus", ""), cfg.config.dimension, "minus");
  cfg.plus = parse_spec(require(j, "plus", ""), cfg.config.dimension, "plus");
  if (j.contains("schedule")) {
    const json& s = j["schedule"];
    if (!s.is_array() || s.empty()) fail("schedule", "expected a nonempty array");
    cfg.schedule.clear();
    for (std::size_t i = 0; i < s.size(); ++i) {
      const long long n = integer(s[i], item("schedule", i));
      if (n < 0) fail(item("schedule", i), "must be nonnegative");
      cfg.schedule.push_back(static_cast<int>(n));
    }
  }
  if (j.contains("seed")) cfg.seed = seed_of(j["seed"], "seed");
  cfg.optimality_tol = number_or(j, "optimality_tol", "", cfg.optimality_tol);
  cfg.convergence_tol = number_or(j, "convergence_tol", "", cfg.convergence_tol);
  cfg.grid_h = number_or(j, "grid_h", "", cfg.grid_h);
  if (!(cfg.optimality_tol > 0)) fail("optimality_tol", "must be positive");
  if (!(cfg.convergence_tol > 0)) fail("convergence_tol", "must be positive");
  if (cfg.grid_h < 0) fail("grid_h", "must be nonnegative");
  if (j.contains("threads")) {
    const long long t = integer(j["threads"], "threads");
    if (t < 0) fail("threads", "must be nonnegative");
    cfg.threads = static_cast<int>(t);
  }
  return cfg;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json read_json(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw FileError("cannot read " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw SchemaError("<document>: malformed JSON at byte " + std::to_string(e.byte) + " of " + file.string());
  }
}

void write_atomic(const std::filesystem::path& file, const std::string& content) {
  std::filesystem::path tmp = file;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FileError("cannot write " + file.string());
    out << content;
    out.flush();
    if (!out) throw FileError("cannot write " + file.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, file, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw FileError("cannot write " + file.string());
  }
}

std::string trial_csv(const TrialReport& r) {
  std::ostringstream out;
  out << "n,cost_n,boundary_gap_minus,boundary_gap_plus,flat_gap_T,costs_bounded,gaps_vanish,limit_optimal,"
         "lsc_holds,verdict\n";
  auto b = [](bool x) { return x ? "true" : "false"; };
  for (const TrialRow& x : r.rows)
    out << x.n << ',' << fmt(x.cost_n) << ',' << fmt(x.boundary_gap_minus) << ',' << fmt(x.boundary_gap_plus) << ','
        << fmt(x.flat_gap_T) << ',' << b(r.costs_bounded) << ',' << b(r.gaps_vanish) << ',' << b(r.limit_optimal)
        << ',' << b(r.lsc_holds) << ',' << r.verdict << '\n';
  return out.str();
}

std::string render_svg(const TrafficPath& T, const AtomicMeasure& mu_minus, const AtomicMeasure& mu_plus,
                       double alpha) {
  constexpr double kSize = 1000, kPad = 60;
  double lo[2] = {INFINITY, INFINITY}, hi[2] = {-INFINITY, -INFINITY};
  auto grow = [&](const Point& p) {
    for (int k = 0; k < 2; ++k) {
      lo[k] = std::min(lo[k], p[k]);
      hi[k] = std::max(hi[k], p[k]);
    }
  };
  for (const Point& p : T.vertices) grow(p);
  for (const Atom& a : mu_minus.atoms()) grow(a.at);
  for (const Atom& a : mu_plus.atoms()) grow(a.at);
  if (lo[0] == INFINITY) lo[0] = lo[1] = hi[0] = hi[1] = 0;
  const double span = std::max({hi[0] - lo[0], hi[1] - lo[1], 1e-12});
  const double s = (kSize - 2 * kPad) / span;
  // centre the drawing, y up
  const double ox = kPad + (kSize - 2 * kPad - s * (hi[0] - lo[0])) / 2;
  const double oy = kPad + (kSize - 2 * kPad - s * (hi[1] - lo[1])) / 2;
  auto X = [&](const Point& p) { return fmt(ox + s * (p[0] - lo[0]), "%.2f"); };
  auto Y = [&](const Point& p) { return fmt(kSize - oy - s * (p[1] - lo[1]), "%.2f"); };

  double tmax = 0, mmax = 0;
  for (const Edge& e : T.edges) tmax = std::max(tmax, e.theta);
  for (const Atom& a : mu_minus.atoms()) mmax = std::max(mmax, a.mass);
  for (const Atom& a : mu_plus.atoms()) mmax = std::max(mmax, a.mass);

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"1000\" height=\"1000\" viewBox=\"0 0 1000 1000\">\n"
      << "<rect width=\"1000\" height=\"1000\" fill=\"white\"/>\n<g stroke=\"#333333\" stroke-linecap=\"round\">\n";
  for (const Edge& e : T.edges) {
    const Point &a = T.vertices[e.tail], &b = T.vertices[e.head];
    // alpha = 0 would draw every edge alike; that is the point of alpha = 0
    const double w = 1.5 + 14.0 * std::pow(e.theta / tmax, alpha);
    out << "<line x1=\"" << X(a) << "\" y1=\"" << Y(a) << "\" x2=\"" << X(b) << "\" y2=\"" << Y(b)
        << "\" stroke-width=\"" << fmt(w, "%.2f") << "\"/>\n";
  }
  out << "</g>\n";
  auto dots = [&](const AtomicMeasure& m, const char* colour) {
    for (const Atom& a : m.atoms()) {
      const double r = 4.0 + 20.0 * std::sqrt(a.mass / mmax);
      out << "<circle cx=\"" << X(a.at) << "\" cy=\"" << Y(a.at) << "\" r=\"" << fmt(r, "%.2f") << "\" fill=\""
          << colour << "\"/>\n";
    }
  };
  dots(mu_minus, "#2b6cb0");
  dots(mu_plus, "#c53030");
  out << "</svg>\n";
  return out.str();
}

}  // namespace btlab::io
