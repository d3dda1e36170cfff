// btlab command-line front end. See docs/formats.md for the file formats.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "btlab/io.hpp"

namespace fs = std::filesystem;
using namespace btlab;
using io::json;

namespace {

enum Exit : int {
  kOk = 0,
  kInternal = 1,
  kSchema = 2,
  kOracleRange = 3,
  kPrecondition = 4,
  kConvergence = 5,
  kFile = 6,
  kUsage = 64,
};

struct Globals {
  std::optional<double> alpha;
  std::optional<int> dim;
  double tol = 1e-9;
  bool tol_given = false;
  std::uint64_t seed = 1;
  bool seed_given = false;
  std::string out = "json";
  std::string output;  // file stem
};

fs::path stem_for(const Globals& g, const std::string& input, const std::string& cmd) {
  if (!g.output.empty()) return g.output;
  return fs::path(input).stem().string() + "." + cmd;
}

fs::path with_ext(const fs::path& stem, const char* ext) {
  fs::path p = stem;
  p += ext;
  return p;
}

void check_dim(const Globals& g, int file_dim) {
  if (g.dim && *g.dim != file_dim)
    throw io::SchemaError("dimension: file has " + std::to_string(file_dim) + ", --dim asked for " +
                          std::to_string(*g.dim));
}

io::InstanceFile load_instance(const std::string& file, const Globals& g) {
  io::InstanceFile f = io::parse_instance(io::read_json(file));
  check_dim(g, f.config.dimension);
  if (g.alpha) {
    f.config.alpha = *g.alpha;
    f.has_alpha = true;
  }
  if (!f.has_alpha) throw io::SchemaError("alpha: missing (set it in the file or pass --alpha)");
  return f;
}

void emit(const fs::path& stem, const json& j) {
  io::write_atomic(with_ext(stem, ".json"), io::dump(j));
  std::cout << "wrote " << with_ext(stem, ".json").string() << "\n";
}

void emit_svg(const fs::path& stem, const TrafficPath& T, const io::InstanceFile& f) {
  io::write_atomic(with_ext(stem, ".svg"), io::render_svg(T, f.mu_minus, f.mu_plus, f.config.alpha));
  std::cout << "wrote " << with_ext(stem, ".svg").string() << "\n";
}

int cmd_solve(const Globals& g, const std::string& file, const std::string& method, int budget) {
  const io::InstanceFile f = load_instance(file, g);
  const double alpha = f.config.alpha;
  json j;
  TrafficPath T;
  if (method == "oracle") {
    const OracleResult r = brute_force_optimal(f.mu_minus, f.mu_plus, alpha, g.tol);
    T = r.path;
    j = {{"method", "oracle"},
         {"cost", io::round12(r.cost)},
         {"topology", r.topology},
         {"topologies_tried", r.topologies_tried},
         {"tie_break", r.tie_break}};
    const SafeguardReport sg = oracle_safeguard(r.path, alpha, g.tol);
    j["safeguard"] = {{"best_edge_swap", io::round12(sg.best_edge_swap)},
                      {"best_reroute", io::round12(sg.best_reroute)},
                      {"holds", sg.holds}};
  } else {
    LocalSearchOptions opt;
    opt.budget = budget;
    opt.seed = g.seed;
    const LocalSearchResult r = local_search(f.mu_minus, f.mu_plus, alpha, f.path, opt);
    T = r.path;
    j = {{"method", "local"},
         {"cost", io::round12(r.cost)},
         {"initial_cost", io::round12(r.initial_cost)},
         {"accepted_moves", r.accepted_moves},
         {"budget", budget},
         {"seed", g.seed}};
  }
  j["alpha"] = io::round12(alpha);
  j["dimension"] = f.config.dimension;
  j["path"] = io::to_json(T);
  const fs::path stem = stem_for(g, file, "solution");
  emit(stem, j);
  if (g.out == "svg") emit_svg(stem, T, f);
  std::cout << "cost " << io::round12(alpha_mass(T, alpha)) << "\n";
  return kOk;
}

int cmd_decompose(const Globals& g, const std::string& file) {
  const io::InstanceFile f = load_instance(file, g);
  TrafficPath T;
  std::string source = "file";
  if (f.path) {
    T = *f.path;
  } else {
    T = brute_force_optimal(f.mu_minus, f.mu_plus, f.config.alpha, g.tol).path;
    source = "oracle";
  }
  const bool cyclic = !is_acyclic(T);
  if (cyclic) T = remove_cycles(T);
  const PathMeasure pi = good_decomposition(T);
  const json j = {{"source", source},
                  {"cycles_removed", cyclic},
                  {"count", pi.entries.size()},
                  {"curves", io::to_json(pi)},
                  {"check", io::to_json(check_good_decomposition(T, pi))}};
  const fs::path stem = stem_for(g, file, "decomposition");
  emit(stem, j);
  if (g.out == "svg") emit_svg(stem, T, f);
  std::cout << pi.entries.size() << " curves\n";
  return kOk;
}

// Accepts an instance file carrying a path or a bare {"vertices", "edges"} object.
TrafficPath load_path(const std::string& file, const Globals& g) {
  const json j = io::read_json(file);
  if (j.is_object() && j.contains("vertices")) {
    int d = g.dim.value_or(2);
    const json& v = j["vertices"];
    if (!g.dim && v.is_array() && !v.empty() && v[0].is_array()) d = static_cast<int>(v[0].size());
    if (d != 2 && d != 3) throw io::SchemaError("vertices[0]: expected 2 or 3 coordinates");
    return io::parse_path(j, d, "");
  }
  const io::InstanceFile f = io::parse_instance(j);
  check_dim(g, f.config.dimension);
  if (!f.path) throw io::SchemaError("path: missing in " + file);
  return *f.path;
}

int cmd_flatnorm(const Globals& g, const std::string& a, const std::string& b, double h) {
  const TrafficPath T1 = load_path(a, g), T2 = load_path(b, g);
  if (T1.dim() != T2.dim() && !T1.vertices.empty() && !T2.vertices.empty())
    throw io::SchemaError("dimension: the two paths live in different dimensions");
  const TrafficPath both[2] = {T1, T2};
  if (h <= 0) {
    double lo[2] = {INFINITY, INFINITY}, hi[2] = {-INFINITY, -INFINITY};
    for (const TrafficPath& T : both)
      for (const Point& p : T.vertices)
        for (int k = 0; k < 2; ++k) {
          lo[k] = std::min(lo[k], p[k]);
          hi[k] = std::max(hi[k], p[k]);
        }
    const double ext = lo[0] == INFINITY ? 0.0 : std::max(hi[0] - lo[0], hi[1] - lo[1]);
    h = ext > 0 ? ext / 64 : 1.0;
  }
  const GridComplex grid = GridComplex::around(both, h);
  const FlatDistance d = flat_distance_1(T1, T2, grid);
  json j = io::to_json(d);
  j["h"] = io::round12(h);
  emit(stem_for(g, a, "flatnorm"), j);
  std::cout << "flat distance " << io::round12(d.value) << " (" << d.method << ")\n";
  return kOk;
}

int cmd_stability(const Globals& g, const std::string& file, int threads) {
  ExperimentConfig cfg = io::parse_experiment(io::read_json(file));
  check_dim(g, cfg.config.dimension);
  if (g.alpha) cfg.config.alpha = *g.alpha;
  if (g.tol_given) cfg.optimality_tol = g.tol;
  if (g.seed_given) cfg.seed = g.seed;
  if (threads >= 0) cfg.threads = threads;
  const TrialReport r = run_stability_trial(cfg);
  const fs::path stem = stem_for(g, file, "stability");
  emit(stem, {{"config", io::to_json(cfg)}, {"report", io::to_json(r)}});
  io::write_atomic(with_ext(stem, ".csv"), io::trial_csv(r));
  std::cout << "wrote " << with_ext(stem, ".csv").string() << "\n";
  if (g.out == "svg") {
    io::InstanceFile f;
    f.config = cfg.config;
    f.mu_minus = quantize(cfg.minus, 0);
    f.mu_plus = quantize(cfg.plus, 0);
    emit_svg(stem, r.limit, f);
  }
  std::cout << "verdict " << r.verdict << "\n";
  return kOk;
}

int cmd_competitor(const Globals& g, const std::string& file, double delta, double radius, double shift) {
  const io::InstanceFile f = load_instance(file, g);
  const DetourInstance inst =
      make_detour_instance(f.mu_minus, f.mu_plus, f.config.alpha, delta, radius, shift, g.seed);
  const CompetitorReport r = build_competitor(inst.T_n, inst.pi_n, inst.T_opt, inst.pi_opt, inst.covers, inst.cc);
  json cc = {{"Delta", io::round12(inst.cc.Delta)}, {"eps1", io::round12(inst.cc.eps1)},
             {"eps2", io::round12(inst.cc.eps2)},   {"delta", io::round12(inst.cc.delta)},
             {"N_minus", inst.cc.N_minus},          {"N_plus", inst.cc.N_plus},
             {"alpha", io::round12(inst.cc.alpha)}, {"C", io::round12(inst.cc.C)}};
  json j = io::to_json(r);
  j["competitor_config"] = cc;
  j["T_n"] = io::to_json(inst.T_n);
  j["T_opt"] = io::to_json(inst.T_opt);
  const fs::path stem = stem_for(g, file, "competitor");
  emit(stem, j);
  if (g.out == "svg") emit_svg(stem, r.T_bar, f);
  std::cout << "M(T_n) " << io::round12(r.cost_T_n) << ", M(T_bar) " << io::round12(r.cost_T_bar)
            << (r.cheaper ? ", cheaper\n" : ", not cheaper\n");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Branched transport lab"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--alpha", g.alpha, "Override the exponent alpha")->check(CLI::Range(0.0, 1.0));
  app.add_option("--dim", g.dim, "Expected ambient dimension")->check(CLI::IsMember({2, 3}));
  auto* tol = app.add_option("--tol", g.tol, "Oracle / optimality tolerance")->check(CLI::PositiveNumber);
  auto* seed = app.add_option("--seed", g.seed, "Seed for randomized steps");
  app.add_option("--out", g.out, "Output kind")->check(CLI::IsMember({"json", "svg"}));
  app.add_option("-o,--output", g.output, "Output file stem (extension added)");

  std::string input, input2, method = "oracle";
  int budget = 200, threads = -1;
  double h = 0.0, delta = 0.5, radius = 1e-4, shift = 1e-5;

  auto* solve = app.add_subcommand("solve", "Optimal (or locally improved) traffic path of an instance");
  solve->add_option("instance", input, "Instance JSON")->required();
  solve->add_option("--method", method, "oracle or local")->check(CLI::IsMember({"oracle", "local"}));
  solve->add_option("--budget", budget, "Local search move budget")->check(CLI::PositiveNumber);

  auto* decompose = app.add_subcommand("decompose", "Good decomposition of the instance path (oracle if absent)");
  decompose->add_option("instance", input, "Instance JSON")->required();

  auto* flatnorm = app.add_subcommand("flatnorm", "Flat distance between two paths");
  flatnorm->add_option("first", input, "Instance or path JSON")->required();
  flatnorm->add_option("second", input2, "Instance or path JSON")->required();
  flatnorm->add_option("--grid-h", h, "Grid spacing (default extent / 64)");

  auto* stability = app.add_subcommand("stability", "Run a stability trial");
  stability->add_option("config", input, "Experiment config JSON")->required();
  stability->add_option("--threads", threads, "Worker threads (0: all cores)");

  auto* competitor = app.add_subcommand("competitor", "Competitor construction on a detoured optimum");
  competitor->add_option("instance", input, "Instance JSON")->required();
  competitor->add_option("--delta", delta, "Extra alpha-mass of the detour")->check(CLI::PositiveNumber);
  competitor->add_option("--radius", radius, "Cover ball radius")->check(CLI::PositiveNumber);
  competitor->add_option("--shift", shift, "Shift of the approximating marginals");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }
  g.tol_given = tol->count() > 0;
  g.seed_given = seed->count() > 0;

  try {
    if (solve->parsed()) return cmd_solve(g, input, method, budget);
    if (decompose->parsed()) return cmd_decompose(g, input);
    if (flatnorm->parsed()) return cmd_flatnorm(g, input, input2, h);
    if (stability->parsed()) return cmd_stability(g, input, threads);
    if (competitor->parsed()) return cmd_competitor(g, input, delta, radius, shift);
  } catch (const io::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return kSchema;
  } catch (const OracleRangeError& e) {
    std::cerr << "oracle range exceeded: " << e.what() << "\n";
    return kOracleRange;
  } catch (const ConvergenceError& e) {
    std::cerr << "no convergence: " << e.what() << "\n";
    return kConvergence;
  } catch (const DomainError& e) {
    std::cerr << "precondition violated: " << e.what() << "\n";
    return kPrecondition;
  } catch (const io::FileError& e) {
    std::cerr << e.what() << "\n";
    return kFile;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}
