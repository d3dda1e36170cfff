#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "btlab/io.hpp"
#include "doctest.h"

namespace fs = std::filesystem;
using btlab::io::json;

namespace {

struct Run {
  int code = -1;
  std::string err;
};

struct Sandbox {
  fs::path dir;
  Sandbox() {
    dir = fs::temp_directory_path() / ("btlab_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Sandbox() { fs::remove_all(dir); }

  fs::path put(const std::string& name, const std::string& text) const {
    std::ofstream(dir / name) << text;
    return dir / name;
  }
  std::string read(const std::string& name) const {
    std::ifstream in(dir / name);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
  Run run(const std::string& args) const {
    const fs::path err = dir / "stderr.txt";
    const std::string cmd =
        "cd '" + dir.string() + "' && '" BTLAB_EXE "' " + args + " > /dev/null 2> '" + err.string() + "'";
    const int st = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    r.err = read("stderr.txt");
    return r;
  }
};

const char* kTwoAtoms = R"({"dimension": 2, "alpha": 0.5,
  "mu_minus": [{"at": [0, 0], "mass": 2}], "mu_plus": [{"at": [3, 4], "mass": 2}]})";

const char* kSymmetric = R"({"dimension": 2, "alpha": 0.5,
  "mu_minus": [{"at": [0, 0], "mass": 1}],
  "mu_plus": [{"at": [2, 1], "mass": 0.5}, {"at": [2, -1], "mass": 0.5}]})";

}  // namespace

TEST_CASE("solve: two atoms give one segment") {
  Sandbox sb;
  sb.put("two.json", kTwoAtoms);
  CHECK(sb.run("solve two.json --out svg").code == 0);
  const json j = json::parse(sb.read("two.solution.json"));
  CHECK(j["method"] == "oracle");
  CHECK(j["path"]["edges"].size() == 1);
  CHECK(j["cost"].get<double>() == doctest::Approx(std::sqrt(2.0) * 5).epsilon(1e-11));
  const std::string svg = sb.read("two.solution.svg");
  CHECK(svg.find("viewBox=\"0 0 1000 1000\"") != std::string::npos);
  CHECK(svg.find("<line") != std::string::npos);
}

TEST_CASE("solve: symmetric three atoms give a Y") {
  Sandbox sb;
  sb.put("y.json", kSymmetric);
  CHECK(sb.run("solve y.json").code == 0);
  const json j = json::parse(sb.read("y.solution.json"));
  CHECK(j["path"]["vertices"].size() == 4);
  CHECK(j["path"]["edges"].size() == 3);
  // branch point on the axis: trunk s, then two arms of flow 1/2
  double best = INFINITY;
  for (int i = 0; i <= 100000; ++i) {
    const double s = i * 2e-5;
    best = std::min(best, s + 2 * std::sqrt(0.5) * std::hypot(2 - s, 1.0));
  }
  CHECK(j["cost"].get<double>() == doctest::Approx(best).epsilon(1e-9));
  CHECK(j["cost"].get<double>() < 2 * std::sqrt(0.5) * std::sqrt(5.0));
}

TEST_CASE("exit codes") {
  Sandbox sb;
  sb.put("broken.json", "{\"dimension\": 2,");
  Run r = sb.run("solve broken.json");
  CHECK(r.code == 2);
  CHECK(r.err.find("malformed JSON") != std::string::npos);

  sb.put("badmass.json", R"({"dimension": 2, "alpha": 0.5,
    "mu_minus": [{"at": [0, 0], "mass": 1}], "mu_plus": [{"at": [1, 0], "mass": "one"}]})");
  r = sb.run("solve badmass.json");
  CHECK(r.code == 2);
  CHECK(r.err.find("mu_plus[0].mass") != std::string::npos);

  sb.put("noalpha.json", R"({"dimension": 2,
    "mu_minus": [{"at": [0, 0], "mass": 1}], "mu_plus": [{"at": [1, 0], "mass": 1}]})");
  CHECK(sb.run("solve noalpha.json").code == 2);
  CHECK(sb.run("solve noalpha.json --alpha 0.7").code == 0);
  CHECK(sb.run("--dim 3 solve noalpha.json --alpha 0.7").code == 2);

  std::ostringstream many;
  many.precision(17);
  many << R"({"dimension": 2, "alpha": 0.5, "mu_minus": [)";
  for (int i = 0; i < 4; ++i) many << (i ? "," : "") << "{\"at\": [0, " << i << "], \"mass\": 1}";
  many << R"(], "mu_plus": [)";
  for (int i = 0; i < 3; ++i) many << (i ? "," : "") << "{\"at\": [5, " << i << "], \"mass\": " << 4.0 / 3 << "}";
  many << "]}";
  sb.put("seven.json", many.str());
  r = sb.run("solve seven.json");
  CHECK(r.code == 3);
  CHECK(sb.run("solve seven.json --method local").code == 0);

  CHECK(sb.run("solve missing.json").code == 6);
  CHECK(sb.run("solve two.json --method magic").code == 64);
  CHECK(sb.run("").code == 64);
}

TEST_CASE("decompose: diamond gives two curves") {
  Sandbox sb;
  sb.put("diamond.json", R"({"dimension": 2, "alpha": 0.5,
    "mu_minus": [{"at": [0, 0], "mass": 1}], "mu_plus": [{"at": [2, 0], "mass": 1}],
    "path": {"vertices": [[0, 0], [1, 1], [1, -1], [2, 0]],
             "edges": [{"tail": 0, "head": 1, "theta": 0.5}, {"tail": 1, "head": 3, "theta": 0.5},
                       {"tail": 0, "head": 2, "theta": 0.5}, {"tail": 2, "head": 3, "theta": 0.5}]}})");
  CHECK(sb.run("decompose diamond.json").code == 0);
  const json j = json::parse(sb.read("diamond.decomposition.json"));
  CHECK(j["count"] == 2);
  CHECK(j["curves"].size() == 2);
  CHECK(j["source"] == "file");
  CHECK(j["check"]["mass_residual"].get<double>() <= 1e-9);
}

TEST_CASE("flatnorm: identical paths are at distance zero") {
  Sandbox sb;
  sb.put("a.json", R"({"vertices": [[0, 0], [1, 0.3], [2, 0]],
    "edges": [{"tail": 0, "head": 1, "theta": 1}, {"tail": 1, "head": 2, "theta": 1}]})");
  CHECK(sb.run("flatnorm a.json a.json").code == 0);
  const json j = json::parse(sb.read("a.flatnorm.json"));
  CHECK(j["value"].get<double>() == 0.0);
  CHECK(j["method"] == "grid flat norm");
}

TEST_CASE("stability: shipped alpha 0.3 config") {
  Sandbox sb;
  CHECK(sb.run("stability '" BTLAB_CONFIGS "/five_atoms_alpha03.json' -o trial").code == 0);
  std::istringstream csv(sb.read("trial.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line.rfind("n,cost_n,boundary_gap_minus,boundary_gap_plus,flat_gap_T,", 0) == 0);
  double prev_m = INFINITY, prev_p = INFINITY, last_m = 0, last_p = 0;
  int rows = 0;
  while (std::getline(csv, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
    REQUIRE(f.size() == 10);
    last_m = std::stod(f[2]);
    last_p = std::stod(f[3]);
    CHECK(last_m <= prev_m);
    CHECK(last_p <= prev_p);
    prev_m = last_m;
    prev_p = last_p;
    CHECK(f[9] == "optimal");
    ++rows;
  }
  CHECK(rows == 7);
  CHECK(last_m <= 1.0 / 64 + 1e-12);
  CHECK(last_p <= 1.0 / 64 + 1e-12);
}

TEST_CASE("seed determinism and competitor") {
  Sandbox sb;
  sb.put("y.json", kSymmetric);
  CHECK(sb.run("--seed 5 solve y.json --method local -o a").code == 0);
  CHECK(sb.run("--seed 5 solve y.json --method local -o b").code == 0);
  CHECK(sb.read("a.json") == sb.read("b.json"));

  CHECK(sb.run("competitor y.json --delta 0.5 -o c1").code == 0);
  CHECK(sb.run("competitor y.json --delta 0.5 -o c2").code == 0);
  CHECK(sb.read("c1.json") == sb.read("c2.json"));
  const json j = json::parse(sb.read("c1.json"));
  CHECK(j["cheaper"] == true);
  CHECK(j["boundary_residual_bar"].get<double>() <= 1e-9);
}
