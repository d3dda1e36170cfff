#include <filesystem>
#include <fstream>

#include "btlab/io.hpp"
#include "doctest.h"

using namespace btlab;
using io::json;

namespace {

const char* kInstance = R"({
  "alpha": 0.5,
  "ambient_radius": 10.0,
  "dimension": 2,
  "mu_minus": [
    {
      "at": [
        0.0,
        0.0
      ],
      "mass": 1.0
    }
  ],
  "mu_plus": [
    {
      "at": [
        1.0,
        -1.0
      ],
      "mass": 0.5
    },
    {
      "at": [
        1.0,
        1.0
      ],
      "mass": 0.5
    }
  ],
  "path": {
    "edges": [
      {
        "head": 1,
        "tail": 0,
        "theta": 0.5
      },
      {
        "head": 2,
        "tail": 0,
        "theta": 0.5
      }
    ],
    "vertices": [
      [
        0.0,
        0.0
      ],
      [
        1.0,
        -1.0
      ],
      [
        1.0,
        1.0
      ]
    ]
  }
}
)";

std::string schema_message(const json& j) {
  try {
    io::parse_instance(j);
  } catch (const io::SchemaError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("round12 keeps twelve significant digits") {
  CHECK(io::round12(0.1) == 0.1);
  CHECK(io::round12(1.0 / 3.0) == 0.333333333333);
  CHECK(io::round12(2.0 * std::sqrt(2.0)) == 2.82842712475);
  CHECK(io::round12(-1234567.8912345) == -1234567.89123);
}

TEST_CASE("instance round trip is byte identical") {
  const io::InstanceFile f = io::parse_instance(json::parse(kInstance));
  CHECK(f.config.alpha == 0.5);
  CHECK(f.path.has_value());
  CHECK(io::dump(io::to_json(f)) == kInstance);

  // noncanonical input: keys shuffled, long floats
  json j = json::parse(kInstance);
  j["mu_minus"][0]["at"][0] = 1e-17;
  j["path"]["vertices"][0][0] = 1e-17;
  const std::string once = io::dump(io::to_json(io::parse_instance(j)));
  const std::string twice = io::dump(io::to_json(io::parse_instance(json::parse(once))));
  CHECK(once == twice);
}

TEST_CASE("schema violations name the field") {
  json j = json::parse(kInstance);
  j["mu_plus"][1]["mass"] = "heavy";
  CHECK(schema_message(j) == "mu_plus[1].mass: expected a number");

  j = json::parse(kInstance);
  j.erase("dimension");
  CHECK(schema_message(j) == "dimension: missing");

  j = json::parse(kInstance);
  j["colour"] = "red";
  CHECK(schema_message(j) == "colour: unknown field");

  j = json::parse(kInstance);
  j["mu_plus"][0]["mass"] = 0.25;
  CHECK(schema_message(j).rfind("mu_plus: total mass", 0) == 0);

  j = json::parse(kInstance);
  j["path"]["edges"][1]["head"] = 7;
  CHECK(schema_message(j) == "path.edges[1].head: vertex index out of range");

  j = json::parse(kInstance);
  j["path"]["edges"][1]["theta"] = 0.25;
  CHECK(schema_message(j) == "path: boundary differs from mu_plus - mu_minus");

  j = json::parse(kInstance);
  j["mu_minus"][0]["at"] = {0.0, 0.0, 0.0};
  CHECK(schema_message(j) == "mu_minus[0].at: expected 2 coordinates");

  j = json::parse(kInstance);
  j.erase("alpha");
  CHECK(schema_message(j).empty());
  CHECK_FALSE(io::parse_instance(j).has_alpha);
}

TEST_CASE("experiment config round trip") {
  ExperimentConfig cfg;
  cfg.name = "c";
  cfg.config.alpha = 0.3;
  cfg.minus.atoms = AtomicMeasure::dirac({0, 0}, 1.0);
  cfg.minus.shift = 1.0;
  cfg.minus.seed = 11;
  cfg.plus.kind = "cantor";
  cfg.plus.from = Point(1, -1);
  cfg.plus.to = Point(1, 1);
  cfg.schedule = {1, 2, 4};
  const std::string once = io::dump(io::to_json(cfg));
  const ExperimentConfig back = io::parse_experiment(json::parse(once));
  CHECK(back.plus.kind == "cantor");
  CHECK(back.minus.seed == 11);
  CHECK(back.schedule == cfg.schedule);
  CHECK(io::dump(io::to_json(back)) == once);

  json bad = json::parse(once);
  bad["plus"]["kind"] = "fractal";
  CHECK_THROWS_WITH_AS(io::parse_experiment(bad), "plus.kind: expected \"atoms\" or \"cantor\"", io::SchemaError);
  bad = json::parse(once);
  bad["schedule"][1] = 2.5;
  CHECK_THROWS_WITH_AS(io::parse_experiment(bad), "schedule[1]: expected an integer", io::SchemaError);
}

TEST_CASE("trial csv column order") {
  TrialReport r;
  r.rows.push_back({4, 1.5, 0.25, 0.125, 0.5, 0.0, "t"});
  r.costs_bounded = r.gaps_vanish = r.limit_optimal = r.lsc_holds = true;
  r.verdict = "optimal";
  CHECK(io::trial_csv(r) ==
        "n,cost_n,boundary_gap_minus,boundary_gap_plus,flat_gap_T,costs_bounded,gaps_vanish,limit_optimal,"
        "lsc_holds,verdict\n4,1.5,0.25,0.125,0.5,true,true,true,true,optimal\n");
}

TEST_CASE("svg viewport and atomic write") {
  const io::InstanceFile f = io::parse_instance(json::parse(kInstance));
  const std::string svg = io::render_svg(*f.path, f.mu_minus, f.mu_plus, 0.5);
  CHECK(svg.find("viewBox=\"0 0 1000 1000\"") != std::string::npos);
  // two edges, three atoms
  std::size_t lines = 0, circles = 0;
  for (std::size_t p = 0; (p = svg.find("<line", p)) != std::string::npos; ++p) ++lines;
  for (std::size_t p = 0; (p = svg.find("<circle", p)) != std::string::npos; ++p) ++circles;
  CHECK(lines == 2);
  CHECK(circles == 3);

  const auto dir = std::filesystem::temp_directory_path() / "btlab_io_test";
  std::filesystem::create_directories(dir);
  const auto file = dir / "x.json";
  io::write_atomic(file, "first\n");
  io::write_atomic(file, "second\n");
  std::ifstream in(file);
  std::string s;
  std::getline(in, s);
  CHECK(s == "second");
  CHECK(std::distance(std::filesystem::directory_iterator(dir), std::filesystem::directory_iterator{}) == 1);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(io::read_json(dir / "missing.json"), io::FileError);
}
