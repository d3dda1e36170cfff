#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "btlab/decomposition.hpp"
#include "btlab/metrics.hpp"
#include "btlab/optimizer.hpp"
#include "btlab/stability_lab.hpp"
#include "json.hpp"

namespace btlab::io {

using nlohmann::json;

/// Input does not match the documented schema. what() starts with the
/// offending field, e.g. "mu_plus[1].mass: expected a number".
class SchemaError : public DomainError {
 public:
  using DomainError::DomainError;
};

class FileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// x rounded to 12 significant digits (the %.12g value).
double round12(double x);

struct InstanceFile {
  Config config;
  bool has_alpha = true;  // false when the file left alpha to the command line
  AtomicMeasure mu_minus, mu_plus;
  std::optional<TrafficPath> path;
};

json to_json(const Point& p);
json to_json(const AtomicMeasure& m);
json to_json(const TrafficPath& T);
json to_json(const PathMeasure& pi);
json to_json(const InstanceFile& f);
json to_json(const MeasureSpec& s);
json to_json(const ExperimentConfig& cfg);
json to_json(const TrialReport& r);
json to_json(const CompetitorReport& r);
json to_json(const DecompositionCheck& c);
json to_json(const FlatDistance& d);

Point parse_point(const json& j, int dim, const std::string& where);
AtomicMeasure parse_measure(const json& j, int dim, const std::string& where);
TrafficPath parse_path(const json& j, int dim, const std::string& where);
InstanceFile parse_instance(const json& j);
ExperimentConfig parse_experiment(const json& j);

/// Canonical text: sorted keys, two-space indent, trailing newline.
std::string dump(const json& j);

json read_json(const std::filesystem::path& file);
/// Writes through a temporary in the same directory and renames.
void write_atomic(const std::filesystem::path& file, const std::string& content);

/// One row per n, columns
/// n,cost_n,boundary_gap_minus,boundary_gap_plus,flat_gap_T,costs_bounded,gaps_vanish,limit_optimal,lsc_holds,verdict
std::string trial_csv(const TrialReport& r);

/// 1000x1000 drawing: edges with width proportional to theta^alpha,
/// sources blue and sinks red with area proportional to mass. d = 3 is
/// drawn in its (x, y) projection.
std::string render_svg(const TrafficPath& T, const AtomicMeasure& mu_minus, const AtomicMeasure& mu_plus,
                       double alpha);

}  // namespace btlab::io
