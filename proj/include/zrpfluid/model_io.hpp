#pragma once

// JSON documents for models and experiments, CSV helpers.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "zrpfluid/fluid.hpp"
#include "zrpfluid/markov_core.hpp"
#include "zrpfluid/zrp_sim.hpp"

namespace zrpfluid {

using Json = nlohmann::json;

/// Rate matrix document {"sites": [...], "rates": [[...]]} plus optional
/// "g", "u" and "tol" entries.
struct ModelSpec {
  RateMatrix rates;
  std::optional<JumpRateFunction> jump_rate;
  std::optional<SimplexPoint> initial_point;
  std::optional<double> tol;
};

struct ExperimentThresholds {
  bool require_decreasing = true;
  std::optional<double> max_final_median;  // median sup-distance at the largest N
};

struct ExperimentSpec {
  ModelSpec model;  // jump_rate and initial_point are required
  std::vector<std::int64_t> particle_counts;
  double horizon = 1.0;
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  ExperimentThresholds thresholds;
};

/// Errors carry a location into the document, e.g. "rates[1][2]" or
/// "sites[0]". Model errors keep the code of the underlying failure.
RateMatrix parse_rate_matrix(const Json& doc);
JumpRateFunction parse_jump_rate(const Json& doc, const std::string& where = "g");
SimplexPoint parse_point(const Json& doc, const RateMatrix& r, const std::string& where = "u",
                         double tol = kDefaultTolerance);
ModelSpec parse_model(const Json& doc);
ExperimentSpec parse_experiment(const Json& doc);

/// Comma-separated site labels, e.g. "0,2". Throws UnknownSite.
SiteSet parse_site_list(const std::string& text, const RateMatrix& r);

Json load_json_file(const std::filesystem::path& path);

Json to_json(const RateMatrix& r);
Json to_json(const RateMatrix& r, SiteSet s);  // label list

/// %.12g, the numeric format of every CSV cell.
std::string format_number(double value);

}  // namespace zrpfluid
