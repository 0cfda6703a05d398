#include "zrpfluid/model_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace zrpfluid {

namespace {

[[noreturn]] void located(const std::string& where, const std::string& what,
                          ErrorCode code = ErrorCode::InvalidArgument) {
  throw Error(code, where + ": " + what);
}

double number_at(const Json& v, const std::string& where) {
  if (!v.is_number()) located(where, "expected a number");
  return v.get<double>();
}

const Json& member(const Json& doc, const char* key, const std::string& where = "") {
  if (!doc.is_object()) located(where.empty() ? "document" : where, "expected an object");
  auto it = doc.find(key);
  if (it == doc.end()) {
    located(where.empty() ? std::string(key) : where + "." + key, "missing required field");
  }
  return *it;
}

}  // namespace

RateMatrix parse_rate_matrix(const Json& doc) {
  const Json& sites = member(doc, "sites");
  const Json& rates = member(doc, "rates");
  if (!sites.is_array()) located("sites", "expected an array of labels");
  if (sites.empty()) located("sites", "no sites given", ErrorCode::EmptySiteSet);
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const Json& s = sites[i];
    const std::string where = "sites[" + std::to_string(i) + "]";
    if (s.is_string()) {
      labels.push_back(s.get<std::string>());
    } else if (s.is_number_integer()) {
      labels.push_back(std::to_string(s.get<long long>()));
    } else {
      located(where, "expected a string label");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (labels[j] == labels[i]) located(where, "duplicate label '" + labels[i] + "'");
    }
  }
  if (!rates.is_array() || rates.size() != labels.size()) {
    located("rates", "expected " + std::to_string(labels.size()) + " rows", ErrorCode::NotSquare);
  }
  const auto n = static_cast<Eigen::Index>(labels.size());
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Json& row = rates[i];
    const std::string where = "rates[" + std::to_string(i) + "]";
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
      located(where, "expected " + std::to_string(n) + " entries", ErrorCode::NotSquare);
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      m(i, j) = number_at(row[j], where + "[" + std::to_string(j) + "]");
    }
  }
  return RateMatrix::validate(m, std::move(labels));
}

JumpRateFunction parse_jump_rate(const Json& doc, const std::string& where) {
  const Json& kind = member(doc, "kind", where);
  if (!kind.is_string()) located(where + ".kind", "expected a string");
  const auto name = kind.get<std::string>();
  try {
    if (name == "constant") return JumpRateFunction::constant();
    if (name == "evans") return JumpRateFunction::evans(number_at(member(doc, "b", where), where + ".b"));
    if (name == "table") {
      const Json& values = member(doc, "values", where);
      if (!values.is_array()) located(where + ".values", "expected an array");
      std::vector<double> g;
      for (std::size_t k = 0; k < values.size(); ++k) {
        g.push_back(number_at(values[k], where + ".values[" + std::to_string(k) + "]"));
      }
      const double tail = doc.contains("tail") ? number_at(doc["tail"], where + ".tail") : 1.0;
      return JumpRateFunction::table(std::move(g), tail);
    }
  } catch (const Error& e) {
    if (std::string(e.what()).starts_with(where)) throw;
    located(where, e.what(), e.code());
  }
  located(where + ".kind", "unknown kind '" + name + "' (constant, evans, table)");
}

SimplexPoint parse_point(const Json& doc, const RateMatrix& r, const std::string& where,
                         double tol) {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(r.size()));
  if (doc.is_array()) {
    if (doc.size() != r.size()) {
      located(where, "expected " + std::to_string(r.size()) + " coordinates");
    }
    for (std::size_t i = 0; i < doc.size(); ++i) {
      v[static_cast<Eigen::Index>(i)] = number_at(doc[i], where + "[" + std::to_string(i) + "]");
    }
  } else if (doc.is_object()) {
    for (const auto& [label, value] : doc.items()) {
      const auto idx = r.index_of(label);
      if (!idx) located(where + "." + label, "unknown site", ErrorCode::UnknownSite);
      v[*idx] = number_at(value, where + "." + label);
    }
  } else {
    located(where, "expected an array or a {label: mass} object");
  }
  try {
    return SimplexPoint::make(std::move(v), tol);
  } catch (const Error& e) {
    located(where, e.what(), e.code());
  }
}

ModelSpec parse_model(const Json& doc) {
  ModelSpec spec{parse_rate_matrix(doc), std::nullopt, std::nullopt, std::nullopt};
  if (doc.contains("tol")) {
    spec.tol = number_at(doc["tol"], "tol");
    if (!(*spec.tol > 0.0)) located("tol", "must be positive");
  }
  if (doc.contains("g")) spec.jump_rate = parse_jump_rate(doc["g"]);
  if (doc.contains("u")) {
    spec.initial_point = parse_point(doc["u"], spec.rates, "u", spec.tol.value_or(kDefaultTolerance));
  }
  return spec;
}

ExperimentSpec parse_experiment(const Json& doc) {
  ExperimentSpec spec{parse_model(doc), {}, 1.0, 1, 0, {}};
  if (!spec.model.jump_rate) located("g", "missing required field");
  if (!spec.model.initial_point) located("u", "missing required field");

  const Json& ns = member(doc, "N");
  if (!ns.is_array() || ns.empty()) located("N", "expected a nonempty array of particle counts");
  for (std::size_t k = 0; k < ns.size(); ++k) {
    if (!ns[k].is_number_integer() || ns[k].get<long long>() < 1) {
      located("N[" + std::to_string(k) + "]", "expected a positive integer");
    }
    spec.particle_counts.push_back(ns[k].get<std::int64_t>());
  }
  spec.horizon = number_at(member(doc, "T"), "T");
  if (!(spec.horizon > 0.0)) located("T", "must be positive");
  const Json& trials = member(doc, "trials");
  if (!trials.is_number_integer() || trials.get<long long>() < 1) {
    located("trials", "expected a positive integer");
  }
  spec.trials = trials.get<std::size_t>();
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) located("seed", "expected a nonnegative integer");
    spec.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("thresholds")) {
    const Json& th = doc["thresholds"];
    if (!th.is_object()) located("thresholds", "expected an object");
    if (th.contains("require_decreasing")) {
      if (!th["require_decreasing"].is_boolean()) {
        located("thresholds.require_decreasing", "expected a boolean");
      }
      spec.thresholds.require_decreasing = th["require_decreasing"].get<bool>();
    }
    if (th.contains("max_final_median")) {
      spec.thresholds.max_final_median =
          number_at(th["max_final_median"], "thresholds.max_final_median");
    }
  }
  return spec;
}

SiteSet parse_site_list(const std::string& text, const RateMatrix& r) {
  SiteSet out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    const std::string label = item.substr(b, e - b + 1);
    const auto idx = r.index_of(label);
    if (!idx) throw Error(ErrorCode::UnknownSite, "unknown site '" + label + "'");
    out.insert(*idx);
  }
  return out;
}

Json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
}

Json to_json(const RateMatrix& r) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < r.rates().rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < r.rates().cols(); ++j) row.push_back(r.rates()(i, j));
    rows.push_back(std::move(row));
  }
  return Json{{"sites", r.labels()}, {"rates", std::move(rows)}};
}

Json to_json(const RateMatrix& r, SiteSet s) { return Json(labels_of(r, s)); }

std::string format_number(double value) {
  if (value == 0.0) value = 0.0;  // no "-0"
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  return buf;
}

}  // namespace zrpfluid
