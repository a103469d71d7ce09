#include "dfreg/json_io.hpp"

#include <cmath>
#include <fstream>

namespace dfreg::json_io {

namespace {

const Json& field(const Json& j, const char* key) {
  require(j.is_object(), std::string("expected a JSON object with field '") + key + "'");
  const auto it = j.find(key);
  require(it != j.end(), std::string("missing field '") + key + "'");
  return *it;
}

double number(const Json& j, const char* what) {
  require(j.is_number(), std::string("field '") + what + "' must be a number");
  return j.get<double>();
}

int integer(const Json& j, const char* what) {
  require(j.is_number_integer(), std::string("field '") + what + "' must be an integer");
  return j.get<int>();
}

double number_field(const Json& j, const char* key) { return number(field(j, key), key); }

std::optional<double> optional_number(const Json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return number(j[key], key);
}

std::optional<int> optional_integer(const Json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return integer(j[key], key);
}

// JSON has no encoding for non-finite numbers; they are written as null.
Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::vector<std::pair<double, double>> table_from_json(const Json& j) {
  require(j.is_array(), "f_table must be an array of [x, f(x)] pairs");
  std::vector<std::pair<double, double>> out;
  for (const auto& row : j) {
    require(row.is_array() && row.size() == 2, "f_table entries must be [x, f(x)] pairs");
    out.emplace_back(number(row[0], "f_table"), number(row[1], "f_table"));
  }
  return out;
}

Json atoms_to_json(const std::vector<Atom>& atoms) {
  Json out = Json::array();
  for (const auto& a : atoms) out.push_back({{"x", vector_to_json(a.x)}, {"y", a.y}, {"p", a.p}});
  return out;
}

std::vector<Atom> atoms_from_json(const Json& j) {
  require(j.is_array(), "atoms must be an array");
  std::vector<Atom> atoms;
  for (const auto& a : j) atoms.push_back({vector_from_json(field(a, "x")), number_field(a, "y"), number_field(a, "p")});
  return atoms;
}

template <typename F>
auto guarded(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw ContractViolation(std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Vector vector_from_json(const Json& j) {
  require(j.is_array(), "expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = number(j[i], "vector entry");
  return v;
}

Json matrix_to_json(const Matrix& a) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < a.rows(); ++r) out.push_back(vector_to_json(a.row(r).transpose()));
  return out;
}

Matrix matrix_from_json(const Json& j) {
  require(j.is_array() && !j.empty(), "expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix a(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Vector row = vector_from_json(j[static_cast<std::size_t>(r)]);
    require(row.size() == cols, "matrix rows have different lengths");
    a.row(r) = row.transpose();
  }
  return a;
}

// ---------------------------------------------------------------------------

Json predictor_to_json(const Predictor& p) {
  return std::visit(
      [](const auto& v) -> Json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ZeroPredictor>) {
          return {{"variant", "Zero"}, {"dim", v.dim}};
        } else if constexpr (std::is_same_v<T, LinearPredictor>) {
          return {{"variant", "Linear"}, {"w", vector_to_json(v.w)}};
        } else if constexpr (std::is_same_v<T, TruncatedLinear>) {
          return {{"variant", "TruncatedLinear"}, {"w", vector_to_json(v.w)}, {"m", v.m}};
        } else if constexpr (std::is_same_v<T, ForsterWarmuth>) {
          Json out = {{"variant", "ForsterWarmuth"}, {"w", vector_to_json(v.w)}, {"gram", matrix_to_json(v.gram)}};
          if (v.m_clip) out["m_clip"] = *v.m_clip;
          return out;
        } else if constexpr (std::is_same_v<T, Midpoint>) {
          return {{"variant", "Midpoint"}, {"first", predictor_to_json(*v.first)}, {"second", predictor_to_json(*v.second)}};
        } else {
          return {{"variant", "Truncated"}, {"inner", predictor_to_json(*v.inner)}, {"m", v.m}};
        }
      },
      p.value);
}

Predictor predictor_from_json(const Json& j) {
  return guarded([&]() -> Predictor {
    const auto& tag = field(j, "variant");
    require(tag.is_string(), "field 'variant' must be a string");
    const auto name = tag.get<std::string>();
    if (name == "Zero") {
      const int dim = j.contains("dim") ? integer(j["dim"], "dim") : 1;
      require(dim >= 1, "Zero: dim must be >= 1");
      return ZeroPredictor{dim};
    }
    if (name == "Linear") return LinearPredictor{vector_from_json(field(j, "w"))};
    if (name == "TruncatedLinear") {
      const double m = number_field(j, "m");
      require(m > 0.0, "TruncatedLinear: m must be positive");
      return TruncatedLinear{vector_from_json(field(j, "w")), m};
    }
    if (name == "ForsterWarmuth") {
      return ForsterWarmuth(vector_from_json(field(j, "w")), matrix_from_json(field(j, "gram")),
                            optional_number(j, "m_clip"));
    }
    if (name == "Midpoint") {
      return make_midpoint(predictor_from_json(field(j, "first")), predictor_from_json(field(j, "second")));
    }
    if (name == "Truncated") {
      const double m = number_field(j, "m");
      require(m > 0.0, "Truncated: m must be positive");
      return Truncated{share(predictor_from_json(field(j, "inner"))), m};
    }
    throw ContractViolation("unknown predictor variant '" + name + "'");
  });
}

// ---------------------------------------------------------------------------

Json finite_world_to_json(const FiniteWorld& w) {
  return {{"atoms", atoms_to_json(w.atoms())}, {"declared_m", w.declared_m()}};
}

FiniteWorld finite_world_from_json(const Json& j) {
  return guarded([&] { return FiniteWorld(atoms_from_json(field(j, "atoms")), optional_number(j, "declared_m")); });
}

Json world_spec_to_json(const worlds::WorldSpec& spec) {
  return std::visit(
      [](const auto& s) -> Json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, worlds::BadTruncSpec>) {
          return {{"tag", "BadTrunc"}, {"n", s.n}, {"m", s.m}};
        } else if constexpr (std::is_same_v<T, worlds::NecessitySpec>) {
          Json out = {{"tag", "Necessity"}, {"n", s.n}, {"delta", s.delta}, {"f_scale", s.f_scale}};
          if (s.x0) out["x0"] = *s.x0;
          if (!s.f_table.empty()) {
            Json table = Json::array();
            for (const auto& [x, fx] : s.f_table) table.push_back({x, fx});
            out["f_table"] = table;
          }
          return out;
        } else if constexpr (std::is_same_v<T, worlds::GaussianLinearSpec>) {
          Json out = {{"tag", "GaussianLinear"}, {"d", s.d}, {"noise_std", s.noise_std}, {"m_clip", s.m_clip}};
          if (s.w0) out["w0"] = vector_to_json(*s.w0);
          return out;
        } else if constexpr (std::is_same_v<T, worlds::HeavyTailCovSpec>) {
          Json out = {{"tag", "HeavyTailCov"}, {"d", s.d}, {"tail_index", s.tail_index}, {"m", s.m}};
          if (s.w0) out["w0"] = vector_to_json(*s.w0);
          return out;
        } else {
          Json out = {{"tag", "FiniteCustom"}, {"atoms", atoms_to_json(s.atoms)}};
          if (s.declared_m) out["declared_m"] = *s.declared_m;
          return out;
        }
      },
      spec);
}

worlds::WorldSpec world_spec_from_json(const Json& j) {
  return guarded([&]() -> worlds::WorldSpec {
    const auto& tag = field(j, "tag");
    require(tag.is_string(), "field 'tag' must be a string");
    const auto name = tag.get<std::string>();
    if (name == "BadTrunc") {
      worlds::BadTruncSpec s;
      s.n = integer(field(j, "n"), "n");
      if (j.contains("m")) s.m = number(j["m"], "m");
      return s;
    }
    if (name == "Necessity") {
      worlds::NecessitySpec s;
      s.n = integer(field(j, "n"), "n");
      s.delta = number_field(j, "delta");
      s.x0 = optional_number(j, "x0");
      if (j.contains("f_scale")) s.f_scale = number(j["f_scale"], "f_scale");
      if (j.contains("f_table")) s.f_table = table_from_json(j["f_table"]);
      return s;
    }
    if (name == "GaussianLinear") {
      worlds::GaussianLinearSpec s;
      s.d = integer(field(j, "d"), "d");
      if (j.contains("noise_std")) s.noise_std = number(j["noise_std"], "noise_std");
      if (j.contains("m_clip")) s.m_clip = number(j["m_clip"], "m_clip");
      if (j.contains("w0")) s.w0 = vector_from_json(j["w0"]);
      return s;
    }
    if (name == "HeavyTailCov") {
      worlds::HeavyTailCovSpec s;
      s.d = integer(field(j, "d"), "d");
      if (j.contains("tail_index")) s.tail_index = number(j["tail_index"], "tail_index");
      if (j.contains("m")) s.m = number(j["m"], "m");
      if (j.contains("w0")) s.w0 = vector_from_json(j["w0"]);
      return s;
    }
    if (name == "FiniteCustom") {
      return worlds::FiniteCustomSpec{atoms_from_json(field(j, "atoms")), optional_number(j, "declared_m")};
    }
    throw ContractViolation("unknown world tag '" + name + "'");
  });
}

worlds::World world_from_json(const Json& j) {
  if (j.is_object() && j.contains("tag")) return worlds::build_world(world_spec_from_json(j));
  return finite_world_from_json(j);
}

// ---------------------------------------------------------------------------

Json aggregator_config_to_json(const AggregatorConfig& cfg) {
  Json out = {{"m", cfg.m}, {"delta", cfg.delta}, {"pool_size", cfg.pool_size}};
  out["eps"] = cfg.eps ? Json(*cfg.eps) : Json(nullptr);
  out["k"] = cfg.k ? Json(*cfg.k) : Json(nullptr);
  out["alpha"] = cfg.alpha ? Json(*cfg.alpha) : Json(nullptr);
  out["net_cap"] = cfg.net_cap ? Json(*cfg.net_cap) : Json(nullptr);
  return out;
}

AggregatorConfig aggregator_config_from_json(const Json& j, AggregatorConfig base) {
  return guarded([&] {
    require(j.is_object(), "aggregator options must be a JSON object");
    if (j.contains("m")) base.m = number(j["m"], "m");
    if (j.contains("delta")) base.delta = number(j["delta"], "delta");
    if (auto v = optional_number(j, "eps")) base.eps = v;
    if (auto v = optional_integer(j, "k")) base.k = v;
    if (auto v = optional_number(j, "alpha")) base.alpha = v;
    if (auto v = optional_integer(j, "net_cap")) base.net_cap = v;
    if (j.contains("pool_size")) base.pool_size = integer(j["pool_size"], "pool_size");
    base.validate();
    return base;
  });
}

Json risk_report_to_json(const RiskReport& r) {
  Json out = {{"estimator_id", r.estimator_id},
              {"replication", r.replication},
              {"seed", r.seed},
              {"n", r.n},
              {"d", r.d},
              {"m", r.m},
              {"delta", r.delta},
              {"risk", finite_or_null(r.risk)},
              {"best_linear_risk", finite_or_null(r.best_linear_risk)},
              {"excess_risk", finite_or_null(r.excess_risk)},
              {"wall_ms", r.wall_ms},
              {"risk_se", finite_or_null(r.risk_se)}};
  if (r.error) out["error"] = *r.error;
  return out;
}

Json read_file(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ContractViolation("cannot parse '" + path + "': " + e.what());
  }
}

}  // namespace dfreg::json_io
