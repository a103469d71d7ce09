#pragma once

// JSON encodings of predictors, worlds, aggregator configuration and risk
// reports. Malformed documents raise ContractViolation.

#include "dfreg/model.hpp"
#include "dfreg/worlds.hpp"

#include "json.hpp"

namespace dfreg::json_io {

using Json = nlohmann::json;

[[nodiscard]] Json vector_to_json(const Vector& v);
[[nodiscard]] Vector vector_from_json(const Json& j);
/// Row-major nested arrays.
[[nodiscard]] Json matrix_to_json(const Matrix& a);
[[nodiscard]] Matrix matrix_from_json(const Json& j);

/// {"variant": "Zero"|"Linear"|"TruncatedLinear"|"ForsterWarmuth"|"Midpoint"|"Truncated", ...}
[[nodiscard]] Json predictor_to_json(const Predictor& p);
[[nodiscard]] Predictor predictor_from_json(const Json& j);

/// {"atoms": [{"x": [...], "y": ..., "p": ...}], "declared_m": ...}
[[nodiscard]] Json finite_world_to_json(const FiniteWorld& w);
[[nodiscard]] FiniteWorld finite_world_from_json(const Json& j);

/// {"tag": "BadTrunc"|"Necessity"|"GaussianLinear"|"HeavyTailCov"|"FiniteCustom", ...}
[[nodiscard]] Json world_spec_to_json(const worlds::WorldSpec& spec);
[[nodiscard]] worlds::WorldSpec world_spec_from_json(const Json& j);

/// Either a WorldSpec (has "tag") or a bare finite world (has "atoms").
[[nodiscard]] worlds::World world_from_json(const Json& j);

[[nodiscard]] Json aggregator_config_to_json(const AggregatorConfig& cfg);
/// Fields absent from `j` keep the values in `base`.
[[nodiscard]] AggregatorConfig aggregator_config_from_json(const Json& j, AggregatorConfig base = {});

[[nodiscard]] Json risk_report_to_json(const RiskReport& r);

/// Parses a file; throws ContractViolation when it cannot be read or parsed.
[[nodiscard]] Json read_file(const std::string& path);

}  // namespace dfreg::json_io
