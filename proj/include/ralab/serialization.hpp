#pragma once

#include <string>

#include "json.hpp"
#include "ralab/core.hpp"
#include "ralab/discriminators.hpp"
#include "ralab/generators.hpp"

namespace ralab {

// Matrices are stored row-major as nested arrays; doubles print with 17
// significant digits, so every round trip is exact.
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);

nlohmann::json to_json(const GaussianSpec& spec);
nlohmann::json to_json(const MixtureSpec& spec);
nlohmann::json to_json(const InvertibleGeneratorSpec& spec);
nlohmann::json to_json(const InjectiveGeneratorSpec& spec);
nlohmann::json to_json(const LogDensityNetSpec& spec);

GaussianSpec gaussian_from_json(const nlohmann::json& j);
MixtureSpec mixture_from_json(const nlohmann::json& j);
InvertibleGeneratorSpec invertible_from_json(const nlohmann::json& j);
InjectiveGeneratorSpec injective_from_json(const nlohmann::json& j);
LogDensityNetSpec logdensity_net_from_json(const nlohmann::json& j);

// Text form of to_json with the "family" tag checked on the way back.
std::string serialize(const InvertibleGeneratorSpec& spec);
InvertibleGeneratorSpec deserialize_invertible(const std::string& text);

}  // namespace ralab
