#pragma once

#include <json.hpp>
#include <string>

#include "ope/numeric.hpp"

namespace ope {

using Json = nlohmann::json;

/// Reads a JSON array of numbers into a vector; throws ParseError with
/// `context` on shape or type problems.
Vector vector_from_json(const Json& j, const std::string& context);

/// Reads a row-major nested array [rows][cols] into a matrix.
Matrix matrix_from_json(const Json& j, const std::string& context);

Json to_json(const Vector& v);
Json to_json(const Matrix& m);

/// Fetches a required field, throwing ParseError naming the missing key.
const Json& require_field(const Json& j, const std::string& key, const std::string& context);

}  // namespace ope
