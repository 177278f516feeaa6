#include "ope/json_util.hpp"

#include "ope/errors.hpp"

namespace ope {

Vector vector_from_json(const Json& j, const std::string& context) {
  if (!j.is_array()) throw ParseError(context + ": expected an array of numbers");
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ParseError(context + ": non-numeric entry at index " + std::to_string(i));
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

Matrix matrix_from_json(const Json& j, const std::string& context) {
  if (!j.is_array() || j.empty()) throw ParseError(context + ": expected a non-empty nested array");
  const std::size_t rows = j.size();
  if (!j[0].is_array()) throw ParseError(context + ": expected rows to be arrays");
  const std::size_t cols = j[0].size();
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw ParseError(context + ": ragged row " + std::to_string(r));
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number())
        throw ParseError(context + ": non-numeric entry at (" + std::to_string(r) + "," + std::to_string(c) + ")");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return m;
}

Json to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json to_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

const Json& require_field(const Json& j, const std::string& key, const std::string& context) {
  const auto it = j.find(key);
  if (it == j.end()) throw ParseError(context + ": missing field '" + key + "'");
  return *it;
}

}  // namespace ope
