#pragma once

#include <Eigen/Core>

#include <vector>

#include "json.hpp"

#include "hgeo/errors.hpp"

namespace hgeo::detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  require(j.is_array(), "expected a JSON array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    require(static_cast<Eigen::Index>(row.size()) == cols, "ragged matrix in JSON");
    for (Eigen::Index jj = 0; jj < cols; ++jj) m(i, jj) = row.at(static_cast<std::size_t>(jj)).get<double>();
  }
  return m;
}

}  // namespace hgeo::detail
