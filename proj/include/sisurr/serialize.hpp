#pragma once

#include <Eigen/Dense>
#include <json.hpp>

namespace sisurr {

using json = nlohmann::json;

/// {"rows": r, "cols": c, "data": [row-major values]}. nlohmann prints doubles
/// in shortest round-trip form, so values survive bit-exactly.
json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const json& j);
json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const json& j);

}  // namespace sisurr
