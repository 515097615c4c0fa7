#include "sisurr/serialize.hpp"

#include "sisurr/error.hpp"

namespace sisurr {

json matrix_to_json(const Eigen::MatrixXd& m)
{
    json data = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd matrix_from_json(const json& j)
{
    const auto r = j.at("rows").get<Eigen::Index>();
    const auto c = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (r < 0 || c < 0 || data.size() != static_cast<std::size_t>(r * c))
        fail(ErrorCode::parse_error, "matrix payload has " + std::to_string(data.size()) + " values for " +
                                         std::to_string(r) + "x" + std::to_string(c));
    Eigen::MatrixXd m(r, c);
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index jj = 0; jj < c; ++jj) m(i, jj) = data[k++].get<double>();
    return m;
}

json vector_to_json(const Eigen::VectorXd& v)
{
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from_json(const json& j)
{
    auto v = j.get<std::vector<double>>();
    return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace sisurr
