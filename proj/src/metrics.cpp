#include <algorithm>
#include <cmath>

#include "sisurr/error.hpp"
#include "sisurr/pipeline.hpp"

namespace sisurr {

namespace {

double median_of(std::vector<double> v)
{
    if (v.empty()) return std::nan("");
    const auto mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

json optional_number(const std::optional<double>& v)
{
    return v ? json(*v) : json(nullptr);
}

}  // namespace

Eigen::VectorXd contour_nrmse(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred)
{
    if (truth.rows() != pred.rows() || truth.cols() != pred.cols())
        fail(ErrorCode::dimension_mismatch, "prediction and truth shapes differ");
    Eigen::VectorXd out(truth.rows());
    for (Eigen::Index i = 0; i < truth.rows(); ++i) {
        const double swing = truth.row(i).maxCoeff() - truth.row(i).minCoeff();
        const double rmse = std::sqrt((truth.row(i) - pred.row(i)).squaredNorm() / static_cast<double>(truth.cols()));
        out[i] = swing > 0 ? 100.0 * rmse / swing : std::nan("");
    }
    return out;
}

MetricReport evaluate_predictions(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred,
                                  const std::vector<std::string>& names, bool contour)
{
    if (truth.rows() != pred.rows() || truth.cols() != pred.cols())
        fail(ErrorCode::dimension_mismatch, "prediction and truth shapes differ");
    if (truth.rows() == 0) fail(ErrorCode::insufficient_data, "no test rows to evaluate");
    if (static_cast<Eigen::Index>(names.size()) != truth.cols())
        fail(ErrorCode::dimension_mismatch, "target names do not match the prediction width");
    MetricReport r;
    r.targets = names;
    const auto m = truth.cols();
    const auto n = static_cast<double>(truth.rows());
    r.rmse.resize(m);
    r.r2.resize(m);
    r.r2_constant.assign(static_cast<std::size_t>(m), 0);
    for (Eigen::Index c = 0; c < m; ++c) {
        const double ss_res = (truth.col(c) - pred.col(c)).squaredNorm();
        const double ss_tot = (truth.col(c).array() - truth.col(c).mean()).square().sum();
        r.rmse[c] = std::sqrt(ss_res / n);
        if (ss_tot > 0) {
            r.r2[c] = 1.0 - ss_res / ss_tot;
        } else {
            r.r2[c] = 1.0;
            r.r2_constant[static_cast<std::size_t>(c)] = 1;
        }
    }
    r.rmse_overall = std::sqrt((truth - pred).squaredNorm() / static_cast<double>(truth.size()));
    r.r2_mean = r.r2.mean();
    if (contour) {
        const Eigen::VectorXd e = contour_nrmse(truth, pred);
        std::vector<double> kept;
        for (Eigen::Index i = 0; i < e.size(); ++i)
            if (std::isfinite(e[i])) kept.push_back(e[i]);
        r.nrmse_excluded = static_cast<std::size_t>(e.size()) - kept.size();
        if (!kept.empty()) {
            double s = 0;
            for (double v : kept) s += v;
            r.nrmse_mean = s / static_cast<double>(kept.size());
            r.nrmse_median = median_of(kept);
        }
    }
    return r;
}

json MetricReport::numbers_json() const
{
    return {{"model", model},
            {"block", block},
            {"train_size", train_size},
            {"seed", seed},
            {"targets", targets},
            {"rmse", std::vector<double>(rmse.data(), rmse.data() + rmse.size())},
            {"r2", std::vector<double>(r2.data(), r2.data() + r2.size())},
            {"r2_constant", r2_constant},
            {"rmse_overall", rmse_overall},
            {"r2_mean", r2_mean},
            {"nrmse_mean", optional_number(nrmse_mean)},
            {"nrmse_median", optional_number(nrmse_median)},
            {"nrmse_excluded", nrmse_excluded},
            {"skipped", skipped},
            {"skip_reason", skip_reason}};
}

json MetricReport::to_json() const
{
    json j = numbers_json();
    j["train_seconds"] = train_seconds;
    j["predict_seconds"] = predict_seconds;
    j["model_report"] = model_report;
    return j;
}

}  // namespace sisurr
