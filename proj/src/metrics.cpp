#include "xrfm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace xrfm {

double nrmse(const std::vector<double>& y_true, const std::vector<double>& y_pred) {
    if (y_true.size() != y_pred.size()) throw LengthMismatch("nrmse: length mismatch");
    const std::size_t n = y_true.size();
    if (n < 2) throw ZeroVariance("nrmse: needs at least 2 values");
    double mean = 0.0;
    for (double v : y_true) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dev = y_true[i] - mean;
        var += dev * dev;
        const double diff = y_true[i] - y_pred[i];
        sq += diff * diff;
    }
    const double sigma = std::sqrt(var / static_cast<double>(n));
    if (sigma == 0.0) throw ZeroVariance("nrmse: targets are constant");
    return std::sqrt(sq / static_cast<double>(n)) / sigma;
}

namespace {

template <typename T>
double mismatch_fraction(const std::vector<T>& a, const std::vector<T>& b) {
    if (a.size() != b.size()) throw LengthMismatch("classification_error: length mismatch");
    if (a.empty()) throw LengthMismatch("classification_error: empty label lists");
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) ++wrong;
    return static_cast<double>(wrong) / static_cast<double>(a.size());
}

} // namespace

double classification_error(const std::vector<std::string>& labels_true,
                            const std::vector<std::string>& labels_pred) {
    return mismatch_fraction(labels_true, labels_pred);
}

double classification_error(const std::vector<int>& labels_true,
                            const std::vector<int>& labels_pred) {
    return mismatch_fraction(labels_true, labels_pred);
}

double sgm(const std::vector<double>& errors, double eps) {
    if (errors.empty()) throw LengthMismatch("sgm: empty error list");
    if (!(eps > 0.0)) throw InvalidSpec("sgm: eps must be positive");
    double acc = 0.0;
    for (double e : errors) acc += std::log(eps + e);
    return std::exp(acc / static_cast<double>(errors.size()));
}

std::map<std::string, double>
minmax_normalize(const std::map<std::string, double>& errors_per_method) {
    std::map<std::string, double> out;
    if (errors_per_method.empty()) return out;
    double lo = errors_per_method.begin()->second, hi = lo;
    for (const auto& [name, e] : errors_per_method) {
        lo = std::min(lo, e);
        hi = std::max(hi, e);
    }
    // Degenerate range: every method equal, report zeros.
    const double span = hi - lo;
    for (const auto& [name, e] : errors_per_method)
        out[name] = span > 0.0 ? (e - lo) / span : 0.0;
    return out;
}

// ============================================================================
// MetricReport
// ============================================================================

void MetricReport::add(const std::string& dataset, const std::string& method, double error) {
    if (std::find(dataset_order_.begin(), dataset_order_.end(), dataset) == dataset_order_.end())
        dataset_order_.push_back(dataset);
    if (std::find(method_order_.begin(), method_order_.end(), method) == method_order_.end())
        method_order_.push_back(method);
    errors_[{dataset, method}] = error;
}

std::vector<std::string> MetricReport::datasets() const { return dataset_order_; }
std::vector<std::string> MetricReport::methods() const { return method_order_; }

double MetricReport::error_for(const std::string& dataset, const std::string& method) const {
    auto it = errors_.find({dataset, method});
    if (it == errors_.end()) throw Error("report: no entry for (" + dataset + ", " + method + ")");
    return it->second;
}

double MetricReport::sgm_for(const std::string& method, double eps) const {
    std::vector<double> errs;
    for (const auto& ds : dataset_order_) errs.push_back(error_for(ds, method));
    return sgm(errs, eps);
}

double MetricReport::mean_for(const std::string& method) const {
    double acc = 0.0;
    for (const auto& ds : dataset_order_) acc += error_for(ds, method);
    return acc / static_cast<double>(dataset_order_.size());
}

double MetricReport::normalized_mean_for(const std::string& method) const {
    double acc = 0.0;
    for (const auto& ds : dataset_order_) {
        std::map<std::string, double> per_method;
        for (const auto& m : method_order_) per_method[m] = error_for(ds, m);
        acc += minmax_normalize(per_method).at(method);
    }
    return acc / static_cast<double>(dataset_order_.size());
}

std::string MetricReport::to_csv() const {
    std::ostringstream out;
    out << "dataset,method,error\n";
    out.precision(17);
    for (const auto& ds : dataset_order_)
        for (const auto& m : method_order_) out << ds << ',' << m << ',' << error_for(ds, m) << '\n';
    for (const auto& m : method_order_)
        out << "__aggregate__," << m << "_sgm," << sgm_for(m) << '\n'
            << "__aggregate__," << m << "_mean," << mean_for(m) << '\n'
            << "__aggregate__," << m << "_normalized_mean," << normalized_mean_for(m) << '\n';
    return out.str();
}

std::string MetricReport::to_json() const {
    nlohmann::json doc;
    for (const auto& ds : dataset_order_)
        for (const auto& m : method_order_) doc["errors"][ds][m] = error_for(ds, m);
    for (const auto& m : method_order_) {
        doc["aggregates"][m]["sgm"] = sgm_for(m);
        doc["aggregates"][m]["mean"] = mean_for(m);
        doc["aggregates"][m]["normalized_mean"] = normalized_mean_for(m);
    }
    return doc.dump(2);
}

} // namespace xrfm
