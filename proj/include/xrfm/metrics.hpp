#pragma once

#include <map>
#include <string>
#include <vector>

#include "xrfm/errors.hpp"

namespace xrfm {

// ============================================================================
// Evaluation metrics and cross-dataset aggregates
// ============================================================================

/// RMSE divided by the population std of y_true. 1.0 corresponds to
/// predicting the mean. Throws ZeroVariance for constant targets.
double nrmse(const std::vector<double>& y_true, const std::vector<double>& y_pred);

/// Fraction of mismatched labels.
double classification_error(const std::vector<std::string>& labels_true,
                            const std::vector<std::string>& labels_pred);
double classification_error(const std::vector<int>& labels_true,
                            const std::vector<int>& labels_pred);

/// Shifted geometric mean exp(mean(log(eps + e_i))).
double sgm(const std::vector<double>& errors, double eps = 0.01);

/// (E_j - E_min) / (E_max - E_min) per method. All-equal inputs return
/// all zeros (degenerate range).
std::map<std::string, double> minmax_normalize(const std::map<std::string, double>& errors_per_method);

/// Per-(dataset, method) errors plus the aggregate rows the benchmark
/// harness emits.
class MetricReport {
  public:
    void add(const std::string& dataset, const std::string& method, double error);

    std::vector<std::string> datasets() const;
    std::vector<std::string> methods() const;
    double error_for(const std::string& dataset, const std::string& method) const;

    double sgm_for(const std::string& method, double eps = 0.01) const;
    double mean_for(const std::string& method) const;
    /// Mean over datasets of the min-max normalized error across methods.
    double normalized_mean_for(const std::string& method) const;

    std::string to_csv() const;
    std::string to_json() const;

  private:
    std::map<std::pair<std::string, std::string>, double> errors_;
    std::vector<std::string> dataset_order_;
    std::vector<std::string> method_order_;
};

} // namespace xrfm
