#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "xrfm/kernels.hpp"
#include "xrfm/linalg.hpp"

namespace xrfm {

enum class TaskKind { regression, classification };

// ============================================================================
// Leaf RFM: alternate kernel ridge fits and AGOP feature-matrix updates
// ============================================================================

struct LeafHyperparams {
    KernelSpec kernel;
    double ridge = 1e-3;               // lambda
    int iterations = 8;                // tau
    bool diagonal = false;             // use only the diagonal of the AGOP
    double stability_eps = 1e-12;      // epsilon in the normalization step
    double early_stop_multiplier = 1.06;
    double transform_exponent = 0.5;   // power applied to M for the transform

    void validate() const;
};

/// A trained leaf predictor: ridge coefficients, the feature transform from
/// the best iteration, the kernel with its effective bandwidth, and the
/// stored training inputs.
struct LeafModel {
    Matrix alpha;                        // n x c
    bool diagonal = false;
    Matrix transform;                    // d x d M^e (full mode)
    std::vector<double> diag_transform;  // d weights diag(M)^e (diagonal mode)
    Matrix feature_matrix;               // M at the best iteration (full mode)
    std::vector<double> feature_diag;    // diag(M) at the best iteration
    KernelSpec kernel;                   // bandwidth already adapted
    Matrix x_train;
    int best_iteration = 0;
    double best_val_error = std::numeric_limits<double>::infinity();

    std::size_t dim() const { return x_train.cols(); }
    std::size_t outputs() const { return alpha.cols(); }

    /// Applies the feature transform to a batch of rows.
    Matrix transform_rows(const Matrix& x) const;
};

/// Tracks the best validation error over iterations and decides when the
/// loop stops (current error above multiplier * best so far).
class BestIterationTracker {
  public:
    enum class Step { improved, kept, stop };

    explicit BestIterationTracker(double multiplier) : multiplier_(multiplier) {}

    Step observe(double val_error) {
        ++count_;
        if (val_error < best_error_) {
            best_error_ = val_error;
            best_iteration_ = count_ - 1;
            return Step::improved;
        }
        if (val_error > multiplier_ * best_error_) return Step::stop;
        return Step::kept;
    }

    int best_iteration() const { return best_iteration_; }
    double best_error() const { return best_error_; }
    int evaluated() const { return count_; }

  private:
    double multiplier_;
    double best_error_ = std::numeric_limits<double>::infinity();
    int best_iteration_ = -1;
    int count_ = 0;
};

/// Validation error used for iteration selection and tuning: nRMSE for
/// regression (plain RMSE when the targets are constant), classification
/// error (argmax mismatch rate) otherwise.
double validation_error(TaskKind task, const Matrix& y_true, const Matrix& y_pred);

/// Fits a leaf RFM. `seed` feeds the bandwidth-adaptation subsample.
LeafModel fit_leaf_rfm(const Matrix& x, const Matrix& y, const Matrix& x_val, const Matrix& y_val,
                       const LeafHyperparams& hyper, TaskKind task, std::uint64_t seed = 0);

/// Average gradient outer product (1/n) sum_i J(x_i) J(x_i)^T of the leaf
/// predictor at the rows of x, gradients taken in input space through the
/// transform. When x is the model's own training set (same row count) the
/// kernel term between a point and itself is excluded.
Matrix compute_agop(const LeafModel& model, const Matrix& x);

/// K(transform(xq), transform(x_train)) * alpha, evaluated in bounded
/// query chunks. Throws DimensionMismatch on a column-count mismatch.
Matrix predict_leaf(const LeafModel& model, const Matrix& xq);

namespace detail {

/// Input-space gradient rows of the kernel predictor: for each query row
/// the d x c Jacobian is flattened into c consecutive rows of the result
/// ((n*c) x d). `transform`/`diag_transform` back-propagate through the
/// feature map; pass nullptr for an identity transform.
Matrix predictor_gradients(const KernelSpec& spec, const Matrix& xm_query, const Matrix& xm_train,
                           const Matrix& alpha, bool self_exclude, const Matrix* transform,
                           const std::vector<double>* diag_transform);

/// (1/n) G^T G assembled entry-wise (sequential reduction per entry).
Matrix gradient_outer_mean(const Matrix& g, std::size_t n_points);

/// Diagonal of (1/n) G^T G without forming the full product.
std::vector<double> gradient_outer_mean_diag(const Matrix& g, std::size_t n_points);

} // namespace detail

} // namespace xrfm
