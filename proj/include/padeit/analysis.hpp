#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "padeit/frames.hpp"
#include "padeit/perturb.hpp"

namespace padeit {

/// Per-channel mean of the last ceil(window_seconds * rate) frames, or of all
/// frames when the series is shorter.
FrameVector window_mean(const FrameSeries& series, double window_seconds);

/// frame[i] - frame[0] for every frame.
FrameSeries baseline_subtract(const FrameSeries& series);

/// Means of consecutive non-overlapping groups; a trailing partial group is
/// dropped. The output rate is rate / group_size.
FrameSeries group_average(const FrameSeries& series, int group_size);

/// value[i] / value[0]. Throws DataError when the first value is zero.
std::vector<double> normalize_to_start(std::span<const double> curve);

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);
double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct ClassifierOptions {
    double l2 = 1e-3;
    double tolerance = 1e-6; ///< stop when the gradient norm drops below this
    int max_iterations = 10000;
};

/// Multinomial logistic regression over standardised features.
class ClassifierModel {
public:
    ClassifierModel(std::vector<double> labels, Eigen::MatrixXd weights, Eigen::VectorXd bias,
                    Eigen::VectorXd mean, Eigen::VectorXd scale, int iterations, double gradient_norm);

    const std::vector<double>& labels() const noexcept { return labels_; }
    /// classes x features, acting on standardised features
    const Eigen::MatrixXd& weights() const noexcept { return weights_; }
    const Eigen::VectorXd& bias() const noexcept { return bias_; }
    const Eigen::VectorXd& feature_mean() const noexcept { return mean_; }
    const Eigen::VectorXd& feature_scale() const noexcept { return scale_; }
    int iterations() const noexcept { return iterations_; }
    double gradient_norm() const noexcept { return gradient_norm_; }

    /// Class probabilities in label order.
    Eigen::VectorXd probabilities(const Eigen::VectorXd& features) const;
    /// Most probable label; ties go to the lower label.
    double predict(const Eigen::VectorXd& features) const;

private:
    std::vector<double> labels_;
    Eigen::MatrixXd weights_;
    Eigen::VectorXd bias_;
    Eigen::VectorXd mean_;
    Eigen::VectorXd scale_;
    int iterations_;
    double gradient_norm_;
};

/// Fits on rows x features with one label per row (at least two distinct).
/// Full-batch gradient descent from zero weights with a backtracking step.
ClassifierModel fit_classifier(const Eigen::MatrixXd& features, std::span<const double> labels,
                               const ClassifierOptions& options = {});

/// Fits on every row whose group differs from `held_out_group`.
ClassifierModel train_classifier(const LabeledDataset& dataset, std::optional<int> held_out_group,
                                 const ClassifierOptions& options = {});

struct GroupAccuracy {
    int group = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    double accuracy = 0.0;
};

struct LooResult {
    std::vector<GroupAccuracy> groups; ///< ascending group
    double mean_accuracy = 0.0;
};

/// Leave-one-group-out over the rows whose label is in `classes`.
LooResult evaluate_loo(const LabeledDataset& dataset, const std::vector<double>& classes,
                       const ClassifierOptions& options = {}, int threads = 1);

/// CSV: group,n_train,n_test,accuracy
void write_loo_csv(std::ostream& out, const LooResult& result);

struct RocPoint {
    double threshold = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
};

/// Step ROC: thresholds are +inf, the midpoints between consecutive distinct
/// scores (descending) and -inf; a score >= threshold counts as positive.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> positive);

/// Trapezoidal area under roc_curve, evaluated in integer counts so that it
/// equals mann_whitney_auc bit for bit.
double roc_auc(std::span<const double> scores, std::span<const int> positive);

/// P(score_pos > score_neg) + 0.5 P(tie) by pairwise comparison.
double mann_whitney_auc(std::span<const double> scores, std::span<const int> positive);

struct BinaryEval {
    double auc = 0.0;
    double accuracy = 0.0; ///< at probability threshold 0.5
    std::size_t positives = 0;
    std::size_t negatives = 0;
    std::vector<RocPoint> roc;
    std::vector<double> scores; ///< P(full) per retained row
    std::vector<int> truth;
};

/// Rows with label <= v_low are negative, >= v_high positive, the rest are
/// dropped. With two or more groups each row is scored by a model trained
/// without its group (pooled leave-one-group-out); with a single group the
/// model is trained and scored on all rows.
BinaryEval binary_fullness_eval(const LabeledDataset& dataset, double v_low, double v_high,
                                const ClassifierOptions& options = {}, int threads = 1);

/// CSV: threshold,fpr,tpr
void write_roc_csv(std::ostream& out, const std::vector<RocPoint>& roc);

} // namespace padeit
