#include "padeit/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "padeit/csv.hpp"
#include "padeit/error.hpp"

namespace padeit {

FrameVector window_mean(const FrameSeries& series, double window_seconds) {
    if (series.empty()) throw DataError("cannot average an empty series");
    series.validate();
    const double frames = std::ceil(window_seconds * series.rate);
    if (!(frames >= 1.0)) {
        throw InvalidArgument(fmt::format("window of {} s covers no frame at {} Hz", window_seconds, series.rate));
    }
    const std::size_t n = std::min(series.size(), static_cast<std::size_t>(std::min(frames, 1e18)));
    FrameVector sum = FrameVector::Zero(static_cast<Eigen::Index>(series.channel_count()));
    for (std::size_t i = series.size() - n; i < series.size(); ++i) sum += series.frames[i];
    return sum / static_cast<double>(n);
}

FrameSeries baseline_subtract(const FrameSeries& series) {
    if (series.empty()) throw DataError("cannot baseline an empty series");
    series.validate();
    FrameSeries out = series;
    const FrameVector first = series.frames.front();
    for (auto& f : out.frames) f -= first;
    return out;
}

FrameSeries group_average(const FrameSeries& series, int group_size) {
    if (group_size < 1) throw InvalidArgument(fmt::format("group size must be >= 1 (got {})", group_size));
    series.validate();
    const auto g = static_cast<std::size_t>(group_size);
    FrameSeries out;
    out.rate = series.rate / group_size;
    out.session = series.session;
    for (std::size_t start = 0; start + g <= series.size(); start += g) {
        FrameVector sum = series.frames[start];
        for (std::size_t i = start + 1; i < start + g; ++i) sum += series.frames[i];
        out.frames.push_back(sum / static_cast<double>(g));
    }
    return out;
}

std::vector<double> normalize_to_start(std::span<const double> curve) {
    if (curve.empty()) throw DataError("cannot normalise an empty curve");
    if (curve.front() == 0.0) throw DataError("curve starts at zero; cannot normalise to start");
    std::vector<double> out(curve.begin(), curve.end());
    const double first = curve.front();
    for (double& v : out) v /= first;
    out.front() = 1.0;
    return out;
}

namespace {

void check_pair(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() == 0 || a.size() != b.size()) {
        throw DimensionError(fmt::format("vectors must have equal nonzero length ({} vs {})", a.size(), b.size()));
    }
    if (!a.allFinite() || !b.allFinite()) throw DataError("vectors contain non-finite values");
}

} // namespace

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    check_pair(a, b);
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) throw DataError("cosine similarity of a zero vector");
    return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    check_pair(a, b);
    const Eigen::VectorXd da = a.array() - a.mean();
    const Eigen::VectorXd db = b.array() - b.mean();
    const double na = da.norm();
    const double nb = db.norm();
    if (na == 0.0 || nb == 0.0) throw DataError("pearson correlation of a constant vector");
    return std::clamp(da.dot(db) / (na * nb), -1.0, 1.0);
}

// --- Classifier -----------------------------------------------------------------

ClassifierModel::ClassifierModel(std::vector<double> labels, Eigen::MatrixXd weights, Eigen::VectorXd bias,
                                 Eigen::VectorXd mean, Eigen::VectorXd scale, int iterations, double gradient_norm)
    : labels_(std::move(labels)), weights_(std::move(weights)), bias_(std::move(bias)), mean_(std::move(mean)),
      scale_(std::move(scale)), iterations_(iterations), gradient_norm_(gradient_norm) {
    if (labels_.size() < 2) throw InvalidArgument("a classifier needs at least two classes");
    if (weights_.rows() != static_cast<Eigen::Index>(labels_.size()) || bias_.size() != weights_.rows() ||
        mean_.size() != weights_.cols() || scale_.size() != weights_.cols()) {
        throw DimensionError("classifier parameter shapes disagree");
    }
}

namespace {

/// Row-wise softmax of logits (rows x classes), in place.
void softmax_rows(Eigen::MatrixXd& z) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double m = z.row(i).maxCoeff();
        z.row(i) = (z.row(i).array() - m).exp();
        z.row(i) /= z.row(i).sum();
    }
}

} // namespace

Eigen::VectorXd ClassifierModel::probabilities(const Eigen::VectorXd& features) const {
    if (features.size() != mean_.size()) {
        throw DimensionError(fmt::format("expected {} features, got {}", mean_.size(), features.size()));
    }
    const Eigen::VectorXd z = (features - mean_).cwiseQuotient(scale_);
    Eigen::MatrixXd logits = (weights_ * z + bias_).transpose();
    softmax_rows(logits);
    return logits.row(0).transpose();
}

double ClassifierModel::predict(const Eigen::VectorXd& features) const {
    const Eigen::VectorXd p = probabilities(features);
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < p.size(); ++c) {
        if (p[c] > p[best]) best = c;
    }
    return labels_[static_cast<std::size_t>(best)];
}

ClassifierModel fit_classifier(const Eigen::MatrixXd& x, std::span<const double> labels,
                               const ClassifierOptions& options) {
    if (static_cast<std::size_t>(x.rows()) != labels.size()) throw DimensionError("one label per row required");
    if (x.rows() == 0) throw DataError("empty training set");
    if (!x.allFinite()) throw DataError("training features contain non-finite values");
    if (!(options.l2 >= 0.0) || options.max_iterations < 0) throw InvalidArgument("invalid classifier options");

    std::vector<double> classes(labels.begin(), labels.end());
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    if (classes.size() < 2) throw DataError("training set contains a single class");

    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    const auto k = static_cast<Eigen::Index>(classes.size());

    const Eigen::VectorXd mean = x.colwise().mean().transpose();
    Eigen::VectorXd scale = ((x.rowwise() - mean.transpose()).colwise().squaredNorm() / static_cast<double>(n))
                                .cwiseSqrt()
                                .transpose();
    for (Eigen::Index j = 0; j < d; ++j) {
        if (!(scale[j] > 0.0)) scale[j] = 1.0;
    }
    const Eigen::MatrixXd z = (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();

    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto c = std::lower_bound(classes.begin(), classes.end(), labels[static_cast<std::size_t>(i)]) -
                       classes.begin();
        y(i, c) = 1.0;
    }

    const double inv_n = 1.0 / static_cast<double>(n);
    Eigen::MatrixXd prob(n, k);
    auto loss = [&](const Eigen::MatrixXd& w, const Eigen::VectorXd& b) {
        prob = z * w.transpose();
        prob.rowwise() += b.transpose();
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double m = prob.row(i).maxCoeff();
            const double lse = m + std::log((prob.row(i).array() - m).exp().sum());
            total += lse - prob.row(i).dot(y.row(i));
        }
        return total * inv_n + 0.5 * options.l2 * w.squaredNorm();
    };

    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(k, d);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
    double f = loss(w, b);
    double step = 1.0;
    double gnorm = 0.0;
    int it = 0;
    for (;; ++it) {
        // prob holds the logits of the current iterate after loss()
        softmax_rows(prob);
        const Eigen::MatrixXd residual = prob - y;
        const Eigen::MatrixXd gw = inv_n * residual.transpose() * z + options.l2 * w;
        const Eigen::VectorXd gb = inv_n * residual.colwise().sum().transpose();
        const double g2 = gw.squaredNorm() + gb.squaredNorm();
        gnorm = std::sqrt(g2);
        if (gnorm < options.tolerance || it >= options.max_iterations) break;

        // Armijo backtracking, then let the step grow again
        for (;;) {
            const Eigen::MatrixXd w_try = w - step * gw;
            const Eigen::VectorXd b_try = b - step * gb;
            const double f_try = loss(w_try, b_try);
            if (f_try <= f - 0.5 * step * g2 || step < 1e-12) {
                w = w_try;
                b = b_try;
                f = f_try;
                break;
            }
            step *= 0.5;
        }
        step = std::min(step * 2.0, 1e6);
    }
    return {std::move(classes), std::move(w), std::move(b), mean, std::move(scale), it, gnorm};
}

namespace {

Eigen::MatrixXd feature_matrix(const LabeledDataset& ds, const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(ds.channel_count));
    for (std::size_t i = 0; i < rows.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = ds.rows[rows[i]].features.transpose();
    return x;
}

} // namespace

ClassifierModel train_classifier(const LabeledDataset& dataset, std::optional<int> held_out_group,
                                 const ClassifierOptions& options) {
    dataset.validate();
    std::vector<std::size_t> rows;
    std::vector<double> labels;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (held_out_group && dataset.rows[i].group == *held_out_group) continue;
        rows.push_back(i);
        labels.push_back(dataset.rows[i].label_ml);
    }
    return fit_classifier(feature_matrix(dataset, rows), labels, options);
}

LooResult evaluate_loo(const LabeledDataset& dataset, const std::vector<double>& classes,
                       const ClassifierOptions& options, int threads) {
    const LabeledDataset ds = dataset.filter_labels(classes);
    const auto groups = ds.groups();
    if (groups.size() < 2) throw DataError("leave-one-group-out needs at least two groups");

    LooResult out;
    out.groups.resize(groups.size());
    parallel_for(groups.size(), threads, [&](std::size_t gi) {
        const int g = groups[gi];
        const auto model = train_classifier(ds, g, options);
        GroupAccuracy acc{g, 0, 0, 0.0};
        std::size_t correct = 0;
        for (const auto& r : ds.rows) {
            if (r.group != g) {
                ++acc.n_train;
                continue;
            }
            ++acc.n_test;
            if (model.predict(r.features) == r.label_ml) ++correct;
        }
        acc.accuracy = static_cast<double>(correct) / static_cast<double>(acc.n_test);
        out.groups[gi] = acc;
    });
    double sum = 0.0;
    for (const auto& g : out.groups) sum += g.accuracy;
    out.mean_accuracy = sum / static_cast<double>(out.groups.size());
    return out;
}

void write_loo_csv(std::ostream& out, const LooResult& result) {
    out << "group,n_train,n_test,accuracy\n";
    for (const auto& g : result.groups) {
        fmt::print(out, "{},{},{},{}\n", g.group, g.n_train, g.n_test, format_number(g.accuracy));
    }
}

// --- ROC ------------------------------------------------------------------------

namespace {

struct ScoreGroup {
    double score;
    std::int64_t pos;
    std::int64_t neg;
};

/// Distinct scores in descending order with their class counts.
std::vector<ScoreGroup> score_groups(std::span<const double> scores, std::span<const int> positive,
                                     std::int64_t& p, std::int64_t& n) {
    if (scores.size() != positive.size()) throw DimensionError("one label per score required");
    std::map<double, ScoreGroup, std::greater<>> groups;
    p = n = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (std::isnan(scores[i])) throw DataError("score is NaN");
        auto& g = groups.try_emplace(scores[i], ScoreGroup{scores[i], 0, 0}).first->second;
        if (positive[i]) {
            ++g.pos;
            ++p;
        } else {
            ++g.neg;
            ++n;
        }
    }
    if (p == 0 || n == 0) throw DataError("ROC needs both positive and negative examples");
    std::vector<ScoreGroup> out;
    for (const auto& [s, g] : groups) out.push_back(g);
    return out;
}

} // namespace

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> positive) {
    std::int64_t p = 0;
    std::int64_t n = 0;
    const auto groups = score_groups(scores, positive, p, n);
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<RocPoint> out{{inf, 0.0, 0.0}};
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        tp += groups[i].pos;
        fp += groups[i].neg;
        const double threshold =
            i + 1 < groups.size() ? groups[i].score + 0.5 * (groups[i + 1].score - groups[i].score) : -inf;
        out.push_back({threshold, static_cast<double>(fp) / static_cast<double>(n),
                       static_cast<double>(tp) / static_cast<double>(p)});
    }
    return out;
}

double roc_auc(std::span<const double> scores, std::span<const int> positive) {
    std::int64_t p = 0;
    std::int64_t n = 0;
    const auto groups = score_groups(scores, positive, p, n);
    // twice the area in units of 1/(p*n)
    std::int64_t area2 = 0;
    std::int64_t tp = 0;
    for (const auto& g : groups) {
        area2 += g.neg * (2 * tp + g.pos);
        tp += g.pos;
    }
    return static_cast<double>(area2) / (2.0 * static_cast<double>(p) * static_cast<double>(n));
}

double mann_whitney_auc(std::span<const double> scores, std::span<const int> positive) {
    if (scores.size() != positive.size()) throw DimensionError("one label per score required");
    std::int64_t p = 0;
    std::int64_t n = 0;
    std::int64_t twice_u = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (std::isnan(scores[i])) throw DataError("score is NaN");
        if (positive[i]) ++p;
        else ++n;
        if (!positive[i]) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (positive[j]) continue;
            if (scores[i] > scores[j]) twice_u += 2;
            else if (scores[i] == scores[j]) twice_u += 1;
        }
    }
    if (p == 0 || n == 0) throw DataError("AUC needs both positive and negative examples");
    return static_cast<double>(twice_u) / (2.0 * static_cast<double>(p) * static_cast<double>(n));
}

BinaryEval binary_fullness_eval(const LabeledDataset& dataset, double v_low, double v_high,
                                const ClassifierOptions& options, int threads) {
    if (!(v_low < v_high)) throw InvalidArgument(fmt::format("need v_low < v_high (got {}, {})", v_low, v_high));
    dataset.validate();
    LabeledDataset ds;
    ds.channel_count = dataset.channel_count;
    for (const auto& r : dataset.rows) {
        if (r.label_ml > v_low && r.label_ml < v_high) continue;
        auto row = r;
        row.label_ml = r.label_ml >= v_high ? 1.0 : 0.0;
        ds.rows.push_back(std::move(row));
    }
    BinaryEval out;
    for (const auto& r : ds.rows) (r.label_ml == 1.0 ? out.positives : out.negatives) += 1;
    if (out.positives == 0 || out.negatives == 0) throw DataError("a fullness class is empty after thresholding");

    out.scores.assign(ds.size(), 0.0);
    out.truth.resize(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) out.truth[i] = ds.rows[i].label_ml == 1.0 ? 1 : 0;

    const auto groups = ds.groups();
    if (groups.size() < 2) {
        const auto model = train_classifier(ds, std::nullopt, options);
        for (std::size_t i = 0; i < ds.size(); ++i) out.scores[i] = model.probabilities(ds.rows[i].features)[1];
    } else {
        parallel_for(groups.size(), threads, [&](std::size_t gi) {
            const auto model = train_classifier(ds, groups[gi], options);
            for (std::size_t i = 0; i < ds.size(); ++i) {
                if (ds.rows[i].group == groups[gi]) out.scores[i] = model.probabilities(ds.rows[i].features)[1];
            }
        });
    }

    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if ((out.scores[i] > 0.5 ? 1 : 0) == out.truth[i]) ++correct;
    }
    out.accuracy = static_cast<double>(correct) / static_cast<double>(ds.size());
    out.auc = roc_auc(out.scores, out.truth);
    out.roc = roc_curve(out.scores, out.truth);
    return out;
}

void write_roc_csv(std::ostream& out, const std::vector<RocPoint>& roc) {
    out << "threshold,fpr,tpr\n";
    for (const auto& r : roc) {
        fmt::print(out, "{},{},{}\n", format_number(r.threshold), format_number(r.fpr), format_number(r.tpr));
    }
}

} // namespace padeit
