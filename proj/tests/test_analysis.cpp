#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "padeit/analysis.hpp"
#include "padeit/error.hpp"

using namespace padeit;

namespace {

FrameSeries ramp(int frames, int channels, double rate = 3.0) {
    FrameSeries s;
    s.rate = rate;
    for (int i = 0; i < frames; ++i) {
        FrameVector f(channels);
        for (int c = 0; c < channels; ++c) f[c] = 1.0 + i * (c + 1) + 0.5 * c;
        s.frames.push_back(f);
    }
    return s;
}

double direct_cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double ab = 0, aa = 0, bb = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    return ab / std::sqrt(aa * bb);
}

double direct_pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double n = static_cast<double>(a.size());
    double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        sa += a[i];
        sb += b[i];
        sab += a[i] * b[i];
        saa += a[i] * a[i];
        sbb += b[i] * b[i];
    }
    return (n * sab - sa * sb) / std::sqrt((n * saa - sa * sa) * (n * sbb - sb * sb));
}

/// Two Gaussian blobs per class in `dim` dimensions, separated along axis 0.
LabeledDataset blobs(int per_cell, int groups, double separation, unsigned seed,
                     std::vector<double> labels = {0.0, 400.0}) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    LabeledDataset ds;
    ds.channel_count = 4;
    for (std::size_t l = 0; l < labels.size(); ++l)
        for (int g = 0; g < groups; ++g)
            for (int t = 0; t < per_cell; ++t) {
                FrameVector f(4);
                for (auto& x : f) x = n(rng);
                f[0] += separation * static_cast<double>(l);
                f[1] = 0.001 * f[1] + 5.0; // tiny-variance feature exercises standardisation
                ds.rows.push_back({f, labels[l], g, t, 0});
            }
    return ds;
}

} // namespace

TEST(Analysis, BaselineFirstFrameIsZero) {
    const auto s = ramp(5, 3);
    const auto b = baseline_subtract(s);
    ASSERT_EQ(b.size(), 5u);
    EXPECT_EQ(b.frames[0], FrameVector::Zero(3));
    EXPECT_EQ(b.frames[4], s.frames[4] - s.frames[0]);
    EXPECT_EQ(b.rate, s.rate);
    EXPECT_THROW(baseline_subtract(FrameSeries{}), DataError);
}

TEST(Analysis, GroupAverage) {
    const auto s = ramp(7, 2);
    const auto g = group_average(s, 3);
    ASSERT_EQ(g.size(), 2u);
    EXPECT_DOUBLE_EQ(g.rate, 1.0);
    EXPECT_TRUE(g.frames[0].isApprox((s.frames[0] + s.frames[1] + s.frames[2]) / 3.0));
    EXPECT_TRUE(g.frames[1].isApprox((s.frames[3] + s.frames[4] + s.frames[5]) / 3.0));
    EXPECT_EQ(group_average(s, 1).frames, s.frames);
    EXPECT_EQ(group_average(s, 8).size(), 0u);
    EXPECT_THROW(group_average(s, 0), InvalidArgument);
}

TEST(Analysis, WindowMean) {
    const auto s = ramp(10, 2, 3.0);
    // 1 s at 3 Hz: last three frames
    EXPECT_TRUE(window_mean(s, 1.0).isApprox((s.frames[7] + s.frames[8] + s.frames[9]) / 3.0));
    // 0.5 s rounds up to two frames
    EXPECT_TRUE(window_mean(s, 0.5).isApprox((s.frames[8] + s.frames[9]) / 2.0));
    // longer than the series: everything
    FrameVector all = FrameVector::Zero(2);
    for (const auto& f : s.frames) all += f;
    EXPECT_TRUE(window_mean(s, 100.0).isApprox(all / 10.0));
    EXPECT_THROW(window_mean(s, 0.0), InvalidArgument);
    EXPECT_THROW(window_mean(FrameSeries{}, 1.0), DataError);
}

TEST(Analysis, NormalizeToStart) {
    const std::vector<double> c{2.0, 4.0, 1.0};
    EXPECT_EQ(normalize_to_start(c), (std::vector<double>{1.0, 2.0, 0.5}));
    const std::vector<double> z{0.0, 1.0};
    EXPECT_THROW(normalize_to_start(z), DataError);
}

TEST(Analysis, SimilarityMetrics) {
    std::mt19937 rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int t = 0; t < 50; ++t) {
        Eigen::VectorXd a(36), b(36);
        for (auto& x : a) x = n(rng);
        for (auto& x : b) x = n(rng) + 0.3 * t;
        EXPECT_NEAR(cosine_similarity(a, a), 1.0, 1e-12);
        EXPECT_NEAR(pearson(a, a), 1.0, 1e-12);
        EXPECT_NEAR(cosine_similarity(a, b), direct_cosine(a, b), 1e-6);
        EXPECT_NEAR(pearson(a, b), direct_pearson(a, b), 1e-6);
        // pearson ignores affine maps, cosine only positive scaling
        EXPECT_NEAR(pearson(a, 3.0 * a.array() + 7.0), 1.0, 1e-12);
        EXPECT_NEAR(cosine_similarity(a, -2.0 * a), -1.0, 1e-12);
    }
    Eigen::VectorXd c = Eigen::VectorXd::Constant(4, 2.0), z = Eigen::VectorXd::Zero(4);
    EXPECT_THROW(pearson(c, c), DataError);
    EXPECT_THROW(cosine_similarity(z, c), DataError);
    EXPECT_THROW(cosine_similarity(c, Eigen::VectorXd::Ones(3)), DimensionError);
}

TEST(Analysis, AucEqualsMannWhitney) {
    std::mt19937_64 rng(2024);
    for (int t = 0; t < 100; ++t) {
        const int n = 5 + static_cast<int>(rng() % 60);
        std::vector<double> scores;
        std::vector<int> truth;
        // coarse scores produce plenty of ties
        std::uniform_int_distribution<int> level(0, 6 + t % 20);
        for (int i = 0; i < n; ++i) {
            truth.push_back(i < 2 ? i : static_cast<int>(rng() % 2));
            scores.push_back(level(rng) * 0.25 + truth.back() * (t % 3) * 0.5);
        }
        EXPECT_EQ(roc_auc(scores, truth), mann_whitney_auc(scores, truth)) << "set " << t;
    }
}

TEST(Analysis, RocCurveShape) {
    const std::vector<double> s{0.9, 0.8, 0.8, 0.3, 0.1};
    const std::vector<int> y{1, 1, 0, 0, 1};
    const auto roc = roc_curve(s, y);
    ASSERT_EQ(roc.size(), 5u); // +inf, 3 midpoints, -inf
    EXPECT_TRUE(std::isinf(roc.front().threshold));
    EXPECT_EQ(roc.front().fpr, 0.0);
    EXPECT_EQ(roc.front().tpr, 0.0);
    EXPECT_EQ(roc.back().fpr, 1.0);
    EXPECT_EQ(roc.back().tpr, 1.0);
    EXPECT_DOUBLE_EQ(roc[1].threshold, 0.85);
    EXPECT_DOUBLE_EQ(roc[1].tpr, 1.0 / 3.0);
    for (std::size_t i = 1; i < roc.size(); ++i) {
        EXPECT_GE(roc[i].fpr, roc[i - 1].fpr);
        EXPECT_GE(roc[i].tpr, roc[i - 1].tpr);
    }
    // pairs: (0.9,0.8) (0.9,0.3) (0.8,0.8)=tie (0.8,0.3) (0.1,*)=loss x2
    EXPECT_DOUBLE_EQ(roc_auc(s, y), 3.5 / 6.0);
    const std::vector<int> ones{1, 1, 1, 1, 1};
    EXPECT_THROW(roc_auc(s, ones), DataError);
}

TEST(Analysis, ClassifierSeparatesBlobs) {
    const auto ds = blobs(20, 1, 6.0, 1);
    const auto model = train_classifier(ds, std::nullopt);
    EXPECT_LT(model.gradient_norm(), 1e-6);
    EXPECT_EQ(model.labels(), (std::vector<double>{0.0, 400.0}));
    int correct = 0;
    for (const auto& r : ds.rows) {
        const auto p = model.probabilities(r.features);
        EXPECT_NEAR(p.sum(), 1.0, 1e-12);
        correct += model.predict(r.features) == r.label_ml;
    }
    EXPECT_GE(correct, 38);
}

TEST(Analysis, ClassifierInvariantToFeatureScale) {
    auto ds = blobs(15, 1, 2.0, 3);
    auto scaled = ds;
    for (auto& r : scaled.rows) r.features = 1e-4 * r.features;
    const auto a = train_classifier(ds, std::nullopt);
    const auto b = train_classifier(scaled, std::nullopt);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        EXPECT_NEAR(a.probabilities(ds.rows[i].features)[1], b.probabilities(scaled.rows[i].features)[1], 1e-6);
    }
}

TEST(Analysis, ClassifierPermutationInvariant) {
    auto ds = blobs(10, 1, 3.0, 4, {0.0, 100.0, 200.0});
    auto shuffled = ds;
    std::mt19937 rng(9);
    std::shuffle(shuffled.rows.begin(), shuffled.rows.end(), rng);
    const auto a = train_classifier(ds, std::nullopt);
    const auto b = train_classifier(shuffled, std::nullopt);
    for (const auto& r : ds.rows) {
        EXPECT_TRUE(a.probabilities(r.features).isApprox(b.probabilities(r.features), 1e-6));
    }
}

TEST(Analysis, ClassifierErrors) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Ones(3, 2);
    const std::vector<double> one{1.0, 1.0, 1.0};
    EXPECT_THROW(fit_classifier(x, one), DataError);
    const std::vector<double> short_labels{1.0, 2.0};
    EXPECT_THROW(fit_classifier(x, short_labels), DimensionError);
    const std::vector<double> two{1.0, 2.0, 1.0};
    const auto m = fit_classifier(x, two);
    EXPECT_THROW(m.predict(Eigen::VectorXd::Ones(3)), DimensionError);
    // constant features: probabilities follow class frequencies
    EXPECT_NEAR(m.probabilities(Eigen::VectorXd::Ones(2))[0], 2.0 / 3.0, 1e-3);
}

TEST(Analysis, LeaveOneGroupOut) {
    const auto ds = blobs(8, 4, 8.0, 6, {0.0, 200.0, 400.0});
    const auto r = evaluate_loo(ds, {0.0, 200.0, 400.0});
    ASSERT_EQ(r.groups.size(), 4u);
    double sum = 0.0;
    for (const auto& g : r.groups) {
        EXPECT_EQ(g.n_test, 24u);
        EXPECT_EQ(g.n_train, 72u);
        EXPECT_GE(g.accuracy, 0.9);
        sum += g.accuracy;
    }
    EXPECT_DOUBLE_EQ(r.mean_accuracy, sum / 4.0);
    // classes restrict the rows
    EXPECT_EQ(evaluate_loo(ds, {0.0, 400.0}).groups[0].n_test, 16u);
    // threads do not change the result
    const auto t = evaluate_loo(ds, {0.0, 200.0, 400.0}, {}, 3);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(t.groups[i].accuracy, r.groups[i].accuracy);
    EXPECT_THROW(evaluate_loo(blobs(4, 1, 1.0, 1), {0.0, 400.0}), DataError);

    std::ostringstream os;
    write_loo_csv(os, LooResult{{GroupAccuracy{0, 3, 1, 0.5}}, 0.5});
    EXPECT_EQ(os.str(), "group,n_train,n_test,accuracy\n0,3,1,0.5\n");
}

TEST(Analysis, BinaryFullness) {
    const auto ds = blobs(8, 3, 8.0, 8, {0.0, 200.0, 400.0});
    const auto r = binary_fullness_eval(ds, 0.0, 400.0);
    EXPECT_EQ(r.positives, 24u);
    EXPECT_EQ(r.negatives, 24u);
    EXPECT_EQ(r.scores.size(), 48u);
    EXPECT_GE(r.auc, 0.99);
    std::vector<double> s = r.scores;
    EXPECT_EQ(r.auc, mann_whitney_auc(s, r.truth));
    EXPECT_THROW(binary_fullness_eval(ds, 400.0, 0.0), InvalidArgument);
    EXPECT_THROW(binary_fullness_eval(ds, 500.0, 600.0), DataError);

    std::ostringstream os;
    write_roc_csv(os, {RocPoint{std::numeric_limits<double>::infinity(), 0.0, 0.0}, RocPoint{0.5, 0.25, 1.0}});
    EXPECT_EQ(os.str(), "threshold,fpr,tpr\ninf,0,0\n0.5,0.25,1\n");
}
