#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "wadkit/errors.hpp"

namespace wadkit {

struct ConfusionMatrix {
    std::uint64_t tn = 0, fp = 0, fn = 0, tp = 0;

    std::uint64_t total() const noexcept { return tn + fp + fn + tp; }

    struct Fractions {
        double tn, fp, fn, tp;
    };
    Fractions fractions() const {
        const double n = static_cast<double>(total());
        if (n == 0) return {0, 0, 0, 0};
        return {tn / n, fp / n, fn / n, tp / n};
    }

    ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
        tn += o.tn;
        fp += o.fp;
        fn += o.fn;
        tp += o.tp;
        return *this;
    }

    /// Counts from published fractions over `total` frames; each count is
    /// rounded to the nearest integer independently, so counts need not sum
    /// to `total` when the fractions themselves do not sum to one.
    static ConfusionMatrix from_fractions(double tn, double fp, double fn, double tp, std::uint64_t total) {
        auto c = [total](double f) { return static_cast<std::uint64_t>(std::llround(f * static_cast<double>(total))); };
        return {c(tn), c(fp), c(fn), c(tp)};
    }
};

template <typename L, typename P>
ConfusionMatrix confusion(std::span<const L> labels, std::span<const P> predictions) {
    if (labels.size() != predictions.size()) throw UsageError("confusion: label and prediction lengths differ");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool y = labels[i] != 0, p = predictions[i] != 0;
        if (y && p) ++cm.tp;
        else if (y) ++cm.fn;
        else if (p) ++cm.fp;
        else ++cm.tn;
    }
    return cm;
}

inline ConfusionMatrix confusion(const std::vector<int>& labels, const std::vector<int>& predictions) {
    return confusion<int, int>(labels, predictions);
}

/// Precision, recall and F1 are absent when their denominator is zero.
struct Metrics {
    double accuracy = 0.0;
    std::optional<double> precision, recall, f1;
};

inline Metrics metrics(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw UsageError("metrics: empty confusion matrix");
    Metrics m;
    m.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
    if (cm.tp + cm.fp > 0) m.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
    if (cm.tp + cm.fn > 0) m.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
    if (2 * cm.tp + cm.fp + cm.fn > 0)
        m.f1 = 2.0 * static_cast<double>(cm.tp) / static_cast<double>(2 * cm.tp + cm.fp + cm.fn);
    return m;
}

struct RocPoint {
    double fpr, tpr, threshold;
};

struct RocCurve {
    std::vector<RocPoint> points;  // (0,0) first, (1,1) last
    double auc = 0.0;
};

struct RocResult {
    RocCurve curve;
    double threshold = 0.5;  // predict positive iff prob >= threshold
    double youden_j = 0.0;
};

/// Sweeps every distinct score as a threshold (descending), integrates AUC by
/// the trapezoidal rule and picks the threshold maximising Youden's
/// J = tpr - fpr, preferring the lower threshold on ties.
inline RocResult roc_and_threshold(std::span<const double> probs, std::span<const int> labels) {
    if (probs.size() != labels.size()) throw UsageError("roc: length mismatch");
    const auto pos = static_cast<double>(std::count_if(labels.begin(), labels.end(), [](int y) { return y != 0; }));
    const auto neg = static_cast<double>(labels.size()) - pos;
    if (pos == 0 || neg == 0) throw UsageError("roc: both classes must be present");

    std::vector<std::size_t> order(probs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });

    RocResult res;
    res.curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    double tp = 0, fp = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < order.size();) {
        const double s = probs[order[i]];
        while (i < order.size() && probs[order[i]] == s) {
            (labels[order[i]] ? tp : fp) += 1;
            ++i;
        }
        RocPoint pt{fp / neg, tp / pos, s};
        const auto& prev = res.curve.points.back();
        res.curve.auc += (pt.fpr - prev.fpr) * (pt.tpr + prev.tpr) / 2.0;
        const double j = pt.tpr - pt.fpr;
        if (j >= best - 1e-12) {
            best = std::max(best, j);
            res.threshold = s;
        }
        res.curve.points.push_back(pt);
    }
    res.youden_j = best;
    return res;
}

/// F1 of thresholded probabilities (prob >= threshold is positive); 0 when
/// undefined so it can drive model selection.
inline double f1_at(std::span<const double> probs, std::span<const int> labels, double threshold) {
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const bool y = labels[i] != 0, p = probs[i] >= threshold;
        if (y && p) ++cm.tp;
        else if (y) ++cm.fn;
        else if (p) ++cm.fp;
        else ++cm.tn;
    }
    if (cm.total() == 0) return 0.0;
    return metrics(cm).f1.value_or(0.0);
}

inline ConfusionMatrix confusion_at(std::span<const double> probs, std::span<const int> labels, double threshold) {
    std::vector<int> pred(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) pred[i] = probs[i] >= threshold ? 1 : 0;
    return confusion<int, int>(labels, pred);
}

}  // namespace wadkit
