#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "wadkit/features.hpp"
#include "wadkit/models/io.hpp"
#include "wadkit/models/networks.hpp"
#include "wadkit/models/spec.hpp"
#include "wadkit/models/training.hpp"

namespace wadkit {

/// Per-frame probabilities. LSTM outputs belong to the final frame of each
/// 30-frame window; earlier frames see frame 0 replicated on the left.
inline std::vector<double> forward_probs(const Model& model, const FeatureMatrix& features) {
    if (features.cols != model.spec.input_dim)
        throw UsageError("feature dimension " + std::to_string(features.cols) + " does not match model input " +
                         std::to_string(model.spec.input_dim));
    const Normalizer norm{model.norm_mean, model.norm_std};
    return predict_normalized(model.spec, to_params(model.weights), norm.apply(features));
}

/// Binary decisions at the model's stored threshold.
inline std::vector<int> decide(const Model& model, const std::vector<double>& probs) {
    std::vector<int> out(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] >= model.threshold ? 1 : 0;
    return out;
}

struct GradientCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};

/// Compares analytic gradients of the mean BCE with central differences
/// (eps 1e-5) on `n_params` randomly chosen coordinates (all of them when the
/// model is smaller). For LSTM specs X is (in x seq_len*B), step-major.
inline GradientCheckResult gradient_check(const ModelSpec& spec, const Vec& params, const Mat& X, const RowVec& y,
                                          std::uint64_t seed = 7, std::size_t n_params = 200) {
    const RowVec w = RowVec::Ones(y.size());
    auto loss = [&](const Vec& p, Vec* g) {
        switch (spec.kind) {
            case ModelKind::mlp: return MlpNet(spec).loss_grad(p, X, y, w, g);
            case ModelKind::lstm:
                return LstmNet(spec).loss_grad(p, X, static_cast<Eigen::Index>(spec.seq_len), y, w, g);
            case ModelKind::svm: break;
        }
        throw UsageError("gradient_check supports mlp and lstm specs");
    };
    Vec grad;
    loss(params, &grad);

    std::vector<Eigen::Index> idx(static_cast<std::size_t>(params.size()));
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(idx.size(), n_params));

    constexpr double eps = 1e-5;
    GradientCheckResult res;
    Vec p = params;
    for (auto i : idx) {
        const double orig = p(i);
        p(i) = orig + eps;
        const double lp = loss(p, nullptr);
        p(i) = orig - eps;
        const double lm = loss(p, nullptr);
        p(i) = orig;
        const double numeric = (lp - lm) / (2 * eps);
        const double analytic = grad(i);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        res.max_rel_error = std::max(res.max_rel_error, std::abs(analytic - numeric) / denom);
        ++res.checked;
    }
    return res;
}

}  // namespace wadkit
