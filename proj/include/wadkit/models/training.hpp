#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "wadkit/eval.hpp"
#include "wadkit/features.hpp"
#include "wadkit/models/networks.hpp"
#include "wadkit/models/spec.hpp"

namespace wadkit {

/// Raw (unnormalised) features of one utterance with one binary label per frame.
/// With `final_frame_only` set, only the last frame is a training and
/// validation target (fixed-length sequence datasets).
struct LabeledUtterance {
    FeatureMatrix features;
    std::vector<int> labels;
    bool final_frame_only = false;
};

struct Normalizer {
    std::vector<double> mean, std;

    static Normalizer fit(std::span<const LabeledUtterance> data, std::size_t dim) {
        Normalizer n{std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
        std::vector<double> sq(dim, 0.0);
        double count = 0;
        for (const auto& u : data) {
            for (std::size_t t = 0; t < u.features.rows; ++t) {
                auto r = u.features.row(t);
                for (std::size_t j = 0; j < dim; ++j) {
                    n.mean[j] += r[j];
                    sq[j] += r[j] * r[j];
                }
                count += 1;
            }
        }
        if (count == 0) return n;
        for (std::size_t j = 0; j < dim; ++j) {
            n.mean[j] /= count;
            const double var = sq[j] / count - n.mean[j] * n.mean[j];
            n.std[j] = var > 1e-16 ? std::sqrt(var) : 1.0;
        }
        return n;
    }

    /// Normalised copy as (dim x frames), one column per frame.
    Mat apply(const FeatureMatrix& f) const {
        Mat out(static_cast<Eigen::Index>(f.cols), static_cast<Eigen::Index>(f.rows));
        for (std::size_t t = 0; t < f.rows; ++t) {
            auto r = f.row(t);
            for (std::size_t j = 0; j < f.cols; ++j)
                out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(t)) = (r[j] - mean[j]) / std[j];
        }
        return out;
    }
};

inline Vec to_params(const std::vector<float>& w) {
    Vec p(static_cast<Eigen::Index>(w.size()));
    for (std::size_t i = 0; i < w.size(); ++i) p(static_cast<Eigen::Index>(i)) = w[i];
    return p;
}

inline std::vector<float> to_weights(const Vec& p) {
    std::vector<float> w(static_cast<std::size_t>(p.size()));
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<float>(p(static_cast<Eigen::Index>(i)));
    return w;
}

/// Builds the (in x T*B) batch of windows ending at `ends[b]` of `seq`,
/// padding before frame 0 by replicating frame 0.
inline Mat gather_windows(const Mat& seq, std::span<const std::size_t> ends, std::size_t T) {
    const auto B = static_cast<Eigen::Index>(ends.size());
    Mat X(seq.rows(), static_cast<Eigen::Index>(T) * B);
    for (std::size_t s = 0; s < T; ++s)
        for (Eigen::Index b = 0; b < B; ++b) {
            const long idx = static_cast<long>(ends[static_cast<std::size_t>(b)]) - static_cast<long>(T - 1 - s);
            X.col(static_cast<Eigen::Index>(s) * B + b) = seq.col(std::max<long>(idx, 0));
        }
    return X;
}

/// Per-frame probabilities for a normalised (dim x frames) sequence.
inline std::vector<double> predict_normalized(const ModelSpec& spec, const Vec& p, const Mat& seq) {
    const auto n = static_cast<std::size_t>(seq.cols());
    std::vector<double> out(n);
    if (n == 0) return out;
    RowVec z;
    switch (spec.kind) {
        case ModelKind::svm: z = LinearNet(spec).logits(p, seq); break;
        case ModelKind::mlp: z = MlpNet(spec).logits(p, seq); break;
        case ModelKind::lstm: {
            LstmNet net(spec);
            z.resize(static_cast<Eigen::Index>(n));
            constexpr std::size_t chunk = 256;
            std::vector<std::size_t> ends;
            for (std::size_t start = 0; start < n; start += chunk) {
                ends.clear();
                for (std::size_t t = start; t < std::min(n, start + chunk); ++t) ends.push_back(t);
                RowVec zc = net.logits(p, gather_windows(seq, ends, spec.seq_len), static_cast<Eigen::Index>(spec.seq_len));
                z.segment(static_cast<Eigen::Index>(start), zc.size()) = zc;
            }
            break;
        }
    }
    for (std::size_t i = 0; i < n; ++i) out[i] = sigmoid(z(static_cast<Eigen::Index>(i)));
    return out;
}

class Adam {
public:
    Adam(Eigen::Index n, double lr) : lr_(lr), m_(Vec::Zero(n)), v_(Vec::Zero(n)) {}

    void step(Vec& p, const Vec& g) {
        ++t_;
        m_ = b1_ * m_ + (1 - b1_) * g;
        v_ = b2_ * v_ + (1 - b2_) * g.cwiseProduct(g);
        const double c1 = 1 - std::pow(b1_, static_cast<double>(t_));
        const double c2 = 1 - std::pow(b2_, static_cast<double>(t_));
        p.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
    }

private:
    double lr_;
    double b1_ = 0.9, b2_ = 0.999, eps_ = 1e-8;
    Vec m_, v_;
    long t_ = 0;
};

struct TrainingLog {
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0;
    double best_val_f1 = 0.0;
    std::vector<double> train_loss;
    std::vector<double> val_f1;
};

struct TrainOptions {
    /// Continue from these weights and normalisation (fine-tuning).
    const Model* initial = nullptr;
    std::function<void(std::size_t epoch, double loss, double val_f1)> on_epoch;
    TrainingLog* log = nullptr;
};

namespace detail {

struct PreparedSet {
    std::vector<Mat> seqs;
    std::vector<std::vector<int>> labels;
    std::vector<char> final_only;

    std::size_t frames() const {
        std::size_t n = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) n += final_only[i] ? 1 : labels[i].size();
        return n;
    }
};

inline PreparedSet prepare(std::span<const LabeledUtterance> data, const Normalizer& norm, std::size_t dim) {
    PreparedSet s;
    for (const auto& u : data) {
        if (u.features.cols != dim)
            throw UsageError("feature dimension " + std::to_string(u.features.cols) + " does not match model input " +
                             std::to_string(dim));
        if (u.labels.size() != u.features.rows) throw UsageError("label count does not match frame count");
        s.seqs.push_back(norm.apply(u.features));
        s.labels.push_back(u.labels);
        s.final_only.push_back(u.final_frame_only ? 1 : 0);
    }
    return s;
}

struct Scored {
    std::vector<double> probs;
    std::vector<int> labels;
};

inline Scored score_set(const ModelSpec& spec, const Vec& p, const PreparedSet& s) {
    Scored out;
    std::vector<std::size_t> finals;
    for (std::size_t i = 0; i < s.seqs.size(); ++i) {
        if (s.labels[i].empty()) continue;
        if (s.final_only[i]) {
            finals.push_back(i);
            continue;
        }
        auto pr = predict_normalized(spec, p, s.seqs[i]);
        out.probs.insert(out.probs.end(), pr.begin(), pr.end());
        out.labels.insert(out.labels.end(), s.labels[i].begin(), s.labels[i].end());
    }
    // Final-frame targets: batch their last windows together.
    constexpr std::size_t chunk = 256;
    const auto dim = static_cast<Eigen::Index>(spec.input_dim);
    const std::size_t T = spec.kind == ModelKind::lstm ? spec.seq_len : 1;
    for (std::size_t start = 0; start < finals.size(); start += chunk) {
        const std::size_t nb = std::min(chunk, finals.size() - start);
        Mat X(dim, static_cast<Eigen::Index>(T * nb));
        for (std::size_t b = 0; b < nb; ++b) {
            const Mat& seq = s.seqs[finals[start + b]];
            const std::size_t end = s.labels[finals[start + b]].size() - 1;
            std::size_t e[1] = {end};
            X.middleCols(static_cast<Eigen::Index>(b * T), static_cast<Eigen::Index>(T)) = gather_windows(seq, e, T);
        }
        // gather_windows lays steps out per sequence; regroup into step-major.
        Mat Xs(dim, X.cols());
        for (std::size_t b = 0; b < nb; ++b)
            for (std::size_t k = 0; k < T; ++k)
                Xs.col(static_cast<Eigen::Index>(k * nb + b)) = X.col(static_cast<Eigen::Index>(b * T + k));
        RowVec z;
        switch (spec.kind) {
            case ModelKind::svm: z = LinearNet(spec).logits(p, Xs); break;
            case ModelKind::mlp: z = MlpNet(spec).logits(p, Xs); break;
            case ModelKind::lstm: z = LstmNet(spec).logits(p, Xs, static_cast<Eigen::Index>(T)); break;
        }
        for (std::size_t b = 0; b < nb; ++b) {
            out.probs.push_back(sigmoid(z(static_cast<Eigen::Index>(b))));
            out.labels.push_back(s.labels[finals[start + b]].back());
        }
    }
    return out;
}

inline bool has_both_classes(std::span<const int> y) {
    bool pos = false, neg = false;
    for (int v : y) (v ? pos : neg) = true;
    return pos && neg;
}

/// Youden threshold on `sc`, clamped into (0, 1), and the F1 it yields.
inline std::pair<double, double> select_threshold(const Scored& sc) {
    if (!has_both_classes(sc.labels)) return {0.5, f1_at(sc.probs, sc.labels, 0.5)};
    auto roc = roc_and_threshold(sc.probs, sc.labels);
    const double thr = std::clamp(roc.threshold, 1e-6, 1.0 - 1e-6);
    return {thr, f1_at(sc.probs, sc.labels, thr)};
}

struct Sample {
    std::uint32_t utt;
    std::uint32_t frame;
};

}  // namespace detail

/// Trains any model kind on labelled frames. Validation data drives early
/// stopping (patience on F1 at the Youden threshold) and threshold
/// selection; without it every epoch runs and the threshold is chosen on
/// the training frames.
inline Model train_model(const ModelSpec& spec, std::span<const LabeledUtterance> train,
                         std::span<const LabeledUtterance> val, const TrainOptions& opts = {}) {
    spec.validate();
    std::size_t pos = 0, total = 0;
    for (const auto& u : train) {
        if (u.final_frame_only) {
            if (u.labels.empty()) continue;
            pos += u.labels.back() != 0;
            ++total;
            continue;
        }
        for (int y : u.labels) {
            pos += y != 0;
            ++total;
        }
    }
    if (pos == 0 || pos == total) throw UsageError("training data must contain both classes");

    Normalizer norm;
    Vec params;
    if (opts.initial) {
        opts.initial->validate();
        if (weight_count(opts.initial->spec) != weight_count(spec) || opts.initial->spec.kind != spec.kind)
            throw UsageError("initial model does not match the training spec");
        norm = {opts.initial->norm_mean, opts.initial->norm_std};
        params = to_params(opts.initial->weights);
    } else {
        norm = Normalizer::fit(train, spec.input_dim);
        params = init_params(spec, spec.seed);
    }
    // Training runs on the f32 grid the model is stored on, so a zero-epoch
    // run hands back exactly the starting weights.
    params = to_params(to_weights(params));

    const auto tr = detail::prepare(train, norm, spec.input_dim);
    const auto va = detail::prepare(val, norm, spec.input_dim);
    bool use_val = false;
    {
        std::vector<int> vl;
        for (std::size_t i = 0; i < va.labels.size(); ++i) {
            if (va.labels[i].empty()) continue;
            if (va.final_only[i]) vl.push_back(va.labels[i].back());
            else vl.insert(vl.end(), va.labels[i].begin(), va.labels[i].end());
        }
        use_val = detail::has_both_classes(vl);
    }

    std::vector<detail::Sample> samples;
    const std::size_t stride = spec.kind == ModelKind::lstm ? spec.seq_stride : 1;
    for (std::uint32_t u = 0; u < tr.seqs.size(); ++u) {
        const std::size_t n = tr.labels[u].size();
        if (n == 0) continue;
        if (tr.final_only[u]) {
            samples.push_back({u, static_cast<std::uint32_t>(n - 1)});
            continue;
        }
        // Windows end on the last frame as well as every stride-th frame.
        for (std::size_t t = (n - 1) % stride; t < n; t += stride) samples.push_back({u, static_cast<std::uint32_t>(t)});
    }
    double w_pos = 1.0, w_neg = 1.0;
    if (spec.class_weighting) {
        double np = 0;
        for (const auto& s : samples) np += tr.labels[s.utt][s.frame] != 0;
        const double nn = static_cast<double>(samples.size()) - np;
        if (np > 0 && nn > 0) {
            w_pos = static_cast<double>(samples.size()) / (2.0 * np);
            w_neg = static_cast<double>(samples.size()) / (2.0 * nn);
        }
    }

    std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
    const auto dim = static_cast<Eigen::Index>(spec.input_dim);
    TrainingLog log;
    Vec best = params;
    double best_f1 = -1.0;
    std::size_t since_best = 0;
    if (use_val && spec.epochs > 0) {
        best_f1 = detail::select_threshold(detail::score_set(spec, params, va)).second;
    }

    if (spec.kind == ModelKind::svm) {
        // Pegasos: stochastic sub-gradient steps of size 1/(lambda t) on the
        // L2-regularised hinge loss; the bias is an extra regularised input.
        const double lambda = spec.svm_lambda;
        Vec w = params.head(dim + 1);
        long t = 0;
        for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
            std::shuffle(samples.begin(), samples.end(), rng);
            double hinge = 0.0;
            for (const auto& s : samples) {
                ++t;
                const double eta = 1.0 / (lambda * static_cast<double>(t));
                const auto x = tr.seqs[s.utt].col(s.frame);
                const double y = tr.labels[s.utt][s.frame] ? 1.0 : -1.0;
                const double cw = y > 0 ? w_pos : w_neg;
                const double margin = y * (w.head(dim).dot(x) + w(dim));
                w *= (1.0 - eta * lambda);
                if (margin < 1.0) {
                    w.head(dim) += eta * cw * y * x;
                    w(dim) += eta * cw * y;
                    hinge += cw * (1.0 - margin);
                }
            }
            if (!w.allFinite()) throw NumericalError("SVM training diverged");
            params.head(dim + 1) = w;
            params = to_params(to_weights(params));
            log.train_loss.push_back(hinge / static_cast<double>(samples.size()));
            log.epochs_run = epoch + 1;
            if (opts.on_epoch) opts.on_epoch(epoch, log.train_loss.back(), 0.0);
        }
        best = params;
    } else {
        Adam adam(params.size(), spec.learning_rate);
        MlpNet mlp(spec);
        LstmNet lstm(spec);
        const std::size_t T = spec.seq_len;
        const std::size_t B = spec.batch_size;
        Vec grad(params.size());
        std::vector<std::size_t> ends;
        for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
            std::shuffle(samples.begin(), samples.end(), rng);
            double loss_sum = 0.0;
            std::size_t batches = 0;
            for (std::size_t start = 0; start < samples.size(); start += B) {
                const std::size_t nb = std::min(B, samples.size() - start);
                RowVec y(static_cast<Eigen::Index>(nb)), cw(static_cast<Eigen::Index>(nb));
                Mat X;
                if (spec.kind == ModelKind::mlp) {
                    X.resize(dim, static_cast<Eigen::Index>(nb));
                    for (std::size_t b = 0; b < nb; ++b) {
                        const auto& s = samples[start + b];
                        X.col(static_cast<Eigen::Index>(b)) = tr.seqs[s.utt].col(s.frame);
                    }
                } else {
                    X.resize(dim, static_cast<Eigen::Index>(T * nb));
                    for (std::size_t b = 0; b < nb; ++b) {
                        const auto& s = samples[start + b];
                        for (std::size_t k = 0; k < T; ++k) {
                            const long idx = static_cast<long>(s.frame) - static_cast<long>(T - 1 - k);
                            X.col(static_cast<Eigen::Index>(k * nb + b)) = tr.seqs[s.utt].col(std::max<long>(idx, 0));
                        }
                    }
                }
                for (std::size_t b = 0; b < nb; ++b) {
                    const auto& s = samples[start + b];
                    const int lab = tr.labels[s.utt][s.frame];
                    y(static_cast<Eigen::Index>(b)) = lab ? 1.0 : 0.0;
                    cw(static_cast<Eigen::Index>(b)) = lab ? w_pos : w_neg;
                }
                const double loss = spec.kind == ModelKind::mlp
                                        ? mlp.loss_grad(params, X, y, cw, &grad)
                                        : lstm.loss_grad(params, X, static_cast<Eigen::Index>(T), y, cw, &grad);
                if (!std::isfinite(loss) || !grad.allFinite())
                    throw NumericalError("training diverged (non-finite loss) in epoch " + std::to_string(epoch));
                adam.step(params, grad);
                loss_sum += loss;
                ++batches;
            }
            params = to_params(to_weights(params));
            log.train_loss.push_back(loss_sum / static_cast<double>(std::max<std::size_t>(batches, 1)));
            log.epochs_run = epoch + 1;
            double f1 = 0.0;
            if (use_val) {
                f1 = detail::select_threshold(detail::score_set(spec, params, va)).second;
                log.val_f1.push_back(f1);
                if (f1 > best_f1) {
                    best_f1 = f1;
                    best = params;
                    log.best_epoch = epoch + 1;
                    since_best = 0;
                } else if (++since_best >= spec.patience) {
                    if (opts.on_epoch) opts.on_epoch(epoch, log.train_loss.back(), f1);
                    break;
                }
            } else {
                best = params;
            }
            if (opts.on_epoch) opts.on_epoch(epoch, log.train_loss.back(), f1);
        }
    }

    Model m;
    m.spec = spec;
    m.weights = to_weights(best);
    m.norm_mean = norm.mean;
    m.norm_std = norm.std;
    const Vec stored = to_params(m.weights);
    if (use_val) {
        m.threshold = detail::select_threshold(detail::score_set(spec, stored, va)).first;
    } else if (spec.kind == ModelKind::lstm && tr.frames() > 20000) {
        // Threshold on a deterministic subset keeps LSTM scoring affordable.
        detail::PreparedSet sub;
        for (std::size_t i = 0; i < tr.seqs.size(); i += std::max<std::size_t>(1, tr.frames() / 20000 + 1)) {
            sub.seqs.push_back(tr.seqs[i]);
            sub.labels.push_back(tr.labels[i]);
            sub.final_only.push_back(tr.final_only[i]);
        }
        m.threshold = detail::select_threshold(detail::score_set(spec, stored, sub)).first;
    } else {
        m.threshold = detail::select_threshold(detail::score_set(spec, stored, tr)).first;
    }
    log.best_val_f1 = best_f1;
    if (opts.log) *opts.log = log;
    return m;
}

inline Model train_svm(std::span<const LabeledUtterance> train, std::span<const LabeledUtterance> val, ModelSpec spec) {
    spec.kind = ModelKind::svm;
    return train_model(spec, train, val);
}
inline Model train_mlp(std::span<const LabeledUtterance> train, std::span<const LabeledUtterance> val, ModelSpec spec) {
    spec.kind = ModelKind::mlp;
    return train_model(spec, train, val);
}
inline Model train_lstm(std::span<const LabeledUtterance> train, std::span<const LabeledUtterance> val, ModelSpec spec) {
    spec.kind = ModelKind::lstm;
    return train_model(spec, train, val);
}

/// Fixed-length sequence dataset: each window must have exactly seq_len
/// frames; its label applies to the final frame.
struct SequenceSet {
    std::vector<FeatureMatrix> windows;
    std::vector<int> labels;

    std::vector<LabeledUtterance> as_utterances(std::size_t seq_len) const {
        if (windows.size() != labels.size()) throw UsageError("window and label counts differ");
        std::vector<LabeledUtterance> out;
        out.reserve(windows.size());
        for (std::size_t i = 0; i < windows.size(); ++i) {
            if (windows[i].rows != seq_len)
                throw UsageError("ragged sequence: window " + std::to_string(i) + " has " +
                                 std::to_string(windows[i].rows) + " frames, expected " + std::to_string(seq_len));
            LabeledUtterance u{windows[i], std::vector<int>(seq_len, 0), true};
            u.labels.back() = labels[i];
            out.push_back(std::move(u));
        }
        return out;
    }
};

inline Model train_lstm(const SequenceSet& train, const SequenceSet& val, ModelSpec spec, const TrainOptions& opts = {}) {
    spec.kind = ModelKind::lstm;
    const auto tr = train.as_utterances(spec.seq_len);
    const auto va = val.as_utterances(spec.seq_len);
    return train_model(spec, tr, va, opts);
}

}  // namespace wadkit
