#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "wadkit/models/spec.hpp"

namespace wadkit {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;

inline double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// Numerically stable binary cross-entropy on a logit.
inline double bce_with_logit(double z, double y) {
    return std::max(z, 0.0) - y * z + std::log1p(std::exp(-std::abs(z)));
}

namespace detail {

template <typename Derived>
auto sigmoid_of(const Eigen::MatrixBase<Derived>& m) {
    return m.unaryExpr([](double z) { return sigmoid(z); });
}

inline ConstMatMap block(const Vec& p, const ParamBlock& b) {
    return ConstMatMap(p.data() + b.offset, static_cast<Eigen::Index>(b.rows), static_cast<Eigen::Index>(b.cols));
}
inline MatMap block(Vec& p, const ParamBlock& b) {
    return MatMap(p.data() + b.offset, static_cast<Eigen::Index>(b.rows), static_cast<Eigen::Index>(b.cols));
}

/// Mean weighted BCE over the batch; writes dL/dlogit into `dz`.
inline double bce_loss(const RowVec& z, const RowVec& y, const RowVec& w, RowVec& dz) {
    const auto B = static_cast<double>(z.size());
    double loss = 0.0;
    dz.resize(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        loss += w(i) * bce_with_logit(z(i), y(i));
        dz(i) = w(i) * (sigmoid(z(i)) - y(i)) / B;
    }
    return loss / B;
}

}  // namespace detail

/// Xavier-uniform feedforward weights with zero biases; LSTM weights
/// uniform in +-1/sqrt(h) with forget-gate bias +1.
inline Vec init_params(const ModelSpec& spec, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Vec p = Vec::Zero(static_cast<Eigen::Index>(weight_count(spec)));
    for (const auto& b : weight_layout(spec)) {
        auto m = detail::block(p, b);
        const bool bias = b.name.ends_with("bias");
        if (bias) {
            if (b.name.starts_with("lstm")) m.middleRows(static_cast<Eigen::Index>(b.rows / 4), static_cast<Eigen::Index>(b.rows / 4)).setConstant(1.0);
            continue;
        }
        double limit;
        if (b.name.starts_with("lstm")) limit = 1.0 / std::sqrt(static_cast<double>(spec.lstm_hidden));
        else limit = std::sqrt(6.0 / static_cast<double>(b.rows + b.cols));
        std::uniform_real_distribution<double> u(-limit, limit);
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = u(rng);
    }
    return p;
}

/// Linear scorer shared by the SVM: logit = w.x + b.
class LinearNet {
public:
    explicit LinearNet(const ModelSpec& spec) : layout_(weight_layout(spec)) {}

    RowVec logits(const Vec& p, const Mat& X) const {
        auto w = detail::block(p, layout_[0]);
        const double b = p(static_cast<Eigen::Index>(layout_[1].offset));
        RowVec z = w * X;
        z.array() += b;
        return z;
    }

private:
    std::vector<ParamBlock> layout_;
};

/// Fully connected ReLU stack with a single sigmoid output. Inputs are
/// columns of X. ReLU'(0) is taken as 0.
class MlpNet {
public:
    explicit MlpNet(const ModelSpec& spec) : layout_(weight_layout(spec)) {}

    RowVec logits(const Vec& p, const Mat& X) const {
        Mat a = X;
        const std::size_t n_layers = layout_.size() / 2;
        for (std::size_t l = 0; l + 1 < n_layers; ++l) {
            Mat z = detail::block(p, layout_[2 * l]) * a;
            z.colwise() += detail::block(p, layout_[2 * l + 1]).col(0);
            a = z.cwiseMax(0.0);
        }
        RowVec z = detail::block(p, layout_[layout_.size() - 2]) * a;
        z.array() += p(static_cast<Eigen::Index>(layout_.back().offset));
        return z;
    }

    double loss_grad(const Vec& p, const Mat& X, const RowVec& y, const RowVec& w, Vec* grad) const {
        const std::size_t n_layers = layout_.size() / 2;
        std::vector<Mat> acts;  // input of each layer
        std::vector<Mat> pre;   // pre-activation of hidden layers
        acts.push_back(X);
        for (std::size_t l = 0; l + 1 < n_layers; ++l) {
            Mat z = detail::block(p, layout_[2 * l]) * acts.back();
            z.colwise() += detail::block(p, layout_[2 * l + 1]).col(0);
            pre.push_back(z);
            acts.push_back(z.cwiseMax(0.0));
        }
        RowVec z = detail::block(p, layout_[layout_.size() - 2]) * acts.back();
        z.array() += p(static_cast<Eigen::Index>(layout_.back().offset));
        RowVec dz;
        const double loss = detail::bce_loss(z, y, w, dz);
        if (!grad) return loss;

        grad->setZero(p.size());
        Mat delta = dz;
        for (std::size_t l = n_layers; l-- > 0;) {
            const auto& wb = layout_[2 * l];
            const auto& bb = layout_[2 * l + 1];
            detail::block(*grad, wb) = delta * acts[l].transpose();
            detail::block(*grad, bb) = delta.rowwise().sum();
            if (l == 0) break;
            Mat back = detail::block(p, wb).transpose() * delta;
            delta = back.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
        }
        return loss;
    }

private:
    std::vector<ParamBlock> layout_;
};

/// Stacked unidirectional LSTM (gate order i, f, g, o) whose last hidden
/// state feeds a sigmoid unit. A batch of B sequences of length T is a
/// (in x T*B) matrix with step t in columns [t*B, (t+1)*B).
class LstmNet {
public:
    explicit LstmNet(const ModelSpec& spec)
        : layout_(weight_layout(spec)), layers_(spec.lstm_layers), hidden_(static_cast<Eigen::Index>(spec.lstm_hidden)) {}

    RowVec logits(const Vec& p, const Mat& X, Eigen::Index T) const {
        const Eigen::Index B = X.cols() / T;
        Mat input = X;
        Mat h, c;
        for (std::size_t l = 0; l < layers_; ++l) {
            auto wih = detail::block(p, layout_[3 * l]);
            auto whh = detail::block(p, layout_[3 * l + 1]);
            auto bias = detail::block(p, layout_[3 * l + 2]).col(0);
            Mat xg = wih * input;
            xg.colwise() += bias;
            h = Mat::Zero(hidden_, B);
            c = Mat::Zero(hidden_, B);
            Mat out(hidden_, T * B);
            for (Eigen::Index t = 0; t < T; ++t) {
                Mat g = xg.middleCols(t * B, B) + whh * h;
                step(g, c, h);
                out.middleCols(t * B, B) = h;
            }
            input = std::move(out);
        }
        RowVec z = detail::block(p, layout_[3 * layers_]) * h;
        z.array() += p(static_cast<Eigen::Index>(layout_.back().offset));
        return z;
    }

    double loss_grad(const Vec& p, const Mat& X, Eigen::Index T, const RowVec& y, const RowVec& w, Vec* grad) const {
        const Eigen::Index B = X.cols() / T;
        const Eigen::Index H = hidden_;
        struct Cache {
            Mat input;  // in x T*B
            Mat gates;  // 4H x T*B, post-activation
            Mat cells;  // H x T*B
            Mat hs;     // H x T*B
        };
        std::vector<Cache> caches(layers_);
        const Mat* input = &X;
        for (std::size_t l = 0; l < layers_; ++l) {
            auto& cc = caches[l];
            cc.input = *input;
            auto wih = detail::block(p, layout_[3 * l]);
            auto whh = detail::block(p, layout_[3 * l + 1]);
            auto bias = detail::block(p, layout_[3 * l + 2]).col(0);
            Mat xg = wih * cc.input;
            xg.colwise() += bias;
            cc.gates.resize(4 * H, T * B);
            cc.cells.resize(H, T * B);
            cc.hs.resize(H, T * B);
            Mat h = Mat::Zero(H, B), c = Mat::Zero(H, B);
            for (Eigen::Index t = 0; t < T; ++t) {
                Mat g = xg.middleCols(t * B, B) + whh * h;
                step(g, c, h);
                cc.gates.middleCols(t * B, B) = g;
                cc.cells.middleCols(t * B, B) = c;
                cc.hs.middleCols(t * B, B) = h;
            }
            input = &cc.hs;
        }
        const auto& top = caches.back();
        Mat h_last = top.hs.middleCols((T - 1) * B, B);
        RowVec z = detail::block(p, layout_[3 * layers_]) * h_last;
        z.array() += p(static_cast<Eigen::Index>(layout_.back().offset));
        RowVec dz;
        const double loss = detail::bce_loss(z, y, w, dz);
        if (!grad) return loss;

        grad->setZero(p.size());
        detail::block(*grad, layout_[3 * layers_]) = dz * h_last.transpose();
        (*grad)(static_cast<Eigen::Index>(layout_.back().offset)) = dz.sum();

        // dH holds dL/dh_t from the layer above (only the last step for the top).
        Mat dH = Mat::Zero(H, T * B);
        dH.middleCols((T - 1) * B, B) = detail::block(p, layout_[3 * layers_]).transpose() * dz;
        for (std::size_t l = layers_; l-- > 0;) {
            const auto& cc = caches[l];
            auto whh = detail::block(p, layout_[3 * l + 1]);
            Mat dA(4 * H, T * B);
            Mat dh_next = Mat::Zero(H, B), dc_next = Mat::Zero(H, B);
            for (Eigen::Index t = T; t-- > 0;) {
                const auto g = cc.gates.middleCols(t * B, B);
                const auto gi = g.topRows(H).array();
                const auto gf = g.middleRows(H, H).array();
                const auto gg = g.middleRows(2 * H, H).array();
                const auto go = g.bottomRows(H).array();
                const Mat c = cc.cells.middleCols(t * B, B);
                const Mat c_prev = t > 0 ? Mat(cc.cells.middleCols((t - 1) * B, B)) : Mat::Zero(H, B);
                const Eigen::ArrayXXd tc = c.array().tanh();

                const Eigen::ArrayXXd dh = dH.middleCols(t * B, B).array() + dh_next.array();
                const Eigen::ArrayXXd dc = dc_next.array() + dh * go * (1.0 - tc * tc);
                auto blk = dA.middleCols(t * B, B);
                blk.topRows(H) = (dc * gg * gi * (1.0 - gi)).matrix();
                blk.middleRows(H, H) = (dc * c_prev.array() * gf * (1.0 - gf)).matrix();
                blk.middleRows(2 * H, H) = (dc * gi * (1.0 - gg * gg)).matrix();
                blk.bottomRows(H) = (dh * tc * go * (1.0 - go)).matrix();
                dc_next = (dc * gf).matrix();
                dh_next = whh.transpose() * blk;
            }
            detail::block(*grad, layout_[3 * l]) = dA * cc.input.transpose();
            Mat hs_prev = Mat::Zero(H, T * B);
            if (T > 1) hs_prev.rightCols((T - 1) * B) = cc.hs.leftCols((T - 1) * B);
            detail::block(*grad, layout_[3 * l + 1]) = dA * hs_prev.transpose();
            detail::block(*grad, layout_[3 * l + 2]) = dA.rowwise().sum();
            if (l > 0) dH = detail::block(p, layout_[3 * l]).transpose() * dA;
        }
        return loss;
    }

private:
    // Applies gate nonlinearities to `g` in place and advances (c, h).
    void step(Mat& g, Mat& c, Mat& h) const {
        const Eigen::Index H = hidden_;
        g.topRows(2 * H) = detail::sigmoid_of(g.topRows(2 * H));
        g.middleRows(2 * H, H) = g.middleRows(2 * H, H).array().tanh().matrix();
        g.bottomRows(H) = detail::sigmoid_of(g.bottomRows(H));
        c = (g.middleRows(H, H).array() * c.array() + g.topRows(H).array() * g.middleRows(2 * H, H).array()).matrix();
        h = (g.bottomRows(H).array() * c.array().tanh()).matrix();
    }

    std::vector<ParamBlock> layout_;
    std::size_t layers_;
    Eigen::Index hidden_;
};

}  // namespace wadkit
