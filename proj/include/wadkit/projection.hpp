#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "wadkit/errors.hpp"

namespace wadkit {

struct PcaResult {
    Eigen::MatrixXd coords;     // n x k
    Eigen::MatrixXd axes;       // d x k, orthonormal columns
    Eigen::VectorXd variances;  // per axis, descending
    Eigen::RowVectorXd mean;
};

/// Principal components by eigendecomposition of the sample covariance. Each
/// axis is signed so its largest-magnitude component is positive.
inline PcaResult pca(const Eigen::MatrixXd& X, Eigen::Index k) {
    const auto n = X.rows(), d = X.cols();
    if (n < 2) throw UsageError("PCA needs at least two points");
    if (k < 1 || k > d) throw UsageError("PCA dimension must lie in [1, " + std::to_string(d) + "]");
    if (!X.allFinite()) throw NumericalError("PCA input contains non-finite values");
    PcaResult r;
    r.mean = X.colwise().mean();
    const Eigen::MatrixXd Xc = X.rowwise() - r.mean;
    const Eigen::MatrixXd C = (Xc.transpose() * Xc) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
    if (es.info() != Eigen::Success) throw NumericalError("covariance eigendecomposition failed");
    r.axes.resize(d, k);
    r.variances.resize(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        Eigen::VectorXd v = es.eigenvectors().col(d - 1 - j);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0) v = -v;
        r.axes.col(j) = v;
        r.variances(j) = std::max(0.0, es.eigenvalues()(d - 1 - j));
    }
    r.coords = Xc * r.axes;
    return r;
}

/// 2-D PCA projection used by the labeller.
inline Eigen::MatrixXd project_pca(const Eigen::MatrixXd& X) {
    if (X.rows() < 3) throw UsageError("PCA projection needs at least 3 points");
    if (X.cols() < 2) throw UsageError("PCA projection needs at least 2 input dimensions");
    return pca(X, 2).coords;
}

struct TsneConfig {
    double perplexity = 30.0;
    int iterations = 1000;
    std::uint64_t seed = 1;
    double learning_rate = 200.0;
    double exaggeration = 4.0;
    int exaggeration_iters = 100;
    int momentum_switch = 250;
    double initial_momentum = 0.5;
    double final_momentum = 0.8;
    int pca_dims = 50;
    double entropy_tol = 1e-5;
    double init_sd = 1e-4;
};

struct TsneResult {
    Eigen::MatrixXd coords;              // n x 2
    std::vector<double> kl;              // KL(P||Q) after each iteration
    std::vector<double> perplexity;      // achieved per point
    std::size_t rejected_steps = 0;
};

namespace detail {

/// Row-conditional Gaussian affinities whose entropy matches log(perplexity).
inline Eigen::MatrixXd calibrated_affinities(const Eigen::MatrixXd& D2, double perplexity, double tol,
                                             std::vector<double>& achieved) {
    const auto n = D2.rows();
    const double target = std::log(perplexity);
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
    achieved.assign(static_cast<std::size_t>(n), 0.0);
    std::vector<double> p(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        double dmin = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) dmin = std::min(dmin, D2(i, j));
        double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
        double H = 0.0;
        bool ok = false;
        for (int it = 0; it < 200; ++it) {
            double sum = 0.0, wsum = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) continue;
                const double dj = D2(i, j) - dmin;
                p[static_cast<std::size_t>(j)] = std::exp(-beta * dj);
                sum += p[static_cast<std::size_t>(j)];
                wsum += dj * p[static_cast<std::size_t>(j)];
            }
            H = std::log(sum) + beta * wsum / sum;
            if (std::abs(H - target) < tol) {
                ok = true;
                for (Eigen::Index j = 0; j < n; ++j) P(i, j) = j == i ? 0.0 : p[static_cast<std::size_t>(j)] / sum;
                break;
            }
            if (H > target) {
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
        if (!ok) throw NumericalError("perplexity calibration did not converge for point " + std::to_string(i));
        achieved[static_cast<std::size_t>(i)] = std::exp(H);
    }
    return P;
}

struct TsneEval {
    double kl = 0.0;
    Eigen::MatrixXd grad;
};

/// KL(P||Q) and the gradient of KL(ex*P||Q) at Y, with Student-t kernel.
inline TsneEval tsne_eval(const Eigen::MatrixXd& P, double p_log_p, const Eigen::MatrixXd& Y, double ex) {
    const auto n = Y.rows();
    double Z = 0.0, plog = 0.0;
    Eigen::MatrixXd attr = Eigen::MatrixXd::Zero(n, 2), rep = Eigen::MatrixXd::Zero(n, 2);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double dx = Y(i, 0) - Y(j, 0), dy = Y(i, 1) - Y(j, 1);
            const double num = 1.0 / (1.0 + dx * dx + dy * dy);
            Z += 2.0 * num;
            const double pij = P(i, j);
            plog += 2.0 * pij * std::log(num);
            const double a = pij * num, r = num * num;
            attr(i, 0) += a * dx;
            attr(i, 1) += a * dy;
            attr(j, 0) -= a * dx;
            attr(j, 1) -= a * dy;
            rep(i, 0) += r * dx;
            rep(i, 1) += r * dy;
            rep(j, 0) -= r * dx;
            rep(j, 1) -= r * dy;
        }
    return {p_log_p - plog + std::log(Z), 4.0 * (ex * attr - rep / Z)};
}

}  // namespace detail

/// Exact t-SNE to two dimensions. After the exaggeration phase a step that
/// would raise KL(P||Q) is rejected: momentum and gains are reset and the
/// step size halved, so the recorded KL never increases from then on.
inline TsneResult project_tsne(const Eigen::MatrixXd& X, const TsneConfig& cfg = {}) {
    const auto n = X.rows();
    if (n < 5) throw UsageError("t-SNE needs at least 5 points");
    if (!(cfg.perplexity > 0.0) || cfg.perplexity >= static_cast<double>(n - 1) / 3.0)
        throw UsageError("perplexity " + std::to_string(cfg.perplexity) + " infeasible for " + std::to_string(n) +
                         " points (must be below (n-1)/3)");
    if (!X.allFinite()) throw NumericalError("t-SNE input contains non-finite values");

    const Eigen::Index k = std::min<Eigen::Index>(cfg.pca_dims, X.cols());
    const Eigen::MatrixXd R = pca(X, k).coords;
    const Eigen::VectorXd sq = R.rowwise().squaredNorm();
    Eigen::MatrixXd D2 = (sq.replicate(1, n) + sq.transpose().replicate(n, 1) - 2.0 * R * R.transpose()).cwiseMax(0.0);
    D2.diagonal().setZero();

    TsneResult res;
    Eigen::MatrixXd P = detail::calibrated_affinities(D2, cfg.perplexity, cfg.entropy_tol, res.perplexity);
    P = (P + P.transpose()).eval() / (2.0 * static_cast<double>(n));
    P = P.cwiseMax(1e-12);
    P.diagonal().setZero();
    P /= P.sum();
    double p_log_p = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (i != j) p_log_p += P(i, j) * std::log(P(i, j));

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> nd(0.0, cfg.init_sd);
    Eigen::MatrixXd Y(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) Y(i, 0) = nd(rng), Y(i, 1) = nd(rng);

    Eigen::MatrixXd vel = Eigen::MatrixXd::Zero(n, 2), gains = Eigen::MatrixXd::Ones(n, 2);
    double scale = 1.0;
    auto ex_at = [&](int it) { return it < cfg.exaggeration_iters ? cfg.exaggeration : 1.0; };
    double cur_ex = ex_at(0);
    auto cur = detail::tsne_eval(P, p_log_p, Y, cur_ex);
    for (int it = 0; it < cfg.iterations; ++it) {
        if (ex_at(it) != cur_ex) cur = detail::tsne_eval(P, p_log_p, Y, cur_ex = ex_at(it));
        const double mom = it < cfg.momentum_switch ? cfg.initial_momentum : cfg.final_momentum;
        for (Eigen::Index i = 0; i < n; ++i)
            for (int c = 0; c < 2; ++c) {
                double& g = gains(i, c);
                g = (cur.grad(i, c) > 0) != (vel(i, c) > 0) ? g + 0.2 : g * 0.8;
                g = std::max(g, 0.01);
            }
        const Eigen::MatrixXd step = mom * vel - cfg.learning_rate * scale * gains.cwiseProduct(cur.grad);
        Eigen::MatrixXd cand = Y + step;
        cand.rowwise() -= cand.colwise().mean();
        auto next = detail::tsne_eval(P, p_log_p, cand, ex_at(it + 1));
        const double next_ex = ex_at(it + 1);
        if (it >= cfg.exaggeration_iters && !(next.kl <= cur.kl)) {
            ++res.rejected_steps;
            vel.setZero();
            gains.setOnes();
            scale *= 0.5;
            res.kl.push_back(cur.kl);
            continue;
        }
        vel = step;
        Y = std::move(cand);
        cur = std::move(next);
        cur_ex = next_ex;
        scale = std::min(1.0, 2.0 * scale);
        res.kl.push_back(cur.kl);
    }
    if (!Y.allFinite()) throw NumericalError("t-SNE diverged");
    res.coords = std::move(Y);
    return res;
}

}  // namespace wadkit
