#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "rhetorica/graph.hpp"
#include "rhetorica/rng.hpp"
#include "rhetorica/stats.hpp"
#include "rhetorica/stm.hpp"

namespace rhetorica {

// ---- proportion-scale topic correlations -------------------------------------

// Monte-Carlo transform of the (K-1)-dimensional Sigma to correlations on the
// proportion scale: sample eta ~ N(mu_d, Sigma) cycling over the fitted
// documents, push through the softmax, correlate. Seeded and deterministic.
inline Eigen::MatrixXd topic_correlations(const StmModel& model, const CovariateDesign& design,
                                          int n_draws = 10000, std::uint64_t seed = 1) {
    const int K = model.K;
    const int Km1 = K - 1;
    Eigen::LLT<Eigen::MatrixXd> llt(model.Sigma);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("topic_correlations: Sigma not positive definite");
    const Eigen::MatrixXd L = llt.matrixL();
    const Eigen::MatrixXd mu_all = design.X * model.gamma;
    const int D = static_cast<int>(mu_all.rows());
    if (D == 0) throw std::runtime_error("topic_correlations: empty corpus");

    Rng rng(derive_seed(seed, "netstruct.corr"));
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(K);
    Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(K, K);
    Eigen::VectorXd z(Km1);
    for (int i = 0; i < n_draws; ++i) {
        const int d = i % D;
        for (int a = 0; a < Km1; ++a) z(a) = rng.normal();
        const Eigen::VectorXd eta = mu_all.row(d).transpose() + L * z;
        const Eigen::VectorXd theta = stm_detail::softmax_padded(eta);
        mean += theta;
        cross.noalias() += theta * theta.transpose();
    }
    mean /= n_draws;
    Eigen::MatrixXd cov = cross / n_draws - mean * mean.transpose();
    Eigen::MatrixXd corr(K, K);
    for (int a = 0; a < K; ++a) {
        for (int b = 0; b < K; ++b) {
            const double den = std::sqrt(cov(a, a) * cov(b, b));
            corr(a, b) = den > 0 ? cov(a, b) / den : 0.0;
        }
        corr(a, a) = 1.0;
    }
    return corr;
}

// ---- Meinshausen-Buhlmann neighborhood selection -------------------------------

namespace net_detail {

// Lasso by cyclic coordinate descent on standardized predictors:
// (1/2n)||y - Xb||^2 + lambda ||b||_1.
inline Eigen::VectorXd lasso_cd(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                double lambda) {
    const int n = static_cast<int>(X.rows());
    const int p = static_cast<int>(X.cols());
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd resid = y;
    const double inv_n = 1.0 / n;
    std::vector<double> norm2(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j) norm2[static_cast<std::size_t>(j)] = X.col(j).squaredNorm() * inv_n;
    for (int sweep = 0; sweep < 1000; ++sweep) {
        double max_delta = 0.0;
        for (int j = 0; j < p; ++j) {
            const double nj = norm2[static_cast<std::size_t>(j)];
            if (nj <= 0) continue;
            const double rho = inv_n * X.col(j).dot(resid) + nj * b(j);
            const double bj = stats::soft_threshold(rho, lambda) / nj;
            const double delta = bj - b(j);
            if (delta != 0.0) {
                resid -= delta * X.col(j);
                b(j) = bj;
                max_delta = std::max(max_delta, std::fabs(delta));
            }
        }
        if (max_delta < 1e-10) break;
    }
    return b;
}

}  // namespace net_detail

// Neighborhood selection: per topic, an L1 regression on the remaining topics
// with the rate lambda(alpha) = 2 sigma_j n^{-1/2} Phi^{-1}(1 - alpha/(2 K^2));
// an edge is kept only when selected in both directions (AND rule). Kept
// edges carry the input correlation as weight.
inline TopicGraph sparsify(const Eigen::MatrixXd& corr, const Eigen::MatrixXd& theta_samples,
                           double alpha = 0.05, std::vector<std::string>* warnings = nullptr) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("sparsify: alpha must be in (0,1)");
    const int K = static_cast<int>(theta_samples.cols());
    const int n = static_cast<int>(theta_samples.rows());
    if (corr.rows() != K || corr.cols() != K)
        throw std::invalid_argument("sparsify: correlation matrix not aligned with samples");

    // standardize columns
    Eigen::MatrixXd Z(n, K);
    std::vector<double> sd(static_cast<std::size_t>(K), 0.0);
    std::vector<bool> degenerate(static_cast<std::size_t>(K), false);
    for (int j = 0; j < K; ++j) {
        const double mean = theta_samples.col(j).mean();
        Eigen::VectorXd c = theta_samples.col(j).array() - mean;
        const double s = std::sqrt(c.squaredNorm() / n);
        sd[static_cast<std::size_t>(j)] = s;
        if (s <= 1e-14) {
            degenerate[static_cast<std::size_t>(j)] = true;
            Z.col(j).setZero();
            if (warnings)
                warnings->push_back("sparsify: constant topic column " + std::to_string(j) +
                                    "; isolated");
        } else {
            Z.col(j) = c / s;
        }
    }

    const double quantile = stats::normal_quantile(1.0 - alpha / (2.0 * K * K));
    std::vector<std::vector<bool>> selected(static_cast<std::size_t>(K),
                                            std::vector<bool>(static_cast<std::size_t>(K), false));
    Eigen::MatrixXd Xother(n, K - 1);
    for (int j = 0; j < K; ++j) {
        if (degenerate[static_cast<std::size_t>(j)]) continue;
        int c = 0;
        std::vector<int> idx;
        for (int i = 0; i < K; ++i) {
            if (i == j) continue;
            Xother.col(c++) = Z.col(i);
            idx.push_back(i);
        }
        const Eigen::VectorXd y = Z.col(j);  // unit variance
        const double lambda = 2.0 * quantile / std::sqrt(static_cast<double>(n));
        const Eigen::VectorXd b = net_detail::lasso_cd(Xother, y, lambda);
        for (int i = 0; i < K - 1; ++i)
            if (b(i) != 0.0)
                selected[static_cast<std::size_t>(j)][static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] = true;
    }

    TopicGraph g;
    g.threshold = 0.0;
    g.provenance = "mb-and alpha=" + csv::fmt(alpha) + " n=" + std::to_string(n);
    for (int k = 0; k < K; ++k) g.nodes.push_back({k, {}, -1});
    for (int u = 0; u < K; ++u)
        for (int v = u + 1; v < K; ++v)
            if (selected[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] &&
                selected[static_cast<std::size_t>(v)][static_cast<std::size_t>(u)])
                g.edges.push_back({u, v, corr(u, v)});
    return g;
}

// ---- filtration -----------------------------------------------------------------

// Per threshold: keep edges with |weight| >= threshold (ties kept), then drop
// isolated nodes. Thresholds must be descending, in (0,1].
inline std::vector<TopicGraph> filtrate(const TopicGraph& g, const std::vector<double>& thresholds) {
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        if (!(thresholds[i] > 0.0 && thresholds[i] <= 1.0))
            throw std::invalid_argument("filtrate: thresholds must be in (0,1]");
        if (i > 0 && thresholds[i] >= thresholds[i - 1])
            throw std::invalid_argument("filtrate: thresholds must be descending");
    }
    std::vector<TopicGraph> out;
    for (const double th : thresholds) {
        TopicGraph f;
        f.threshold = th;
        f.provenance = g.provenance + " filtration=" + csv::fmt(th);
        std::vector<bool> keep_node(g.nodes.size(), false);
        for (const auto& e : g.edges) {
            if (std::fabs(e.weight) >= th) {
                f.edges.push_back(e);
                for (std::size_t i = 0; i < g.nodes.size(); ++i) {
                    if (g.nodes[i].id == e.u || g.nodes[i].id == e.v) keep_node[i] = true;
                }
            }
        }
        for (std::size_t i = 0; i < g.nodes.size(); ++i)
            if (keep_node[i]) f.nodes.push_back(g.nodes[i]);
        out.push_back(std::move(f));
    }
    return out;
}

// ---- triangle balance ---------------------------------------------------------------

struct Triangle {
    int a = 0, b = 0, c = 0;
    int positive_edges = 0;
    bool balanced = false;
};

struct TriangleReport {
    std::vector<Triangle> triangles;
    int n_balanced = 0;
    int n_imbalanced = 0;
};

// A triangle is balanced iff it has an odd number of positive edges.
inline TriangleReport triangle_balance(const TopicGraph& g) {
    TriangleReport report;
    std::vector<int> ids;
    ids.reserve(g.nodes.size());
    for (const auto& n : g.nodes) ids.push_back(n.id);
    std::sort(ids.begin(), ids.end());
    const int n = static_cast<int>(ids.size());
    std::vector<int> idx_of;
    if (n > 0) {
        idx_of.assign(static_cast<std::size_t>(ids.back()) + 1, -1);
        for (int i = 0; i < n; ++i) idx_of[static_cast<std::size_t>(ids[static_cast<std::size_t>(i)])] = i;
    }
    // dense adjacency: 0 = absent, +1 / -1 = edge sign
    std::vector<signed char> adj(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0);
    auto at = [&](int i, int j) -> signed char& {
        return adj[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
                   static_cast<std::size_t>(j)];
    };
    for (const auto& e : g.edges) {
        if (e.u == e.v) continue;
        if (e.u > static_cast<int>(idx_of.size()) - 1 || e.v > static_cast<int>(idx_of.size()) - 1)
            continue;
        const int i = idx_of[static_cast<std::size_t>(e.u)];
        const int j = idx_of[static_cast<std::size_t>(e.v)];
        if (i < 0 || j < 0) continue;
        const signed char s = e.weight >= 0 ? 1 : -1;
        at(i, j) = s;
        at(j, i) = s;
    }
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (!at(i, j)) continue;
            for (int k = j + 1; k < n; ++k) {
                if (!at(i, k) || !at(j, k)) continue;
                Triangle t;
                t.a = ids[static_cast<std::size_t>(i)];
                t.b = ids[static_cast<std::size_t>(j)];
                t.c = ids[static_cast<std::size_t>(k)];
                t.positive_edges = (at(i, j) > 0) + (at(i, k) > 0) + (at(j, k) > 0);
                t.balanced = t.positive_edges % 2 == 1;
                report.triangles.push_back(t);
                ++(t.balanced ? report.n_balanced : report.n_imbalanced);
            }
        }
    }
    return report;
}

}  // namespace rhetorica
