#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "rhetorica/design.hpp"
#include "rhetorica/parallel.hpp"
#include "rhetorica/prep.hpp"
#include "rhetorica/rng.hpp"
#include "rhetorica/stats.hpp"

namespace rhetorica {

struct StmInit {
    enum class Kind { Spectral, Random } kind = Kind::Spectral;
    std::uint64_t seed = 1;  // used by Random
};

struct StmConfig {
    int K = 38;
    int max_em_iters = 500;
    double em_tol = 1e-05;
    StmInit init;
    int gamma_max_iters = 5000;
    // Gamma(s, r) hyperpriors on the prevalence coefficient variance and on
    // the Laplace scales of the content deviations. The source never reports
    // values; these defaults are config-exposed and documented as unknowns.
    double s_gamma = 1.0;
    double r_gamma = 0.05;
    double s_kappa = 1.0;
    double r_kappa = 0.01;
    int newton_max_iters = 50;
    int kappa_max_sweeps = 150;

    double kappa_penalty() const { return r_kappa / s_kappa; }
};

struct StmModel {
    int K = 0;
    Eigen::MatrixXd gamma;                 // P x (K-1)
    Eigen::VectorXd sigma2;                // per-topic prevalence prior variance (K-1)
    Eigen::MatrixXd Sigma;                 // (K-1) x (K-1)
    Eigen::VectorXd m;                     // baseline log token frequency (N)
    Eigen::MatrixXd kappa_t;               // K x N topic deviations
    Eigen::MatrixXd kappa_c;               // A x N content-covariate deviations
    std::vector<Eigen::MatrixXd> kappa_i;  // A of K x N interaction deviations
    Eigen::MatrixXd theta;                 // D x K
    Eigen::MatrixXd eta_hat;               // D x (K-1) variational modes
    std::vector<Eigen::MatrixXd> nu;       // per-doc posterior covariance (K-1)^2
    std::vector<double> bound_trace;
    std::optional<int> converged_at;
    std::vector<std::string> warnings;
    int content_levels = 1;  // observed content levels (1 disables the content model)

    // Topic-token distribution for content level y, topic k (simplex row,
    // floored at 1e-12 before normalization).
    Eigen::VectorXd beta_row(int y, int k) const {
        Eigen::ArrayXd logits = (m + kappa_t.row(k).transpose()).array();
        if (content_levels > 1) {
            logits += kappa_c.row(y).transpose().array();
            logits += kappa_i[static_cast<std::size_t>(y)].row(k).transpose().array();
        }
        const double mx = logits.maxCoeff();
        Eigen::ArrayXd b = (logits - mx).exp();
        b = b.max(1e-12);
        return (b / b.sum()).matrix();
    }
};

namespace stm_detail {

inline std::vector<Eigen::MatrixXd> build_beta(const StmModel& model, int levels) {
    std::vector<Eigen::MatrixXd> beta(static_cast<std::size_t>(levels));
    const int K = model.K;
    const int N = static_cast<int>(model.m.size());
    for (int y = 0; y < levels; ++y) {
        Eigen::MatrixXd b(K, N);
        for (int k = 0; k < K; ++k) b.row(k) = model.beta_row(y, k).transpose();
        beta[static_cast<std::size_t>(y)] = std::move(b);
    }
    return beta;
}

inline Eigen::VectorXd softmax_padded(const Eigen::VectorXd& eta) {
    const int K = static_cast<int>(eta.size()) + 1;
    Eigen::VectorXd full(K);
    full.head(K - 1) = eta;
    full(K - 1) = 0.0;
    const double mx = full.maxCoeff();
    Eigen::ArrayXd t = (full.array() - mx).exp();
    return (t / t.sum()).matrix();
}

}  // namespace stm_detail

struct DocPosterior {
    Eigen::VectorXd eta_hat;  // (K-1)
    Eigen::MatrixXd nu;       // (K-1) x (K-1) inverse negative curvature
    Eigen::VectorXd theta;    // (K)
    std::vector<std::pair<int, Eigen::VectorXd>> phi;  // token index -> responsibilities
    double bound = 0.0;
};

// Shared per-iteration context: beta cache for the doc's content level plus
// the prior factorization.
struct EStepContext {
    const Eigen::MatrixXd* beta = nullptr;  // K x N
    Eigen::MatrixXd sigma_inv;
    double sigma_logdet = 0.0;
};

// Laplace-approximation e-step for one document: Newton ascent with
// backtracking on log p(w | eta) + log N(eta; mu, Sigma), theta pinned to
// softmax(eta || 0).
inline DocPosterior e_step_doc(const std::vector<std::pair<int, int>>& counts,
                               const Eigen::VectorXd& mu, const EStepContext& ctx,
                               const StmConfig& cfg, const Vocabulary* vocab = nullptr,
                               const Eigen::VectorXd* warm_start = nullptr) {
    const Eigen::MatrixXd& beta = *ctx.beta;
    const int K = static_cast<int>(beta.rows());
    const int Km1 = K - 1;

    DocPosterior post;
    if (counts.empty()) {
        post.eta_hat = mu;
        post.theta = stm_detail::softmax_padded(mu);
        post.nu = ctx.sigma_inv.llt().solve(Eigen::MatrixXd::Identity(Km1, Km1));
        post.bound = 0.0;  // the Gaussian evidence integrates to one exactly
        return post;
    }

    double total = 0.0;
    for (const auto& [v, c] : counts) total += c;

    auto objective = [&](const Eigen::VectorXd& eta, Eigen::VectorXd& theta) {
        theta = stm_detail::softmax_padded(eta);
        double ll = 0.0;
        for (const auto& [v, c] : counts) {
            const double sv = theta.dot(beta.col(v));
            if (!(sv > 0.0)) {
                const std::string tok =
                    vocab ? vocab->entries[static_cast<std::size_t>(v)].token : std::to_string(v);
                throw std::runtime_error(
                    "e_step: zero probability mass for observed token '" + tok + "'");
            }
            ll += c * std::log(sv);
        }
        const Eigen::VectorXd r = eta - mu;
        return ll - 0.5 * r.dot(ctx.sigma_inv * r);
    };

    Eigen::VectorXd eta = warm_start ? *warm_start : mu;
    Eigen::VectorXd theta;
    double f = objective(eta, theta);

    Eigen::VectorXd grad(Km1);
    Eigen::MatrixXd neg_hess(Km1, Km1);
    Eigen::VectorXd A(K);
    Eigen::MatrixXd B(K, K);

    auto fill_curvature = [&](const Eigen::VectorXd& th) {
        A.setZero();
        B.setZero();
        for (const auto& [v, c] : counts) {
            const Eigen::VectorXd bv = beta.col(v);
            const double sv = th.dot(bv);
            const Eigen::VectorXd w = bv / sv;
            A += c * w;
            B.noalias() += c * w * w.transpose();
        }
        for (int a = 0; a < Km1; ++a) {
            for (int b = 0; b <= a; ++b) {
                double h = th(a) * th(b) * (total - B(a, b));
                if (a == b) h += th(a) * (A(a) - total);
                neg_hess(a, b) = -h;
                neg_hess(b, a) = -h;
            }
        }
        neg_hess += ctx.sigma_inv;
    };

    for (int iter = 0; iter < cfg.newton_max_iters; ++iter) {
        fill_curvature(theta);
        const Eigen::VectorXd prior_grad = ctx.sigma_inv * (eta - mu);
        for (int a = 0; a < Km1; ++a) grad(a) = theta(a) * (A(a) - total) - prior_grad(a);
        if (grad.norm() <= 1e-9 * (1.0 + total)) break;

        Eigen::LLT<Eigen::MatrixXd> llt(neg_hess);
        Eigen::VectorXd dir;
        if (llt.info() == Eigen::Success) {
            dir = llt.solve(grad);
        } else {
            const Eigen::MatrixXd ridged =
                neg_hess + 1e-6 * (1.0 + total) * Eigen::MatrixXd::Identity(Km1, Km1);
            dir = ridged.ldlt().solve(grad);
        }

        double step = 1.0;
        const double slope = grad.dot(dir);
        bool moved = false;
        for (int ls = 0; ls < 40; ++ls) {
            Eigen::VectorXd cand = eta + step * dir;
            Eigen::VectorXd cand_theta;
            const double fc = objective(cand, cand_theta);
            if (fc >= f + 1e-4 * step * slope) {
                eta = std::move(cand);
                theta = std::move(cand_theta);
                f = fc;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
    }

    fill_curvature(theta);
    Eigen::LLT<Eigen::MatrixXd> llt(neg_hess);
    if (llt.info() != Eigen::Success) {
        double ridge = 1e-10 * (1.0 + neg_hess.diagonal().cwiseAbs().maxCoeff());
        for (int attempt = 0; attempt < 40 && llt.info() != Eigen::Success; ++attempt) {
            neg_hess += ridge * Eigen::MatrixXd::Identity(Km1, Km1);
            llt.compute(neg_hess);
            ridge *= 10.0;
        }
    }
    double logdet_negh = 0.0;
    for (int i = 0; i < Km1; ++i) logdet_negh += 2.0 * std::log(llt.matrixL()(i, i));

    post.nu = llt.solve(Eigen::MatrixXd::Identity(Km1, Km1));
    post.eta_hat = eta;
    post.theta = theta;
    post.bound = f - 0.5 * ctx.sigma_logdet - 0.5 * logdet_negh;

    post.phi.reserve(counts.size());
    for (const auto& [v, c] : counts) {
        Eigen::ArrayXd resp = theta.array() * beta.col(v).array();
        resp /= resp.sum();
        post.phi.emplace_back(v, Eigen::VectorXd(resp.matrix()));
    }
    return post;
}

// ---- initialization -------------------------------------------------------------

struct InitResult {
    Eigen::VectorXd m;
    Eigen::MatrixXd kappa_t;  // K x N
};

namespace stm_detail {

// min ||q - M' c||^2 over the simplex by exponentiated gradient; deterministic.
inline Eigen::VectorXd simplex_ls(const Eigen::MatrixXd& MMt, const Eigen::VectorXd& Mq) {
    const int K = static_cast<int>(MMt.rows());
    Eigen::VectorXd c = Eigen::VectorXd::Constant(K, 1.0 / K);
    const double lmax = MMt.trace();
    const double step = lmax > 0 ? 2.0 / lmax : 1.0;
    for (int it = 0; it < 400; ++it) {
        const Eigen::VectorXd grad = MMt * c - Mq;
        Eigen::ArrayXd lg = c.array().max(1e-300).log() - step * grad.array();
        const double mx = lg.maxCoeff();
        Eigen::ArrayXd nc = (lg - mx).exp();
        nc /= nc.sum();
        const double delta = (nc.matrix() - c).lpNorm<1>();
        c = nc.matrix();
        if (delta < 1e-12) break;
    }
    return c;
}

inline Eigen::VectorXd baseline_log_freq(const CorpusMatrix& mat) {
    std::int64_t total = 0;
    for (const auto s : mat.col_sums) total += s;
    Eigen::VectorXd m(static_cast<int>(mat.col_sums.size()));
    for (std::size_t v = 0; v < mat.col_sums.size(); ++v)
        m(static_cast<int>(v)) =
            std::log(static_cast<double>(mat.col_sums[v]) / static_cast<double>(total));
    return m;
}

}  // namespace stm_detail

// Anchor-token initialization: row-normalized co-occurrence, successive
// projection for K anchors, simplex-constrained recovery of p(topic | token),
// conversion to baseline + deviation form. Deterministic given the corpus.
inline InitResult spectral_init(const CorpusMatrix& mat, int K) {
    const int N = static_cast<int>(mat.col_sums.size());
    if (K > N) throw std::invalid_argument("spectral_init: K exceeds vocabulary size");
    for (const auto s : mat.col_sums)
        if (s <= 0) throw std::runtime_error("spectral_init: token with zero count");

    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(N, N);
    for (const auto& row : mat.rows) {
        double nd = 0.0;
        for (const auto& [v, c] : row) nd += c;
        if (nd < 2.0) continue;
        const double scale = 1.0 / (nd * (nd - 1.0));
        for (const auto& [v, cv] : row) {
            for (const auto& [w, cw] : row) {
                double x = static_cast<double>(cv) * cw;
                if (v == w) x -= cv;
                Q(v, w) += scale * x;
            }
        }
    }
    const Eigen::VectorXd row_sums = Q.rowwise().sum();
    const double total = row_sums.sum();
    if (!(total > 0)) throw std::runtime_error("spectral init failed, use Random(seed)");
    const Eigen::VectorXd p = row_sums / total;
    Eigen::MatrixXd Qbar(N, N);
    for (int v = 0; v < N; ++v) {
        if (row_sums(v) > 0) Qbar.row(v) = Q.row(v) / row_sums(v);
        else Qbar.row(v).setZero();
    }

    std::vector<int> anchors;
    Eigen::MatrixXd R = Qbar;
    for (int k = 0; k < K; ++k) {
        int best = -1;
        double best_norm = -1.0;
        for (int v = 0; v < N; ++v) {
            const double nrm = R.row(v).squaredNorm();
            if (nrm > best_norm + 1e-15) {
                best_norm = nrm;
                best = v;
            }
        }
        if (best < 0 || best_norm < 1e-10)
            throw std::runtime_error("spectral init failed, use Random(seed)");
        anchors.push_back(best);
        const Eigen::RowVectorXd u = R.row(best) / R.row(best).norm();
        R -= (R * u.transpose()) * u;
    }

    Eigen::MatrixXd M(K, N);
    for (int k = 0; k < K; ++k) M.row(k) = Qbar.row(anchors[static_cast<std::size_t>(k)]);
    const Eigen::MatrixXd MMt = M * M.transpose();

    Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(K, N);
    for (int v = 0; v < N; ++v) {
        const Eigen::VectorXd Mq = M * Qbar.row(v).transpose();
        const Eigen::VectorXd c = stm_detail::simplex_ls(MMt, Mq);
        for (int k = 0; k < K; ++k) beta(k, v) = c(k) * p(v);
    }
    for (int k = 0; k < K; ++k) {
        const double s = beta.row(k).sum();
        if (!(s > 0)) throw std::runtime_error("spectral init failed, use Random(seed)");
        Eigen::ArrayXd b = (beta.row(k) / s).array().max(1e-12);
        beta.row(k) = (b / b.sum()).matrix().transpose();
    }

    InitResult out;
    out.m = stm_detail::baseline_log_freq(mat);
    out.kappa_t.resize(K, N);
    for (int k = 0; k < K; ++k)
        out.kappa_t.row(k) =
            beta.row(k).array().log().matrix() - out.m.transpose();
    return out;
}

inline InitResult random_init(const CorpusMatrix& mat, int K, std::uint64_t seed) {
    const int N = static_cast<int>(mat.col_sums.size());
    InitResult out;
    out.m = stm_detail::baseline_log_freq(mat);
    Rng rng(derive_seed(seed, "stm.random_init"));
    out.kappa_t.resize(K, N);
    for (int k = 0; k < K; ++k) {
        Eigen::ArrayXd b(N);
        for (int v = 0; v < N; ++v) b(v) = -std::log(std::max(rng.uniform(), 1e-300));
        b /= b.sum();
        b = b.max(1e-12);
        b /= b.sum();
        out.kappa_t.row(k) = (b.log().matrix() - out.m).transpose();
    }
    return out;
}

// ---- M-step pieces ----------------------------------------------------------------

namespace stm_detail {

// MAP of the Gamma(s, r)-prior variance given q penalized coefficients with
// squared sum ssq: positive root of r x^2 + (q/2 - s + 1) x - ssq/2 = 0.
inline double sigma2_map(double ssq, int q, double s, double r) {
    if (q <= 0) return 1.0;
    const double b = 0.5 * q - s + 1.0;
    const double c = 0.5 * ssq;
    double x;
    if (r > 1e-12) {
        x = (-b + std::sqrt(b * b + 4.0 * r * c)) / (2.0 * r);
    } else {
        x = b > 0 ? c / b : 1.0;
    }
    return std::clamp(x, 1e-2, 1e8);
}

// Per-topic ridge regression of eta on X with its Gamma-prior variance MAP,
// alternated until stable; the intercept column is unpenalized. The total
// inner-iteration budget is gamma_max_iters.
inline void update_gamma(const Eigen::MatrixXd& X, const Eigen::MatrixXd& eta,
                         Eigen::MatrixXd& gamma, Eigen::VectorXd& sigma2, const StmConfig& cfg) {
    const int P = static_cast<int>(X.cols());
    const int Km1 = static_cast<int>(eta.cols());
    const Eigen::MatrixXd XtX = X.transpose() * X;
    const Eigen::MatrixXd Xte = X.transpose() * eta;
    int budget = cfg.gamma_max_iters;
    for (int k = 0; k < Km1; ++k) {
        double s2 = sigma2(k);
        Eigen::VectorXd g = gamma.col(k);
        for (int it = 0; it < 100 && budget > 0; ++it, --budget) {
            Eigen::MatrixXd Areg = XtX;
            for (int pcol = 1; pcol < P; ++pcol) Areg(pcol, pcol) += 1.0 / s2;
            g = Areg.ldlt().solve(Xte.col(k));
            double ssq = 0.0;
            for (int pcol = 1; pcol < P; ++pcol) ssq += g(pcol) * g(pcol);
            const double ns2 = sigma2_map(ssq, P - 1, cfg.s_gamma, cfg.r_gamma);
            const bool done = std::fabs(ns2 - s2) < 1e-10 * std::max(1.0, s2);
            s2 = ns2;
            if (done) break;
        }
        gamma.col(k) = g;
        sigma2(k) = s2;
    }
}

struct KappaStats {
    std::vector<Eigen::MatrixXd> counts;  // per level: K x N expected token-topic counts
    Eigen::MatrixXd totals;               // levels x K
};

// Block proximal-gradient ascent on the L1-penalized content model. Blocks
// run in the order topic, covariate, interaction, which keeps the covariate
// and interaction deviations at exact zero when they are redundant.
class KappaUpdater {
public:
    KappaUpdater(const KappaStats& stats, StmModel& model, const StmConfig& cfg)
        : stats_(stats), model_(model), cfg_(cfg),
          A_(static_cast<int>(stats.counts.size())), K_(model.K),
          N_(static_cast<int>(model.m.size())) {}

    void run() {
        const double lambda = cfg_.kappa_penalty();
        double prev = penalized_objective(lambda);
        for (int sweep = 0; sweep < cfg_.kappa_max_sweeps; ++sweep) {
            for (int k = 0; k < K_; ++k) update_block_t(k, lambda);
            if (model_.content_levels > 1) {
                for (int y = 0; y < A_; ++y) update_block_c(y, lambda);
                for (int y = 0; y < A_; ++y)
                    for (int k = 0; k < K_; ++k) update_block_i(y, k, lambda);
            }
            const double cur = penalized_objective(lambda);
            if (std::fabs(cur - prev) <= 1e-10 * (1.0 + std::fabs(prev))) break;
            prev = cur;
        }
    }

    double penalized_objective(double lambda) const {
        double obj = 0.0;
        for (int y = 0; y < A_; ++y) {
            for (int k = 0; k < K_; ++k) {
                if (stats_.totals(y, k) <= 0) continue;
                const Eigen::VectorXd lg = logits(y, k);
                const double mx = lg.maxCoeff();
                const double lse = mx + std::log((lg.array() - mx).exp().sum());
                obj += stats_.counts[static_cast<std::size_t>(y)].row(k) * lg -
                       stats_.totals(y, k) * lse;
            }
        }
        obj -= lambda * model_.kappa_t.array().abs().sum();
        if (model_.content_levels > 1) {
            obj -= lambda * model_.kappa_c.array().abs().sum();
            for (const auto& ki : model_.kappa_i) obj -= lambda * ki.array().abs().sum();
        }
        return obj;
    }

private:
    Eigen::VectorXd logits(int y, int k) const {
        Eigen::VectorXd lg = model_.m + model_.kappa_t.row(k).transpose();
        if (model_.content_levels > 1) {
            lg += model_.kappa_c.row(y).transpose();
            lg += model_.kappa_i[static_cast<std::size_t>(y)].row(k).transpose();
        }
        return lg;
    }

    static Eigen::VectorXd softmax(const Eigen::VectorXd& lg) {
        const double mx = lg.maxCoeff();
        Eigen::ArrayXd b = (lg.array() - mx).exp();
        return (b / b.sum()).matrix();
    }

    template <typename Getter, typename Setter>
    void prox_block(double lambda, double lipschitz, Getter get, Setter set,
                    const Eigen::VectorXd& grad) {
        if (!(lipschitz > 1e-8)) return;  // no usable information in this block
        const Eigen::VectorXd cur = get();
        const double before = penalized_objective(lambda);
        double step = 1.0 / lipschitz;
        for (int ls = 0; ls < 20; ++ls) {
            Eigen::VectorXd cand = cur + step * grad;
            for (int v = 0; v < N_; ++v) cand(v) = stats::soft_threshold(cand(v), step * lambda);
            set(cand);
            const double after = penalized_objective(lambda);
            if (std::isfinite(after) && after >= before - 1e-14) return;
            step *= 0.5;
        }
        set(cur);
    }

    void update_block_t(int k, double lambda) {
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(N_);
        double lip = 0.0;
        for (int y = 0; y < A_; ++y) {
            const double C = stats_.totals(y, k);
            if (C <= 0) continue;
            grad += stats_.counts[static_cast<std::size_t>(y)].row(k).transpose() -
                    C * softmax(logits(y, k));
            lip += C;
        }
        prox_block(
            lambda, lip, [&] { return Eigen::VectorXd(model_.kappa_t.row(k).transpose()); },
            [&](const Eigen::VectorXd& v) { model_.kappa_t.row(k) = v.transpose(); }, grad);
    }

    void update_block_c(int y, double lambda) {
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(N_);
        double lip = 0.0;
        for (int k = 0; k < K_; ++k) {
            const double C = stats_.totals(y, k);
            if (C <= 0) continue;
            grad += stats_.counts[static_cast<std::size_t>(y)].row(k).transpose() -
                    C * softmax(logits(y, k));
            lip += C;
        }
        prox_block(
            lambda, lip, [&] { return Eigen::VectorXd(model_.kappa_c.row(y).transpose()); },
            [&](const Eigen::VectorXd& v) { model_.kappa_c.row(y) = v.transpose(); }, grad);
    }

    void update_block_i(int y, int k, double lambda) {
        const double C = stats_.totals(y, k);
        if (!(C > 1e-8)) return;
        const Eigen::VectorXd grad =
            stats_.counts[static_cast<std::size_t>(y)].row(k).transpose() -
            C * softmax(logits(y, k));
        prox_block(
            lambda, C,
            [&] {
                return Eigen::VectorXd(
                    model_.kappa_i[static_cast<std::size_t>(y)].row(k).transpose());
            },
            [&](const Eigen::VectorXd& v) {
                model_.kappa_i[static_cast<std::size_t>(y)].row(k) = v.transpose();
            },
            grad);
    }

    const KappaStats& stats_;
    StmModel& model_;
    const StmConfig& cfg_;
    int A_, K_, N_;
};

}  // namespace stm_detail

// ---- fit ----------------------------------------------------------------------------

inline StmModel fit_stm(const CorpusMatrix& mat, const CovariateDesign& design,
                        const StmConfig& cfg, const Vocabulary* vocab = nullptr) {
    const int D = mat.n_docs();
    const int N = static_cast<int>(mat.col_sums.size());
    const int K = cfg.K;
    if (K < 2) throw std::invalid_argument("fit: K must be >= 2");
    if (D < K) throw std::invalid_argument("fit: fewer documents than topics");
    if (design.n_docs() != D) throw std::invalid_argument("fit: design not aligned with corpus");
    const int Km1 = K - 1;
    const int P = design.n_cols();

    int max_level = 0;
    for (int y : design.y) max_level = std::max(max_level, y);
    const int A = max_level + 1;
    std::vector<int> seen(static_cast<std::size_t>(A), 0);
    for (int y : design.y) seen[static_cast<std::size_t>(y)] = 1;
    int observed = 0;
    for (int s : seen) observed += s;

    StmModel model;
    model.K = K;
    model.content_levels = observed > 1 ? A : 1;
    model.gamma = Eigen::MatrixXd::Zero(P, Km1);
    model.sigma2 = Eigen::VectorXd::Ones(Km1);
    model.Sigma = Eigen::MatrixXd::Identity(Km1, Km1);
    model.kappa_c = Eigen::MatrixXd::Zero(A, N);
    model.kappa_i.assign(static_cast<std::size_t>(A), Eigen::MatrixXd::Zero(K, N));
    model.theta = Eigen::MatrixXd::Constant(D, K, 1.0 / K);
    model.eta_hat = Eigen::MatrixXd::Zero(D, Km1);
    model.nu.assign(static_cast<std::size_t>(D), Eigen::MatrixXd::Zero(Km1, Km1));
    {
        const auto init = cfg.init.kind == StmInit::Kind::Spectral
                              ? spectral_init(mat, K)
                              : random_init(mat, K, cfg.init.seed);
        model.m = init.m;
        model.kappa_t = init.kappa_t;
    }

    const int n_levels = model.content_levels > 1 ? A : 1;
    auto level_of = [&](int d) {
        return model.content_levels > 1 ? design.y[static_cast<std::size_t>(d)] : 0;
    };

    double prev_bound = 0.0;
    const std::size_t block = 64;
    const std::size_t nblocks = (static_cast<std::size_t>(D) + block - 1) / block;

    for (int iter = 0; iter < cfg.max_em_iters; ++iter) {
        const auto beta = stm_detail::build_beta(model, n_levels);
        Eigen::LLT<Eigen::MatrixXd> sig_llt(model.Sigma);
        if (sig_llt.info() != Eigen::Success)
            throw std::runtime_error("fit: Sigma not positive definite");
        double sig_logdet = 0.0;
        for (int i = 0; i < Km1; ++i) sig_logdet += 2.0 * std::log(sig_llt.matrixL()(i, i));
        EStepContext base;
        base.sigma_inv = sig_llt.solve(Eigen::MatrixXd::Identity(Km1, Km1));
        base.sigma_logdet = sig_logdet;

        std::vector<double> block_bound(nblocks, 0.0);
        std::vector<Eigen::MatrixXd> block_nu(nblocks);
        std::vector<stm_detail::KappaStats> block_stats(nblocks);
        const Eigen::MatrixXd mu_all = design.X * model.gamma;
        const bool warm = iter > 0;

        parallel_blocks(static_cast<std::size_t>(D), block, [&](std::size_t b0, std::size_t b1) {
            const std::size_t bi = b0 / block;
            Eigen::MatrixXd nu_sum = Eigen::MatrixXd::Zero(Km1, Km1);
            stm_detail::KappaStats stats;
            stats.counts.assign(static_cast<std::size_t>(n_levels), Eigen::MatrixXd::Zero(K, N));
            stats.totals = Eigen::MatrixXd::Zero(n_levels, K);
            double bound = 0.0;
            for (std::size_t d = b0; d < b1; ++d) {
                const int di = static_cast<int>(d);
                EStepContext ctx = base;
                ctx.beta = &beta[static_cast<std::size_t>(level_of(di))];
                const Eigen::VectorXd mu = mu_all.row(di).transpose();
                const Eigen::VectorXd ws = model.eta_hat.row(di).transpose();
                const auto post =
                    e_step_doc(mat.rows[d], mu, ctx, cfg, vocab, warm ? &ws : nullptr);
                bound += post.bound;
                nu_sum += post.nu;
                model.eta_hat.row(di) = post.eta_hat.transpose();
                model.theta.row(di) = post.theta.transpose();
                model.nu[d] = post.nu;
                auto& cnt = stats.counts[static_cast<std::size_t>(level_of(di))];
                for (std::size_t t = 0; t < post.phi.size(); ++t)
                    cnt.col(post.phi[t].first) +=
                        static_cast<double>(mat.rows[d][t].second) * post.phi[t].second;
            }
            block_bound[bi] = bound;
            block_nu[bi] = std::move(nu_sum);
            block_stats[bi] = std::move(stats);
        });

        double bound = 0.0;
        Eigen::MatrixXd nu_sum = Eigen::MatrixXd::Zero(Km1, Km1);
        stm_detail::KappaStats stats;
        stats.counts.assign(static_cast<std::size_t>(n_levels), Eigen::MatrixXd::Zero(K, N));
        stats.totals = Eigen::MatrixXd::Zero(n_levels, K);
        for (std::size_t bi = 0; bi < nblocks; ++bi) {
            bound += block_bound[bi];
            nu_sum += block_nu[bi];
            for (int y = 0; y < n_levels; ++y)
                stats.counts[static_cast<std::size_t>(y)] +=
                    block_stats[bi].counts[static_cast<std::size_t>(y)];
        }
        for (int y = 0; y < n_levels; ++y)
            stats.totals.row(y) =
                stats.counts[static_cast<std::size_t>(y)].rowwise().sum().transpose();

        model.bound_trace.push_back(bound);
        if (iter > 0 && std::fabs(bound - prev_bound) < cfg.em_tol * std::fabs(prev_bound)) {
            model.converged_at = iter + 1;
            break;
        }
        prev_bound = bound;

        stm_detail::update_gamma(design.X, model.eta_hat, model.gamma, model.sigma2, cfg);
        const Eigen::MatrixXd mu_new = design.X * model.gamma;
        Eigen::MatrixXd S = nu_sum;
        for (int d = 0; d < D; ++d) {
            const Eigen::VectorXd r = (model.eta_hat.row(d) - mu_new.row(d)).transpose();
            S.noalias() += r * r.transpose();
        }
        S /= static_cast<double>(D);
        S = 0.5 * (S + S.transpose()).eval();
        if (Eigen::LLT<Eigen::MatrixXd>(S).info() != Eigen::Success) {
            S += 1e-6 * Eigen::MatrixXd::Identity(Km1, Km1);
            model.warnings.push_back("Sigma update not PD; ridged by 1e-6 I");
        }
        model.Sigma = S;

        stm_detail::KappaUpdater(stats, model, cfg).run();
    }

    if (!model.converged_at) model.warnings.push_back("EM did not converge within max_em_iters");
    return model;
}

// ---- heldout likelihood (document completion) -----------------------------------------

struct HeldoutEval {
    double train_bound = 0.0;     // final bound of the training fit
    double heldout_loglik = 0.0;  // mean per-token heldout log likelihood
    int n_heldout = 0;
    int n_excluded = 0;           // heldout docs with < 2 tokens
};

inline HeldoutEval heldout_eval(const CorpusMatrix& mat, const CovariateDesign& design,
                                const StmConfig& cfg, double heldout_fraction,
                                std::uint64_t seed) {
    if (!(heldout_fraction > 0.0 && heldout_fraction < 1.0))
        throw std::invalid_argument("heldout fraction must be in (0,1)");
    const int D = mat.n_docs();
    Rng rng(derive_seed(seed, "stm.heldout"));

    // sample heldout docs
    std::vector<int> perm(static_cast<std::size_t>(D));
    for (int i = 0; i < D; ++i) perm[static_cast<std::size_t>(i)] = i;
    for (int i = D - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(i + 1)));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    const int n_held = std::max(1, static_cast<int>(heldout_fraction * D));
    std::vector<bool> held(static_cast<std::size_t>(D), false);
    for (int i = 0; i < n_held; ++i)
        held[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = true;

    // split heldout docs into observed/target halves (token instances)
    CorpusMatrix train;
    train.col_sums.assign(mat.col_sums.size(), 0);
    std::vector<int> train_rows_src;
    struct HeldDoc {
        int src = 0;
        std::vector<std::pair<int, int>> observed;
        std::vector<std::pair<int, int>> target;
    };
    std::vector<HeldDoc> held_docs;
    int excluded = 0;

    for (int d = 0; d < D; ++d) {
        const auto& row = mat.rows[static_cast<std::size_t>(d)];
        if (!held[static_cast<std::size_t>(d)]) {
            train.rows.push_back(row);
            train.doc_ids.push_back(mat.doc_ids[static_cast<std::size_t>(d)]);
            train_rows_src.push_back(d);
            for (const auto& [v, c] : row) train.col_sums[static_cast<std::size_t>(v)] += c;
            continue;
        }
        std::vector<int> instances;
        for (const auto& [v, c] : row)
            for (int i = 0; i < c; ++i) instances.push_back(v);
        if (instances.size() < 2) {
            ++excluded;
            // too small to split; keep in training unchanged
            train.rows.push_back(row);
            train.doc_ids.push_back(mat.doc_ids[static_cast<std::size_t>(d)]);
            train_rows_src.push_back(d);
            for (const auto& [v, c] : row) train.col_sums[static_cast<std::size_t>(v)] += c;
            continue;
        }
        for (std::size_t i = instances.size() - 1; i > 0; --i) {
            const std::size_t j = rng.uniform_below(i + 1);
            std::swap(instances[i], instances[j]);
        }
        const std::size_t half = instances.size() / 2;
        auto to_counts = [](const std::vector<int>& v) {
            std::map<int, int> m;
            for (int x : v) ++m[x];
            return std::vector<std::pair<int, int>>(m.begin(), m.end());
        };
        HeldDoc hd;
        hd.src = d;
        hd.observed = to_counts({instances.begin(), instances.begin() + static_cast<long>(half)});
        hd.target = to_counts({instances.begin() + static_cast<long>(half), instances.end()});
        held_docs.push_back(std::move(hd));
        // observed halves join the training corpus
        train.rows.push_back(held_docs.back().observed);
        train.doc_ids.push_back(mat.doc_ids[static_cast<std::size_t>(d)] + "#obs");
        train_rows_src.push_back(d);
        for (const auto& [v, c] : held_docs.back().observed)
            train.col_sums[static_cast<std::size_t>(v)] += c;
    }
    for (auto& s : train.col_sums)
        if (s <= 0) s = 1;  // keep the spectral baseline finite for unseen tokens

    const CovariateDesign train_design = subset_design(design, train_rows_src);
    const StmModel model = fit_stm(train, train_design, cfg);

    // score target halves under theta inferred from observed halves
    const int n_levels = model.content_levels > 1 ? static_cast<int>(model.kappa_c.rows()) : 1;
    const auto beta = stm_detail::build_beta(model, n_levels);
    Eigen::LLT<Eigen::MatrixXd> sig_llt(model.Sigma);
    EStepContext ctx;
    ctx.sigma_inv = sig_llt.solve(Eigen::MatrixXd::Identity(model.K - 1, model.K - 1));
    ctx.sigma_logdet = 0.0;

    double ll = 0.0;
    std::int64_t n_tokens = 0;
    for (const auto& hd : held_docs) {
        const int lvl = model.content_levels > 1 ? design.y[static_cast<std::size_t>(hd.src)] : 0;
        ctx.beta = &beta[static_cast<std::size_t>(lvl)];
        const Eigen::VectorXd mu =
            (design.X.row(hd.src) * model.gamma).transpose();
        const auto post = e_step_doc(hd.observed, mu, ctx, cfg);
        for (const auto& [v, c] : hd.target) {
            const double sv = post.theta.dot(ctx.beta->col(v));
            ll += c * std::log(std::max(sv, 1e-300));
            n_tokens += c;
        }
    }

    HeldoutEval out;
    out.train_bound = model.bound_trace.empty() ? 0.0 : model.bound_trace.back();
    out.heldout_loglik = n_tokens > 0 ? ll / static_cast<double>(n_tokens) : 0.0;
    out.n_heldout = static_cast<int>(held_docs.size());
    out.n_excluded = excluded;
    return out;
}

inline double heldout_likelihood(const CorpusMatrix& mat, const CovariateDesign& design,
                                 const StmConfig& cfg, double heldout_fraction,
                                 std::uint64_t seed) {
    return heldout_eval(mat, design, cfg, heldout_fraction, seed).heldout_loglik;
}

// ---- K selection -----------------------------------------------------------------------

struct KSelectionRow {
    int K = 0;
    double mean_bound = 0.0;
    double mean_heldout = 0.0;
    int n_ok = 0;
    int replications = 0;
};

struct KSelectionResult {
    std::vector<KSelectionRow> rows;
    double heldout_fraction = 0.25;
};

inline KSelectionResult select_k(const CorpusMatrix& mat, const CovariateDesign& design,
                                 const std::vector<int>& grid, int replications,
                                 StmConfig cfg, double heldout_fraction, std::uint64_t seed,
                                 std::vector<std::string>* failures = nullptr) {
    if (grid.empty()) throw std::invalid_argument("select_k: empty grid");
    KSelectionResult result;
    result.heldout_fraction = heldout_fraction;
    for (const int K : grid) {
        KSelectionRow row;
        row.K = K;
        row.replications = replications;
        double sb = 0.0, sh = 0.0;
        for (int rep = 0; rep < replications; ++rep) {
            try {
                cfg.K = K;
                const auto ev = heldout_eval(mat, design, cfg, heldout_fraction,
                                             derive_seed(seed, "select_k", static_cast<std::uint64_t>(K) * 1000 + rep));
                sb += ev.train_bound;
                sh += ev.heldout_loglik;
                ++row.n_ok;
            } catch (const std::exception& e) {
                if (failures)
                    failures->push_back("K=" + std::to_string(K) + " rep=" + std::to_string(rep) +
                                        ": " + e.what());
            }
        }
        if (row.n_ok > 0) {
            row.mean_bound = sb / row.n_ok;
            row.mean_heldout = sh / row.n_ok;
        }
        result.rows.push_back(row);
    }
    return result;
}

}  // namespace rhetorica
