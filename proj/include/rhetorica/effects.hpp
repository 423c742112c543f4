#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/QR>

#include "rhetorica/design.hpp"
#include "rhetorica/rng.hpp"
#include "rhetorica/stats.hpp"
#include "rhetorica/stm.hpp"

namespace rhetorica {

struct ContrastResult {
    std::string name;
    double estimate = 0.0;
    double std_error = 0.0;
    double p_value = 1.0;
};

struct TopicEffect {
    Eigen::VectorXd coef;      // over regression columns
    Eigen::MatrixXd cov;       // pooled coefficient covariance
    std::array<ContrastResult, 3> contrasts;  // Destruction-Creation, Brexiteer-Remainer, neg TRUE-FALSE
};

struct EffectEstimate {
    std::vector<TopicEffect> topics;
    std::vector<std::string> col_names;  // regression columns actually used
    int draws = 0;
};

struct TopicTypeLabels {
    std::string verb_type = "None";     // Creation | Destruction | None
    std::string faction_type = "None";  // Brexiteer | Remainer | None
    bool negation_flag = false;
};

namespace effects_detail {

// The spline block is a partition of unity, so with an intercept present the
// last spline column is redundant by construction; it is dropped from the
// effects regression. Any remaining rank deficiency is a hard error.
inline std::vector<int> regression_columns(const CovariateDesign& design) {
    std::vector<int> cols;
    const int P = design.n_cols();
    const int drop = design.spline_df > 0 ? P - 1 : -1;
    for (int j = 0; j < P; ++j)
        if (j != drop) cols.push_back(j);
    return cols;
}

}  // namespace effects_detail

// Method-of-composition effect estimation: perturb eta by its per-document
// posterior covariance, regress each topic proportion on the covariates,
// pool means and within+between covariance across draws.
inline EffectEstimate estimate_effects(const StmModel& model, const CovariateDesign& design,
                                       int draws = 25, std::uint64_t seed = 1) {
    if (draws < 1) throw std::invalid_argument("estimate_effects: draws must be >= 1");
    const int D = design.n_docs();
    const int K = model.K;
    const int Km1 = K - 1;
    if (static_cast<int>(model.theta.rows()) != D)
        throw std::invalid_argument("estimate_effects: design not aligned with model");

    const auto cols = effects_detail::regression_columns(design);
    const int P = static_cast<int>(cols.size());
    Eigen::MatrixXd X(D, P);
    for (int j = 0; j < P; ++j) X.col(j) = design.X.col(cols[static_cast<std::size_t>(j)]);

    // exact-rank check with column names on failure
    {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
        qr.setThreshold(1e-10);
        if (qr.rank() < P) {
            std::string msg = "estimate_effects: singular design; collinear columns:";
            const auto perm = qr.colsPermutation().indices();
            for (int j = qr.rank(); j < P; ++j)
                msg += " " + design.col_names[static_cast<std::size_t>(
                           cols[static_cast<std::size_t>(perm(j))])];
            throw std::runtime_error(msg);
        }
    }

    const Eigen::MatrixXd XtX = X.transpose() * X;
    const Eigen::LLT<Eigen::MatrixXd> xtx_llt(XtX);
    const Eigen::MatrixXd XtX_inv = xtx_llt.solve(Eigen::MatrixXd::Identity(P, P));

    // per-document Cholesky factors of the posterior covariance
    std::vector<Eigen::MatrixXd> chol(static_cast<std::size_t>(D));
    for (int d = 0; d < D; ++d) {
        const auto& nu = model.nu[static_cast<std::size_t>(d)];
        if (nu.rows() == Km1 && nu.squaredNorm() > 0) {
            Eigen::LLT<Eigen::MatrixXd> llt(nu);
            chol[static_cast<std::size_t>(d)] =
                llt.info() == Eigen::Success
                    ? Eigen::MatrixXd(llt.matrixL())
                    : Eigen::MatrixXd::Zero(Km1, Km1);
        } else {
            chol[static_cast<std::size_t>(d)] = Eigen::MatrixXd::Zero(Km1, Km1);
        }
    }

    // coefficient draws: [draw][topic] -> P vector; within covariance pooled
    std::vector<std::vector<Eigen::VectorXd>> bs(
        static_cast<std::size_t>(draws),
        std::vector<Eigen::VectorXd>(static_cast<std::size_t>(K)));
    std::vector<Eigen::MatrixXd> within(static_cast<std::size_t>(K),
                                        Eigen::MatrixXd::Zero(P, P));

    Rng rng(derive_seed(seed, "effects.compose"));
    Eigen::MatrixXd theta_draw(D, K);
    Eigen::VectorXd z(Km1);
    for (int t = 0; t < draws; ++t) {
        for (int d = 0; d < D; ++d) {
            for (int i = 0; i < Km1; ++i) z(i) = rng.normal();
            const Eigen::VectorXd eta = model.eta_hat.row(d).transpose() +
                                        chol[static_cast<std::size_t>(d)] * z;
            theta_draw.row(d) = stm_detail::softmax_padded(eta).transpose();
        }
        for (int k = 0; k < K; ++k) {
            const Eigen::VectorXd y = theta_draw.col(k);
            const Eigen::VectorXd b = xtx_llt.solve(X.transpose() * y);
            const double rss = (y - X * b).squaredNorm();
            const double s2 = D > P ? rss / (D - P) : 0.0;
            bs[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)] = b;
            within[static_cast<std::size_t>(k)] += s2 * XtX_inv;
        }
    }

    EffectEstimate out;
    out.draws = draws;
    for (int j : cols) out.col_names.push_back(design.col_names[static_cast<std::size_t>(j)]);

    auto col_index = [&](const std::string& name) {
        for (std::size_t i = 0; i < out.col_names.size(); ++i)
            if (out.col_names[i] == name) return static_cast<int>(i);
        return -1;
    };
    const int c_creation = col_index("rel_type=Creation");
    const int c_destruction = col_index("rel_type=Destruction");
    const int c_neg = col_index("neg=TRUE");
    const int c_brex = col_index("fct=Brexiteer");
    const int c_rem = col_index("fct=Remainer");

    for (int k = 0; k < K; ++k) {
        TopicEffect te;
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(P);
        for (int t = 0; t < draws; ++t)
            mean += bs[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)];
        mean /= draws;
        Eigen::MatrixXd between = Eigen::MatrixXd::Zero(P, P);
        if (draws > 1) {
            for (int t = 0; t < draws; ++t) {
                const Eigen::VectorXd r =
                    bs[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)] - mean;
                between.noalias() += r * r.transpose();
            }
            between /= (draws - 1);
        }
        te.coef = mean;
        te.cov = within[static_cast<std::size_t>(k)] / draws;
        if (draws > 1) te.cov += (1.0 + 1.0 / draws) * between;

        auto contrast = [&](const std::string& name, int plus, int minus) {
            ContrastResult c;
            c.name = name;
            Eigen::VectorXd v = Eigen::VectorXd::Zero(P);
            if (plus >= 0) v(plus) += 1.0;
            if (minus >= 0) v(minus) -= 1.0;
            c.estimate = v.dot(te.coef);
            const double var = v.dot(te.cov * v);
            c.std_error = var > 0 ? std::sqrt(var) : 0.0;
            c.p_value = c.std_error > 0 ? stats::two_sided_p(c.estimate / c.std_error)
                                        : (c.estimate == 0.0 ? 1.0 : 0.0);
            return c;
        };
        te.contrasts[0] = contrast("Destruction-Creation", c_destruction, c_creation);
        te.contrasts[1] = contrast("Brexiteer-Remainer", c_brex, c_rem);
        te.contrasts[2] = contrast("negated TRUE-FALSE", c_neg, -1);
        out.topics.push_back(std::move(te));
    }
    return out;
}

// Assigns type labels from the three contrasts at the given significance
// level; the sign of a significant contrast picks the label.
inline std::vector<TopicTypeLabels> type_topics(const EffectEstimate& eff, double alpha = 0.01) {
    std::vector<TopicTypeLabels> out;
    for (const auto& te : eff.topics) {
        TopicTypeLabels lab;
        const auto& dc = te.contrasts[0];
        if (dc.p_value < alpha && dc.estimate != 0.0)
            lab.verb_type = dc.estimate > 0 ? "Destruction" : "Creation";
        const auto& br = te.contrasts[1];
        if (br.p_value < alpha && br.estimate != 0.0)
            lab.faction_type = br.estimate > 0 ? "Brexiteer" : "Remainer";
        const auto& ng = te.contrasts[2];
        lab.negation_flag = ng.p_value < alpha && ng.estimate > 0;
        out.push_back(lab);
    }
    return out;
}

}  // namespace rhetorica
