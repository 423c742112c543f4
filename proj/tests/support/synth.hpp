#pragma once

// Shared synthetic-data generators for the unit and acceptance suites.

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "rhetorica/design.hpp"
#include "rhetorica/extract.hpp"
#include "rhetorica/prep.hpp"
#include "rhetorica/rng.hpp"
#include "rhetorica/stm.hpp"

namespace synth {

using namespace rhetorica;

// ---- STM generative corpus -------------------------------------------------

struct GeneratedCorpus {
    CorpusMatrix matrix;
    std::vector<RelationTriplet> meta;     // covariates for the design
    Eigen::MatrixXd true_beta;             // K x N
    Eigen::MatrixXd true_theta;            // D x K
    Eigen::MatrixXd gamma;                 // planted prevalence coefficients
};

// Samples documents from the model's own generative process: planted sparse
// topic-token rows, logistic-normal proportions with a two-covariate
// prevalence design.
inline GeneratedCorpus generate_stm_corpus(int D, int N, int K, int tokens_per_doc,
                                           std::uint64_t seed, double topic_sep = 5.0,
                                           double faction_shift = 0.0) {
    Rng rng(derive_seed(seed, "synth.stm"));
    GeneratedCorpus out;

    // topics concentrated on disjoint-ish blocks with a smooth background
    out.true_beta.resize(K, N);
    for (int k = 0; k < K; ++k) {
        Eigen::ArrayXd w(N);
        for (int v = 0; v < N; ++v) {
            const bool in_block = v % K == k;
            w(v) = -std::log(std::max(rng.uniform(), 1e-12)) * (in_block ? topic_sep : 0.2);
        }
        w /= w.sum();
        out.true_beta.row(k) = w.matrix().transpose();
    }

    const int Km1 = K - 1;
    out.gamma = Eigen::MatrixXd::Zero(3, Km1);  // intercept + 2 covariates
    for (int j = 0; j < Km1; ++j) {
        out.gamma(1, j) = (j % 2 == 0 ? 1.0 : -1.0) * 0.8;
        out.gamma(2, j) = (j % 3 == 0 ? -0.5 : 0.5);
    }

    out.true_theta.resize(D, K);
    out.matrix.col_sums.assign(static_cast<std::size_t>(N), 0);
    for (int d = 0; d < D; ++d) {
        RelationTriplet t;
        t.rel_id = "synth." + std::to_string(d);
        t.day = 18650 + d % 30;
        t.faction = d % 3 == 0   ? FactionLabel::Brexiteer
                    : d % 3 == 1 ? FactionLabel::Remainer
                                 : FactionLabel::Other;
        t.rel_type = d % 2 ? RelType::Creation : RelType::Destruction;
        t.negated = d % 7 == 0;
        out.meta.push_back(t);

        Eigen::VectorXd x(3);
        x << 1.0, (d % 2 ? 1.0 : 0.0), (d % 5) / 4.0;
        Eigen::VectorXd eta(Km1);
        for (int j = 0; j < Km1; ++j) eta(j) = x.dot(out.gamma.col(j)) + 0.8 * rng.normal();
        if (faction_shift != 0.0 && t.faction == FactionLabel::Brexiteer) eta(0) += faction_shift;
        const Eigen::VectorXd theta = stm_detail::softmax_padded(eta);
        out.true_theta.row(d) = theta.transpose();

        std::map<int, int> row;
        for (int n = 0; n < tokens_per_doc; ++n) {
            double u = rng.uniform();
            int k = 0;
            double acc = theta(0);
            while (u > acc && k < K - 1) acc += theta(++k);
            double u2 = rng.uniform();
            int v = 0;
            double acc2 = out.true_beta(k, 0);
            while (u2 > acc2 && v < N - 1) acc2 += out.true_beta(k, ++v);
            ++row[v];
        }
        std::vector<std::pair<int, int>> cells(row.begin(), row.end());
        for (const auto& [v, c] : cells) out.matrix.col_sums[static_cast<std::size_t>(v)] += c;
        out.matrix.rows.push_back(std::move(cells));
        out.matrix.doc_ids.push_back(t.rel_id);
    }
    for (auto& s : out.matrix.col_sums)
        if (s == 0) s = 1;  // avoid empty columns in tiny draws
    return out;
}

// Mean matched cosine between planted and fitted topic-token rows over the
// best permutation (brute force; K is small in tests).
inline double best_matched_cosine(const Eigen::MatrixXd& planted, const StmModel& model) {
    const int K = static_cast<int>(planted.rows());
    std::vector<int> perm(static_cast<std::size_t>(K));
    for (int i = 0; i < K; ++i) perm[static_cast<std::size_t>(i)] = i;
    Eigen::MatrixXd cos(K, K);
    for (int a = 0; a < K; ++a) {
        const Eigen::VectorXd pa = planted.row(a).transpose();
        for (int b = 0; b < K; ++b) {
            const Eigen::VectorXd fb = model.beta_row(0, b);
            cos(a, b) = pa.dot(fb) / (pa.norm() * fb.norm());
        }
    }
    double best = -1.0;
    std::sort(perm.begin(), perm.end());
    do {
        double s = 0.0;
        for (int a = 0; a < K; ++a) s += cos(a, perm[static_cast<std::size_t>(a)]);
        best = std::max(best, s / K);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

// ---- tweet fixture -----------------------------------------------------------

// Deterministic 200-tweet corpus exercising every pipeline stage: no-deal
// causal claims with varied verbs, factions, negation, coordination and some
// passive/end-of-sentence forms, spread over forty days.
inline void write_tweet_fixture(const std::string& path, int n = 200, std::uint64_t seed = 7) {
    Rng rng(derive_seed(seed, "synth.fixture"));
    static const std::vector<std::string> verbs = {
        "destroy", "destroys", "kill",     "kills",   "cause",  "causes",
        "trigger", "triggers", "create",   "creates", "make",   "makes",
        "produce", "generates", "eliminate", "cancels"};
    static const std::vector<std::string> effects = {
        "the economy",        "food shortages",     "medicine shortages", "job losses",
        "border chaos",       "new opportunities",  "a trade revival",    "the union",
        "farming exports",    "price rises",        "a housing crash",    "public anger",
        "supply problems",    "a stronger country", "political chaos",    "endless queues"};
    static const std::vector<std::string> causes = {"No deal", "A no-deal exit", "The no deal",
                                                    "no-deal"};
    static const std::vector<std::string> bios = {
        "Proud Brexiteer. Leave means leave.",
        "Remainer and proud. #FBPE",
        "Football, family, weather.",
        "Vote Leave supporter",
        "vote remain forever",
        "",
        "Gardening and tea.",
        "brexiteer",
        "remainer"};

    std::ofstream out(path, std::ios::binary);
    for (int i = 0; i < n; ++i) {
        const std::string& cause = causes[rng.uniform_below(causes.size())];
        const std::string& verb = verbs[rng.uniform_below(verbs.size())];
        const std::string& effect = effects[rng.uniform_below(effects.size())];
        std::string text;
        const auto form = rng.uniform_below(6);
        if (form == 0) {
            text = cause + " will " + verb + " " + effect + ".";
        } else if (form == 1) {
            text = cause + " will not " + verb + " " + effect + ".";
        } else if (form == 2) {
            const std::string& effect2 = effects[rng.uniform_below(effects.size())];
            text = cause + " " + verb + " " + effect + " and triggers " + effect2 + ".";
        } else if (form == 3) {
            text = "Sadly " + effect + " will be caused by " + cause + ".";
        } else if (form == 4) {
            text = "Think about the chaos that " + cause + " would " + verb + ".";
        } else {
            text = cause + " " + verb + " " + effect + " 😡.";
        }
        const int day = 1 + static_cast<int>(rng.uniform_below(28));
        const int month = rng.uniform_below(2) == 0 ? 3 : 4;
        char created[32];
        std::snprintf(created, sizeof(created), "2019-%02d-%02dT%02d:%02d:%02dZ", month, day,
                      static_cast<int>(rng.uniform_below(24)),
                      static_cast<int>(rng.uniform_below(60)),
                      static_cast<int>(rng.uniform_below(60)));
        nlohmann::json j = {{"id", "tw" + std::to_string(i)},
                            {"created_at", created},
                            {"text", text},
                            {"user_bio", bios[rng.uniform_below(bios.size())]},
                            {"is_retweet", rng.uniform_below(10) == 0}};
        out << j.dump() << '\n';
    }
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace synth
