#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "rhetorica/graph.hpp"
#include "rhetorica/prep.hpp"
#include "rhetorica/stm.hpp"

namespace rhetorica {

namespace narrative_detail {

// Rank-based percentile retention: keep the top floor(n * (1 - p)) elements
// by weight, extending over ties at the cut boundary.
inline std::vector<int> percentile_keep(const std::vector<double>& weights, double percentile) {
    const int n = static_cast<int>(weights.size());
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double wa = weights[static_cast<std::size_t>(a)];
        const double wb = weights[static_cast<std::size_t>(b)];
        return wa != wb ? wa > wb : a < b;
    });
    int keep = static_cast<int>(std::floor(n * (1.0 - percentile)));
    keep = std::clamp(keep, 0, n);
    if (keep > 0 && keep < n) {
        const double cut = weights[static_cast<std::size_t>(order[static_cast<std::size_t>(keep - 1)])];
        while (keep < n &&
               weights[static_cast<std::size_t>(order[static_cast<std::size_t>(keep)])] == cut)
            ++keep;
    }
    return {order.begin(), order.begin() + keep};
}

}  // namespace narrative_detail

// Per-element faction probability difference for topic k. The corrected form
// carries the topic term symmetrically in both exponents; the literal
// published form (no topic term, minus sign on the second covariate term) is
// available behind the flag.
inline double narrative_delta(const StmModel& model, int token, int topic, int level_i,
                              int level_j, bool literal_formula = false) {
    const double m = model.m(token);
    if (model.content_levels <= 1) return 0.0;
    const double kt = model.kappa_t(topic, token);
    const double ci = model.kappa_c(level_i, token);
    const double cj = model.kappa_c(level_j, token);
    const double ii = model.kappa_i[static_cast<std::size_t>(level_i)](topic, token);
    const double ij = model.kappa_i[static_cast<std::size_t>(level_j)](topic, token);
    if (literal_formula) return std::exp(m + ci + ii) - std::exp(m - cj + ij);
    return std::exp(m + kt + ci + ii) - std::exp(m + kt + cj + ij);
}

// Builds the per-topic phrasal network: unigram nodes and bigram edges
// weighted on the Others faction, percentile-filtered separately, dangling
// edges dropped, with the Brexiteer-Remainer difference overlay.
inline NarrativeGraph build_narrative(const StmModel& model, const Vocabulary& vocab, int topic,
                                      double percentile = 0.80, bool literal_delta = false) {
    if (topic < 0 || topic >= model.K)
        throw std::invalid_argument("build_narrative: topic out of range");
    if (!(percentile > 0.0 && percentile < 1.0))
        throw std::invalid_argument("build_narrative: percentile must be in (0,1)");
    const int level_others = 2;   // y_levels = {Brexiteer, Remainer, Other}
    const int level_brex = 0;
    const int level_rem = 1;

    auto weight_of = [&](int v) {
        double lg = model.m(v) + model.kappa_t(topic, v);
        if (model.content_levels > 1) {
            lg += model.kappa_c(level_others, v);
            lg += model.kappa_i[static_cast<std::size_t>(level_others)](topic, v);
        }
        return std::exp(lg);
    };

    std::vector<int> uni_idx, bi_idx;
    for (int v = 0; v < vocab.size(); ++v) {
        if (vocab.entries[static_cast<std::size_t>(v)].kind == TokenKind::Unigram)
            uni_idx.push_back(v);
        else
            bi_idx.push_back(v);
    }

    std::vector<double> uni_w, bi_w;
    uni_w.reserve(uni_idx.size());
    for (int v : uni_idx) uni_w.push_back(weight_of(v));
    bi_w.reserve(bi_idx.size());
    for (int v : bi_idx) bi_w.push_back(weight_of(v));

    NarrativeGraph g;
    g.topic = topic;
    std::set<std::string> retained_tokens;
    for (int i : narrative_detail::percentile_keep(uni_w, percentile)) {
        const int v = uni_idx[static_cast<std::size_t>(i)];
        NarrativeNode node;
        node.token = vocab.entries[static_cast<std::size_t>(v)].token;
        node.weight = uni_w[static_cast<std::size_t>(i)];
        node.delta = narrative_delta(model, v, topic, level_brex, level_rem, literal_delta);
        retained_tokens.insert(node.token);
        g.nodes.push_back(std::move(node));
    }
    for (int i : narrative_detail::percentile_keep(bi_w, percentile)) {
        const int v = bi_idx[static_cast<std::size_t>(i)];
        const auto [u, w] =
            Vocabulary::bigram_parts(vocab.entries[static_cast<std::size_t>(v)].token);
        if (!retained_tokens.count(u) || !retained_tokens.count(w)) continue;  // endpoint closure
        NarrativeEdge edge;
        edge.source = u;
        edge.target = w;
        edge.weight = bi_w[static_cast<std::size_t>(i)];
        edge.delta = narrative_delta(model, v, topic, level_brex, level_rem, literal_delta);
        g.edges.push_back(std::move(edge));
    }
    if (g.edges.empty() && !bi_idx.empty())
        g.warnings.push_back("no bigrams survive the percentile filter");
    return g;
}

// Writes .graphml or .json depending on the extension.
inline void export_narrative(const NarrativeGraph& g, const std::string& path) {
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".json")
        write_narrative_json(g, path);
    else
        write_narrative_graphml(g, path);
}

}  // namespace rhetorica
