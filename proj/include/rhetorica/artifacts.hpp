#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rhetorica/design.hpp"
#include "rhetorica/extract.hpp"
#include "rhetorica/prep.hpp"
#include "rhetorica/stm.hpp"

namespace rhetorica {

namespace artifact_detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const int rows = j.at("rows").get<int>();
    const int cols = j.at("cols").get<int>();
    const auto data = j.at("data").get<std::vector<double>>();
    Eigen::MatrixXd m(rows, cols);
    std::size_t p = 0;
    for (int i = 0; i < rows; ++i)
        for (int jj = 0; jj < cols; ++jj) m(i, jj) = data[p++];
    return m;
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
    const auto data = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(data.data(), static_cast<long>(data.size()));
}

inline void write_msgpack(const nlohmann::json& j, const std::string& path) {
    const auto bytes = nlohmann::json::to_msgpack(j);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<long>(bytes.size()));
}

inline nlohmann::json read_msgpack(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return nlohmann::json::from_msgpack(bytes);
}

}  // namespace artifact_detail

// ---- corpus artifact ----------------------------------------------------------------

// Everything prep produces: vocabulary, counts matrix, and the per-document
// covariate metadata the design is rebuilt from.
struct CorpusArtifact {
    Vocabulary vocab;
    CorpusMatrix matrix;
    std::vector<RelationTriplet> meta;  // aligned with matrix rows (text fields cleared)
    int spline_df = 10;
    int min_count = 10;
    bool bigrams_span_stopwords = true;
    std::vector<std::string> dropped_rel_ids;

    CovariateDesign design() const { return build_design(meta, spline_df); }
};

inline nlohmann::json corpus_to_json(const CorpusArtifact& c) {
    nlohmann::json j;
    j["schema"] = "rhetorica.corpus/1";
    j["spline_df"] = c.spline_df;
    j["min_count"] = c.min_count;
    j["bigrams_span_stopwords"] = c.bigrams_span_stopwords;
    j["dropped_rel_ids"] = c.dropped_rel_ids;
    {
        nlohmann::json v;
        std::vector<std::string> tokens;
        std::vector<int> kinds;
        std::vector<std::int64_t> counts;
        for (const auto& e : c.vocab.entries) {
            tokens.push_back(e.token);
            kinds.push_back(e.kind == TokenKind::Bigram ? 1 : 0);
            counts.push_back(e.count);
        }
        v["tokens"] = tokens;
        v["kinds"] = kinds;
        v["counts"] = counts;
        j["vocab"] = std::move(v);
    }
    {
        nlohmann::json m;
        m["doc_ids"] = c.matrix.doc_ids;
        std::vector<std::vector<int>> rows;
        for (const auto& row : c.matrix.rows) {
            std::vector<int> flat;
            for (const auto& [v, cnt] : row) {
                flat.push_back(v);
                flat.push_back(cnt);
            }
            rows.push_back(std::move(flat));
        }
        m["rows"] = rows;
        j["matrix"] = std::move(m);
    }
    {
        nlohmann::json meta;
        std::vector<std::string> rel_ids;
        std::vector<std::int64_t> days;
        std::vector<int> factions, rel_types, negated;
        for (const auto& t : c.meta) {
            rel_ids.push_back(t.rel_id);
            days.push_back(t.day);
            factions.push_back(faction_level_index(t.faction));
            rel_types.push_back(static_cast<int>(t.rel_type));
            negated.push_back(t.negated ? 1 : 0);
        }
        meta["rel_ids"] = rel_ids;
        meta["days"] = days;
        meta["factions"] = factions;
        meta["rel_types"] = rel_types;
        meta["negated"] = negated;
        j["meta"] = std::move(meta);
    }
    return j;
}

inline void save_corpus(const CorpusArtifact& c, const std::string& path) {
    artifact_detail::write_msgpack(corpus_to_json(c), path);
}

inline CorpusArtifact corpus_from_json(const nlohmann::json& j) {
    if (j.at("schema").get<std::string>() != "rhetorica.corpus/1")
        throw std::runtime_error("unsupported corpus schema");
    CorpusArtifact c;
    c.spline_df = j.at("spline_df").get<int>();
    c.min_count = j.at("min_count").get<int>();
    c.bigrams_span_stopwords = j.at("bigrams_span_stopwords").get<bool>();
    c.dropped_rel_ids = j.at("dropped_rel_ids").get<std::vector<std::string>>();
    {
        const auto& v = j.at("vocab");
        const auto tokens = v.at("tokens").get<std::vector<std::string>>();
        const auto kinds = v.at("kinds").get<std::vector<int>>();
        const auto counts = v.at("counts").get<std::vector<std::int64_t>>();
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            c.vocab.index.emplace(tokens[i], static_cast<int>(i));
            c.vocab.entries.push_back(
                {tokens[i], kinds[i] ? TokenKind::Bigram : TokenKind::Unigram, counts[i]});
        }
    }
    {
        const auto& m = j.at("matrix");
        c.matrix.doc_ids = m.at("doc_ids").get<std::vector<std::string>>();
        c.matrix.col_sums.assign(c.vocab.entries.size(), 0);
        for (const auto& flat_j : m.at("rows")) {
            const auto flat = flat_j.get<std::vector<int>>();
            std::vector<std::pair<int, int>> row;
            for (std::size_t i = 0; i + 1 < flat.size(); i += 2) {
                row.emplace_back(flat[i], flat[i + 1]);
                c.matrix.col_sums[static_cast<std::size_t>(flat[i])] += flat[i + 1];
            }
            c.matrix.rows.push_back(std::move(row));
        }
    }
    {
        const auto& meta = j.at("meta");
        const auto rel_ids = meta.at("rel_ids").get<std::vector<std::string>>();
        const auto days = meta.at("days").get<std::vector<std::int64_t>>();
        const auto factions = meta.at("factions").get<std::vector<int>>();
        const auto rel_types = meta.at("rel_types").get<std::vector<int>>();
        const auto negated = meta.at("negated").get<std::vector<int>>();
        for (std::size_t i = 0; i < rel_ids.size(); ++i) {
            RelationTriplet t;
            t.rel_id = rel_ids[i];
            t.day = days[i];
            t.faction = factions[i] == 0   ? FactionLabel::Brexiteer
                        : factions[i] == 1 ? FactionLabel::Remainer
                                           : FactionLabel::Other;
            t.rel_type = static_cast<RelType>(rel_types[i]);
            t.negated = negated[i] != 0;
            c.meta.push_back(std::move(t));
        }
    }
    return c;
}

inline CorpusArtifact load_corpus_artifact(const std::string& path) {
    return corpus_from_json(artifact_detail::read_msgpack(path));
}

// Runs the prep stage end to end over a relations file.
inline CorpusArtifact run_prep(const std::vector<RelationTriplet>& relations,
                               const StopwordSet& stopwords, int min_count, int spline_df,
                               bool bigrams_span_stopwords = true) {
    if (relations.empty()) throw std::runtime_error("prep: no relations");
    std::vector<TokenizedEffect> docs;
    std::vector<std::string> ids;
    docs.reserve(relations.size());
    for (const auto& r : relations) {
        docs.push_back(tokenize_effect(r.effect, stopwords, bigrams_span_stopwords));
        ids.push_back(r.rel_id);
    }
    auto [vocab, matrix] = build_matrix(docs, ids, min_count);
    CorpusArtifact c;
    c.vocab = std::move(vocab);
    c.spline_df = spline_df;
    c.min_count = min_count;
    c.bigrams_span_stopwords = bigrams_span_stopwords;
    for (const int d : matrix.dropped_docs)
        c.dropped_rel_ids.push_back(relations[static_cast<std::size_t>(d)].rel_id);
    for (const int d : matrix.kept_docs) {
        RelationTriplet t = relations[static_cast<std::size_t>(d)];
        t.cause.clear();
        t.effect.clear();
        t.operator_text.clear();
        c.meta.push_back(std::move(t));
    }
    c.matrix = std::move(matrix);
    return c;
}

// ---- model artifact ----------------------------------------------------------------------

// The fitted model plus the corpus it was fitted on, so every downstream
// stage can run from the one file.
struct ModelArtifact {
    StmModel model;
    CorpusArtifact corpus;
    StmConfig config;
};

inline void save_model(const ModelArtifact& a, const std::string& path) {
    using artifact_detail::matrix_to_json;
    using artifact_detail::vector_to_json;
    nlohmann::json j;
    j["schema"] = "rhetorica.stm-model/1";
    {
        nlohmann::json cfg;
        cfg["K"] = a.config.K;
        cfg["max_em_iters"] = a.config.max_em_iters;
        cfg["em_tol"] = a.config.em_tol;
        cfg["init"] = a.config.init.kind == StmInit::Kind::Spectral ? "spectral" : "random";
        cfg["init_seed"] = a.config.init.seed;
        cfg["gamma_max_iters"] = a.config.gamma_max_iters;
        cfg["s_gamma"] = a.config.s_gamma;
        cfg["r_gamma"] = a.config.r_gamma;
        cfg["s_kappa"] = a.config.s_kappa;
        cfg["r_kappa"] = a.config.r_kappa;
        j["config"] = std::move(cfg);
    }
    {
        const auto& m = a.model;
        nlohmann::json mj;
        mj["K"] = m.K;
        mj["content_levels"] = m.content_levels;
        mj["gamma"] = matrix_to_json(m.gamma);
        mj["sigma2"] = vector_to_json(m.sigma2);
        mj["Sigma"] = matrix_to_json(m.Sigma);
        mj["m"] = vector_to_json(m.m);
        mj["kappa_t"] = matrix_to_json(m.kappa_t);
        mj["kappa_c"] = matrix_to_json(m.kappa_c);
        mj["kappa_i"] = nlohmann::json::array();
        for (const auto& ki : m.kappa_i) mj["kappa_i"].push_back(matrix_to_json(ki));
        mj["theta"] = matrix_to_json(m.theta);
        mj["eta_hat"] = matrix_to_json(m.eta_hat);
        mj["nu"] = nlohmann::json::array();
        for (const auto& nu : m.nu) mj["nu"].push_back(matrix_to_json(nu));
        mj["bound_trace"] = m.bound_trace;
        mj["converged_at"] = m.converged_at ? nlohmann::json(*m.converged_at) : nlohmann::json();
        mj["warnings"] = m.warnings;
        j["model"] = std::move(mj);
    }
    j["corpus"] = corpus_to_json(a.corpus);
    artifact_detail::write_msgpack(j, path);
}

inline ModelArtifact load_model(const std::string& path) {
    using artifact_detail::matrix_from_json;
    using artifact_detail::vector_from_json;
    const auto j = artifact_detail::read_msgpack(path);
    if (j.at("schema").get<std::string>() != "rhetorica.stm-model/1")
        throw std::runtime_error("unsupported model schema in " + path);
    ModelArtifact a;
    {
        const auto& cfg = j.at("config");
        a.config.K = cfg.at("K").get<int>();
        a.config.max_em_iters = cfg.at("max_em_iters").get<int>();
        a.config.em_tol = cfg.at("em_tol").get<double>();
        a.config.init.kind = cfg.at("init").get<std::string>() == "spectral"
                                 ? StmInit::Kind::Spectral
                                 : StmInit::Kind::Random;
        a.config.init.seed = cfg.at("init_seed").get<std::uint64_t>();
        a.config.gamma_max_iters = cfg.at("gamma_max_iters").get<int>();
        a.config.s_gamma = cfg.at("s_gamma").get<double>();
        a.config.r_gamma = cfg.at("r_gamma").get<double>();
        a.config.s_kappa = cfg.at("s_kappa").get<double>();
        a.config.r_kappa = cfg.at("r_kappa").get<double>();
    }
    {
        const auto& mj = j.at("model");
        auto& m = a.model;
        m.K = mj.at("K").get<int>();
        m.content_levels = mj.at("content_levels").get<int>();
        m.gamma = matrix_from_json(mj.at("gamma"));
        m.sigma2 = vector_from_json(mj.at("sigma2"));
        m.Sigma = matrix_from_json(mj.at("Sigma"));
        m.m = vector_from_json(mj.at("m"));
        m.kappa_t = matrix_from_json(mj.at("kappa_t"));
        m.kappa_c = matrix_from_json(mj.at("kappa_c"));
        for (const auto& ki : mj.at("kappa_i")) m.kappa_i.push_back(matrix_from_json(ki));
        m.theta = matrix_from_json(mj.at("theta"));
        m.eta_hat = matrix_from_json(mj.at("eta_hat"));
        for (const auto& nu : mj.at("nu")) m.nu.push_back(matrix_from_json(nu));
        m.bound_trace = mj.at("bound_trace").get<std::vector<double>>();
        if (!mj.at("converged_at").is_null()) m.converged_at = mj.at("converged_at").get<int>();
        m.warnings = mj.at("warnings").get<std::vector<std::string>>();
    }
    a.corpus = corpus_from_json(j.at("corpus"));
    return a;
}

}  // namespace rhetorica
