#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rhetorica/artifacts.hpp"
#include "rhetorica/csv.hpp"
#include "rhetorica/dynamics.hpp"
#include "rhetorica/effects.hpp"
#include "rhetorica/narrative.hpp"
#include "rhetorica/netstruct.hpp"
#include "rhetorica/stopwords.hpp"

namespace rhetorica {

// ---- configuration ---------------------------------------------------------------

struct PipelineConfig {
    std::string input;
    std::string out_dir = "out";
    bool include_retweets = false;
    bool nodeal_only = true;
    std::string lexicon = "builtin";
    std::string stopwords = "builtin";
    int min_count = 10;
    int spline_df = 10;
    bool bigrams_span_stopwords = true;
    int k = 38;
    int max_em_iters = 500;
    double em_tol = 1e-5;
    std::string init = "spectral";
    int gamma_max_iters = 5000;
    double s_gamma = 1.0;
    double r_gamma = 0.05;
    double s_kappa = 1.0;
    double r_kappa = 0.01;
    int draws = 25;
    double alpha = 0.01;
    int corr_draws = 10000;
    double mb_alpha = 0.05;
    std::vector<double> thresholds = {0.14, 0.10, 0.05};
    double percentile = 0.80;
    int window = 30;
    int max_lag = 6;
    int shift = 1;
    int movers_top = 3;
    std::uint64_t seed = 1;
    int threads = 1;

    StmConfig stm() const {
        StmConfig c;
        c.K = k;
        c.max_em_iters = max_em_iters;
        c.em_tol = em_tol;
        c.init.kind = init == "random" ? StmInit::Kind::Random : StmInit::Kind::Spectral;
        c.init.seed = derive_seed(seed, "fit.init");
        c.gamma_max_iters = gamma_max_iters;
        c.s_gamma = s_gamma;
        c.r_gamma = r_gamma;
        c.s_kappa = s_kappa;
        c.r_kappa = r_kappa;
        return c;
    }

    std::string path(const std::string& name) const {
        return (std::filesystem::path(out_dir) / name).string();
    }
};

inline std::vector<double> parse_threshold_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stod(item));
    }
    return out;
}

// Key = value file, '#' comments.
inline PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    PipelineConfig c;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto trimmed = text::trim_ws(line);
        if (trimmed.empty()) continue;
        const auto eq = trimmed.find('=');
        if (eq == std::string_view::npos)
            throw std::runtime_error("bad config line " + std::to_string(lineno) +
                                     ": expected key = value");
        const std::string key(text::trim_ws(trimmed.substr(0, eq)));
        const std::string val(text::trim_ws(trimmed.substr(eq + 1)));
        auto as_bool = [&] {
            if (val == "true" || val == "1") return true;
            if (val == "false" || val == "0") return false;
            throw std::runtime_error("bad boolean for " + key + ": " + val);
        };
        if (key == "input") c.input = val;
        else if (key == "out_dir") c.out_dir = val;
        else if (key == "include_retweets") c.include_retweets = as_bool();
        else if (key == "nodeal_only") c.nodeal_only = as_bool();
        else if (key == "lexicon") c.lexicon = val;
        else if (key == "stopwords") c.stopwords = val;
        else if (key == "min_count") c.min_count = std::stoi(val);
        else if (key == "spline_df") c.spline_df = std::stoi(val);
        else if (key == "bigrams_span_stopwords") c.bigrams_span_stopwords = as_bool();
        else if (key == "k") c.k = std::stoi(val);
        else if (key == "max_em_iters") c.max_em_iters = std::stoi(val);
        else if (key == "em_tol") c.em_tol = std::stod(val);
        else if (key == "init") c.init = val;
        else if (key == "gamma_max_iters") c.gamma_max_iters = std::stoi(val);
        else if (key == "s_gamma") c.s_gamma = std::stod(val);
        else if (key == "r_gamma") c.r_gamma = std::stod(val);
        else if (key == "s_kappa") c.s_kappa = std::stod(val);
        else if (key == "r_kappa") c.r_kappa = std::stod(val);
        else if (key == "draws") c.draws = std::stoi(val);
        else if (key == "alpha") c.alpha = std::stod(val);
        else if (key == "corr_draws") c.corr_draws = std::stoi(val);
        else if (key == "mb_alpha") c.mb_alpha = std::stod(val);
        else if (key == "thresholds") c.thresholds = parse_threshold_list(val);
        else if (key == "percentile") c.percentile = std::stod(val);
        else if (key == "window") c.window = std::stoi(val);
        else if (key == "max_lag") c.max_lag = std::stoi(val);
        else if (key == "shift") c.shift = std::stoi(val);
        else if (key == "movers_top") c.movers_top = std::stoi(val);
        else if (key == "seed") c.seed = std::stoull(val);
        else if (key == "threads") c.threads = std::stoi(val);
        else throw std::runtime_error("unknown config key: " + key);
    }
    return c;
}

// Parameter-range and input diagnostics; empty list means runnable.
inline std::vector<std::string> validate_config(const PipelineConfig& c) {
    std::vector<std::string> diags;
    if (c.input.empty()) diags.push_back("input not set");
    if (c.k < 2) diags.push_back("K must be >= 2");
    if (c.max_em_iters < 1) diags.push_back("max_em_iters must be >= 1");
    if (!(c.em_tol > 0)) diags.push_back("em_tol must be > 0");
    if (c.init != "spectral" && c.init != "random")
        diags.push_back("init must be spectral or random");
    if (c.min_count < 1) diags.push_back("min_count must be >= 1");
    if (c.spline_df < 0) diags.push_back("spline_df must be >= 0");
    if (c.draws < 1) diags.push_back("draws must be >= 1");
    if (!(c.alpha > 0 && c.alpha < 1)) diags.push_back("alpha must be in (0,1)");
    if (!(c.mb_alpha > 0 && c.mb_alpha < 1)) diags.push_back("mb_alpha must be in (0,1)");
    if (c.corr_draws < 1) diags.push_back("corr_draws must be >= 1");
    if (!(c.percentile > 0 && c.percentile < 1)) diags.push_back("percentile must be in (0,1)");
    if (c.window < 1) diags.push_back("window must be >= 1");
    if (c.max_lag < 0) diags.push_back("max_lag must be >= 0");
    if (c.shift < 1) diags.push_back("shift must be >= 1");
    if (c.movers_top < 1) diags.push_back("movers_top must be >= 1");
    for (std::size_t i = 0; i < c.thresholds.size(); ++i) {
        if (!(c.thresholds[i] > 0 && c.thresholds[i] <= 1))
            diags.push_back("thresholds must be in (0,1]");
        if (i > 0 && c.thresholds[i] >= c.thresholds[i - 1])
            diags.push_back("thresholds must be strictly descending");
    }
    if (c.lexicon != "builtin") {
        try {
            const auto lex = load_lexicon(c.lexicon);
            for (const auto& issue : validate_lexicon(lex)) diags.push_back("lexicon: " + issue);
        } catch (const std::exception& e) {
            diags.push_back(std::string("lexicon: ") + e.what());
        }
    }
    if (c.stopwords != "builtin") {
        std::ifstream in(c.stopwords);
        if (!in) diags.push_back("stopword file not readable: " + c.stopwords);
    }
    return diags;
}

// ---- manifest --------------------------------------------------------------------

inline std::string file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "missing";
    std::uint64_t h = 0xCBF29CE484222325ULL;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const auto n = in.gcount();
        for (long i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001B3ULL;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

struct StageRecord {
    std::string name;
    std::string params_hash;
    std::string input_hash;
    std::string output_hash;
    std::int64_t rows = 0;
    std::string status;  // "ok", "skipped", or "failed: ..."
};

struct Manifest {
    std::vector<StageRecord> stages;

    const StageRecord* find(const std::string& name) const {
        for (const auto& s : stages)
            if (s.name == name) return &s;
        return nullptr;
    }

    void upsert(StageRecord rec) {
        for (auto& s : stages)
            if (s.name == rec.name) {
                s = std::move(rec);
                return;
            }
        stages.push_back(std::move(rec));
    }
};

inline void save_manifest(const Manifest& m, const std::string& path) {
    nlohmann::json j;
    j["schema"] = "rhetorica.manifest/1";
    j["stages"] = nlohmann::json::array();
    for (const auto& s : m.stages)
        j["stages"].push_back({{"name", s.name},
                               {"params_hash", s.params_hash},
                               {"input_hash", s.input_hash},
                               {"output_hash", s.output_hash},
                               {"rows", s.rows},
                               {"status", s.status}});
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << j.dump(2) << '\n';
}

inline Manifest load_manifest(const std::string& path) {
    Manifest m;
    std::ifstream in(path, std::ios::binary);
    if (!in) return m;
    nlohmann::json j;
    in >> j;
    for (const auto& s : j.at("stages"))
        m.stages.push_back({s.at("name").get<std::string>(), s.at("params_hash").get<std::string>(),
                            s.at("input_hash").get<std::string>(),
                            s.at("output_hash").get<std::string>(), s.at("rows").get<std::int64_t>(),
                            s.at("status").get<std::string>()});
    return m;
}

// ---- stage implementations ----------------------------------------------------------

namespace pipeline_detail {

inline std::string combined_hash(const std::vector<std::string>& files) {
    std::string acc;
    for (const auto& f : files) acc += file_hash(f) + ";";
    return std::to_string(hash_tag(acc));
}

inline std::string params_hash(const std::string& s) { return std::to_string(hash_tag(s)); }

}  // namespace pipeline_detail

struct EffectsTable {
    EffectEstimate estimate;
    std::vector<TopicTypeLabels> labels;
};

inline void write_effects_csv(const EffectsTable& t, const std::string& path) {
    csv::Writer w(path);
    std::vector<std::string> header = {"topic"};
    for (const auto& c : t.estimate.col_names) header.push_back("coef_" + c);
    for (const char* c : {"dc", "br", "neg"}) {
        header.push_back(std::string(c) + "_estimate");
        header.push_back(std::string(c) + "_se");
        header.push_back(std::string(c) + "_p");
    }
    header.insert(header.end(), {"verb_type", "faction_type", "negation_flag"});
    w.row(header);
    for (std::size_t k = 0; k < t.estimate.topics.size(); ++k) {
        const auto& te = t.estimate.topics[k];
        std::vector<std::string> row = {std::to_string(k)};
        for (int p = 0; p < te.coef.size(); ++p) row.push_back(csv::fmt(te.coef(p)));
        for (const auto& c : te.contrasts) {
            row.push_back(csv::fmt(c.estimate));
            row.push_back(csv::fmt(c.std_error));
            row.push_back(csv::fmt(c.p_value));
        }
        row.push_back(t.labels[k].verb_type);
        row.push_back(t.labels[k].faction_type);
        row.push_back(t.labels[k].negation_flag ? "true" : "false");
        w.row(row);
    }
}

struct EffectsCsvRow {
    int topic = 0;
    double dc_estimate = 0.0;
    TopicTypeLabels labels;
};

inline std::vector<EffectsCsvRow> read_effects_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open effects file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty effects file: " + path);
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    auto col = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        throw std::runtime_error("effects file missing column " + name);
    };
    const int c_topic = col("topic"), c_dc = col("dc_estimate"), c_vt = col("verb_type"),
              c_ft = col("faction_type"), c_nf = col("negation_flag");
    std::vector<EffectsCsvRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        EffectsCsvRow r;
        r.topic = std::stoi(cells[static_cast<std::size_t>(c_topic)]);
        r.dc_estimate = std::stod(cells[static_cast<std::size_t>(c_dc)]);
        r.labels.verb_type = cells[static_cast<std::size_t>(c_vt)];
        r.labels.faction_type = cells[static_cast<std::size_t>(c_ft)];
        r.labels.negation_flag = cells[static_cast<std::size_t>(c_nf)] == "true";
        rows.push_back(r);
    }
    return rows;
}

// Attaches labels and the heat-map ordering (rank by the Destruction-Creation
// contrast) to a topic graph.
inline void label_topic_graph(TopicGraph& g, const std::vector<EffectsCsvRow>& rows) {
    std::vector<std::pair<double, int>> order;
    for (const auto& r : rows) order.push_back({r.dc_estimate, r.topic});
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::map<int, int> rank;
    for (std::size_t i = 0; i < order.size(); ++i) rank[order[i].second] = static_cast<int>(i);
    for (auto& n : g.nodes) {
        for (const auto& r : rows) {
            if (r.topic == n.id) {
                n.labels = r.labels;
                break;
            }
        }
        const auto it = rank.find(n.id);
        n.order = it == rank.end() ? -1 : it->second;
    }
}

inline void write_correlation_csv(const Eigen::MatrixXd& corr, const std::string& path) {
    csv::Writer w(path);
    std::vector<std::string> header = {"topic"};
    for (int k = 0; k < corr.cols(); ++k) header.push_back("t" + std::to_string(k));
    w.row(header);
    for (int i = 0; i < corr.rows(); ++i) {
        std::vector<std::string> row = {std::to_string(i)};
        for (int j = 0; j < corr.cols(); ++j) row.push_back(csv::fmt(corr(i, j)));
        w.row(row);
    }
}

inline void write_leadfollow_csv(const LeadFollowResult& r, const std::string& path) {
    csv::Writer w(path);
    w.row({"date", "f_brex_follows_rem", "f_rem_follows_brex", "fl"});
    for (const auto& d : r.days) {
        if (d.evaluable)
            w.row({day_to_iso(d.day), csv::fmt(d.f_a_follows_b), csv::fmt(d.f_b_follows_a),
                   csv::fmt(d.fl)});
        else
            w.row({day_to_iso(d.day), "", "", ""});
    }
}

inline void write_movers_csv(const std::vector<Mover>& movers, const std::string& path) {
    csv::Writer w(path);
    w.row({"date", "faction", "sign", "rank", "topic", "delta"});
    for (const auto& m : movers)
        w.row({day_to_iso(m.day), to_string(m.faction), m.sign > 0 ? "+" : "-",
               std::to_string(m.rank), std::to_string(m.topic), csv::fmt(m.delta)});
}

// ---- pipeline run ----------------------------------------------------------------------

struct PipelineReport {
    std::vector<StageRecord> stages;
    bool resumed_any = false;
};

// Runs ingest -> extract -> prep -> fit -> effects -> corrnet -> narrative ->
// leadfollow -> movers, writing each artifact before the next stage starts.
// A stage is skipped when the manifest records the same parameter and input
// hashes and the output files still hash to the recorded value.
inline PipelineReport run_pipeline(const PipelineConfig& cfg) {
    {
        const auto diags = validate_config(cfg);
        if (!diags.empty()) {
            std::string msg = "invalid configuration:";
            for (const auto& d : diags) msg += "\n  " + d;
            throw std::runtime_error(msg);
        }
    }
    set_thread_count(cfg.threads);
    std::filesystem::create_directories(cfg.out_dir);
    std::filesystem::create_directories(cfg.path("graphs"));
    std::filesystem::create_directories(cfg.path("narratives"));
    const std::string manifest_path = cfg.path("manifest.json");
    Manifest manifest = load_manifest(manifest_path);
    PipelineReport report;

    const VerbLexicon lexicon =
        cfg.lexicon == "builtin" ? default_lexicon() : load_lexicon(cfg.lexicon);
    const StopwordSet stops =
        cfg.stopwords == "builtin" ? default_stopwords() : load_stopwords(cfg.stopwords);

    auto stage = [&](const std::string& name, const std::string& params,
                     const std::vector<std::string>& inputs,
                     const std::vector<std::string>& outputs,
                     const std::function<std::int64_t()>& body) {
        StageRecord rec;
        rec.name = name;
        rec.params_hash = pipeline_detail::params_hash(params);
        rec.input_hash = pipeline_detail::combined_hash(inputs);
        const StageRecord* prev = manifest.find(name);
        if (prev && prev->status == "ok" && prev->params_hash == rec.params_hash &&
            prev->input_hash == rec.input_hash) {
            bool outputs_ok = true;
            for (const auto& f : outputs)
                if (!std::filesystem::exists(f)) outputs_ok = false;
            if (outputs_ok && pipeline_detail::combined_hash(outputs) == prev->output_hash) {
                rec = *prev;
                rec.status = "skipped";
                manifest.upsert(rec);
                save_manifest(manifest, manifest_path);
                report.stages.push_back(rec);
                report.resumed_any = true;
                return;
            }
        }
        try {
            rec.rows = body();
        } catch (const std::exception& e) {
            rec.status = std::string("failed: ") + e.what();
            rec.output_hash = "";
            manifest.upsert(rec);
            save_manifest(manifest, manifest_path);
            throw;
        }
        rec.output_hash = pipeline_detail::combined_hash(outputs);
        rec.status = "ok";
        manifest.upsert(rec);
        save_manifest(manifest, manifest_path);
        report.stages.push_back(rec);
    };

    const std::string labeled = cfg.path("labeled.jsonl");
    const std::string ingest_report = cfg.path("ingest_report.json");
    const std::string relations = cfg.path("relations.jsonl");
    const std::string corpus_bin = cfg.path("corpus.bin");
    const std::string model_bin = cfg.path("model.bin");
    const std::string effects_csv = cfg.path("effects.csv");
    const std::string leadfollow_csv = cfg.path("leadfollow.csv");
    const std::string movers_csv = cfg.path("movers.csv");

    stage("ingest", std::string("include_retweets=") + (cfg.include_retweets ? "1" : "0"),
          {cfg.input}, {labeled, ingest_report}, [&]() -> std::int64_t {
              const auto rep = run_ingest(cfg.input, labeled, cfg.include_retweets);
              nlohmann::json j = {{"total_in", rep.total_in},
                                  {"removed_offtopic", rep.removed_offtopic},
                                  {"kept", rep.kept},
                                  {"line_errors", rep.line_errors}};
              std::ofstream out(ingest_report, std::ios::binary);
              out << j.dump(2) << '\n';
              return rep.kept;
          });

    stage("extract",
          std::string("nodeal_only=") + (cfg.nodeal_only ? "1" : "0") + " lexicon=" + cfg.lexicon,
          {labeled}, {relations}, [&]() -> std::int64_t {
              const ExtractionPatternSet pats(lexicon);
              const auto rep = run_extract(labeled, relations, pats, cfg.nodeal_only);
              return cfg.nodeal_only ? rep.nodeal_relations : rep.relations;
          });

    stage("prep",
          "min_count=" + std::to_string(cfg.min_count) + " spline_df=" +
              std::to_string(cfg.spline_df) + " span=" +
              (cfg.bigrams_span_stopwords ? "1" : "0") + " stopwords=" + cfg.stopwords,
          {relations}, {corpus_bin}, [&]() -> std::int64_t {
              const auto rels = load_relations(relations);
              const auto corpus = run_prep(rels, stops, cfg.min_count, cfg.spline_df,
                                           cfg.bigrams_span_stopwords);
              save_corpus(corpus, corpus_bin);
              return corpus.matrix.n_docs();
          });

    stage("fit",
          "k=" + std::to_string(cfg.k) + " iters=" + std::to_string(cfg.max_em_iters) + " tol=" +
              csv::fmt(cfg.em_tol) + " init=" + cfg.init + " seed=" + std::to_string(cfg.seed),
          {corpus_bin}, {model_bin}, [&]() -> std::int64_t {
              ModelArtifact art;
              art.corpus = load_corpus_artifact(corpus_bin);
              art.config = cfg.stm();
              const auto design = art.corpus.design();
              art.model = fit_stm(art.corpus.matrix, design, art.config, &art.corpus.vocab);
              save_model(art, model_bin);
              return art.model.theta.rows();
          });

    stage("effects",
          "draws=" + std::to_string(cfg.draws) + " alpha=" + csv::fmt(cfg.alpha) + " seed=" +
              std::to_string(cfg.seed),
          {model_bin}, {effects_csv}, [&]() -> std::int64_t {
              const auto art = load_model(model_bin);
              const auto design = art.corpus.design();
              EffectsTable t;
              t.estimate = estimate_effects(art.model, design, cfg.draws,
                                            derive_seed(cfg.seed, "effects"));
              t.labels = type_topics(t.estimate, cfg.alpha);
              write_effects_csv(t, effects_csv);
              return static_cast<std::int64_t>(t.estimate.topics.size());
          });

    std::vector<std::string> graph_files = {cfg.path("graphs/correlations.csv"),
                                            cfg.path("graphs/corr_full.graphml"),
                                            cfg.path("graphs/corr_full.json")};
    for (const double th : cfg.thresholds) {
        graph_files.push_back(cfg.path("graphs/corr_" + csv::fmt(th) + ".graphml"));
        graph_files.push_back(cfg.path("graphs/corr_" + csv::fmt(th) + ".json"));
    }
    stage("corrnet",
          "corr_draws=" + std::to_string(cfg.corr_draws) + " mb_alpha=" + csv::fmt(cfg.mb_alpha) +
              " thresholds=" + std::to_string(cfg.thresholds.size()) + " seed=" +
              std::to_string(cfg.seed),
          {model_bin, effects_csv}, graph_files, [&]() -> std::int64_t {
              const auto art = load_model(model_bin);
              const auto design = art.corpus.design();
              const auto corr = topic_correlations(art.model, design, cfg.corr_draws,
                                                   derive_seed(cfg.seed, "corrnet"));
              write_correlation_csv(corr, cfg.path("graphs/correlations.csv"));
              auto g = sparsify(corr, art.model.theta, cfg.mb_alpha);
              const auto eff_rows = read_effects_csv(effects_csv);
              label_topic_graph(g, eff_rows);
              write_topic_graphml(g, cfg.path("graphs/corr_full.graphml"));
              write_topic_graph_json(g, cfg.path("graphs/corr_full.json"));
              for (const auto& fg : filtrate(g, cfg.thresholds)) {
                  const std::string base = "graphs/corr_" + csv::fmt(fg.threshold);
                  write_topic_graphml(fg, cfg.path(base + ".graphml"));
                  write_topic_graph_json(fg, cfg.path(base + ".json"));
              }
              return static_cast<std::int64_t>(g.edges.size());
          });

    std::vector<std::string> narrative_files;
    for (int k = 0; k < cfg.k; ++k) {
        narrative_files.push_back(cfg.path("narratives/topic_" + std::to_string(k) + ".graphml"));
        narrative_files.push_back(cfg.path("narratives/topic_" + std::to_string(k) + ".json"));
    }
    stage("narrative", "percentile=" + csv::fmt(cfg.percentile), {model_bin}, narrative_files,
          [&]() -> std::int64_t {
              const auto art = load_model(model_bin);
              std::int64_t nodes = 0;
              for (int k = 0; k < art.model.K; ++k) {
                  const auto g = build_narrative(art.model, art.corpus.vocab, k, cfg.percentile);
                  write_narrative_graphml(
                      g, cfg.path("narratives/topic_" + std::to_string(k) + ".graphml"));
                  write_narrative_json(g,
                                       cfg.path("narratives/topic_" + std::to_string(k) + ".json"));
                  nodes += static_cast<std::int64_t>(g.nodes.size());
              }
              return nodes;
          });

    stage("leadfollow",
          "window=" + std::to_string(cfg.window) + " max_lag=" + std::to_string(cfg.max_lag) +
              " shift=" + std::to_string(cfg.shift),
          {model_bin}, {leadfollow_csv}, [&]() -> std::int64_t {
              const auto art = load_model(model_bin);
              const auto design = art.corpus.design();
              const auto series = build_series(art.model, design);
              LeadFollowParams params;
              params.window = std::min(cfg.window, series[0].n_days());
              params.max_lag = cfg.max_lag;
              params.shift = cfg.shift;
              const auto lf = lead_follow(series[0], series[1], params);
              write_leadfollow_csv(lf, leadfollow_csv);
              std::int64_t evaluable = 0;
              for (const auto& d : lf.days) evaluable += d.evaluable;
              return evaluable;
          });

    stage("movers", "top=" + std::to_string(cfg.movers_top), {model_bin}, {movers_csv},
          [&]() -> std::int64_t {
              const auto art = load_model(model_bin);
              const auto design = art.corpus.design();
              const auto series = build_series(art.model, design);
              std::vector<Mover> all;
              for (const auto& s : series) {
                  if (s.n_days() < 8) continue;
                  const auto mv = weekly_movers(s, cfg.movers_top);
                  all.insert(all.end(), mv.begin(), mv.end());
              }
              write_movers_csv(all, movers_csv);
              return static_cast<std::int64_t>(all.size());
          });

    return report;
}

}  // namespace rhetorica
