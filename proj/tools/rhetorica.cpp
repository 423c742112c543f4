// Command-line front end for the debate-mining pipeline: ingest, causal
// relation extraction, corpus prep, structural topic model fitting, effect
// estimation, correlation networks, narrative networks, and lead/follow
// dynamics. `run` drives the whole pipeline from a config file with resumable
// staged artifacts.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rhetorica/artifacts.hpp"
#include "rhetorica/pipeline.hpp"

namespace {

using namespace rhetorica;

std::vector<int> parse_grid(const std::string& s) {
    std::vector<int> grid;
    const auto colon = s.find(':');
    if (colon != std::string::npos) {
        const int lo = std::stoi(s.substr(0, colon));
        const int hi = std::stoi(s.substr(colon + 1));
        for (int k = lo; k <= hi; ++k) grid.push_back(k);
        return grid;
    }
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) grid.push_back(std::stoi(item));
    return grid;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rhetorica: causal-argument mining and debate-structure analysis"};
    app.require_subcommand(1);

    std::uint64_t seed = 1;
    int threads = 1;
    app.add_option("--seed", seed, "global random seed");
    app.add_option("--threads", threads, "worker thread count");

    // ---- ingest ----
    auto* cmd_ingest = app.add_subcommand("ingest", "load, filter and label the raw corpus");
    std::string in_path, out_path, report_path;
    bool include_retweets = false;
    cmd_ingest->add_option("--input", in_path, "JSONL corpus")->required();
    cmd_ingest->add_option("--output", out_path, "labeled JSONL output")->required();
    cmd_ingest->add_option("--report", report_path, "filter report JSON");
    cmd_ingest->add_flag("--include-retweets", include_retweets, "keep retweets");

    // ---- extract ----
    auto* cmd_extract = app.add_subcommand("extract", "extract cause-effect relation triplets");
    std::string ex_in, ex_out, lexicon_path = "builtin";
    bool nodeal_only = false, dump_patterns = false;
    cmd_extract->add_option("--input", ex_in, "labeled JSONL");
    cmd_extract->add_option("--output", ex_out, "relations JSONL");
    cmd_extract->add_option("--lexicon", lexicon_path, "verb lexicon file (default builtin)");
    cmd_extract->add_flag("--nodeal-only", nodeal_only, "keep only no-deal-cause relations");
    cmd_extract->add_flag("--dump-patterns", dump_patterns, "print compiled regex strings");

    // ---- prep ----
    auto* cmd_prep = app.add_subcommand("prep", "build the document-term matrix and design");
    std::string pr_rel, pr_stop = "builtin", pr_out;
    int min_count = 10, spline_df = 10;
    bool no_span = false;
    cmd_prep->add_option("--relations", pr_rel, "relations JSONL")->required();
    cmd_prep->add_option("--stopwords", pr_stop, "stopword file (default builtin)");
    cmd_prep->add_option("--min-count", min_count, "vocabulary count threshold");
    cmd_prep->add_option("--spline-df", spline_df, "time spline degrees of freedom");
    cmd_prep->add_flag("--bigrams-adjacent-only", no_span,
                       "form bigrams only from originally adjacent tokens");
    cmd_prep->add_option("--out", pr_out, "corpus artifact")->required();

    // ---- fit ----
    auto* cmd_fit = app.add_subcommand("fit", "fit the structural topic model");
    std::string fit_corpus, fit_out, fit_init = "spectral";
    int fit_k = 38, fit_iters = 500;
    double fit_tol = 1e-5;
    cmd_fit->add_option("--corpus", fit_corpus, "corpus artifact")->required();
    cmd_fit->add_option("--k", fit_k, "topic count");
    cmd_fit->add_option("--max-iters", fit_iters, "max EM iterations");
    cmd_fit->add_option("--tol", fit_tol, "EM relative-bound tolerance");
    cmd_fit->add_option("--init", fit_init, "spectral | random");
    cmd_fit->add_option("--out", fit_out, "model artifact")->required();

    // ---- select-k ----
    auto* cmd_selk = app.add_subcommand("select-k", "heldout-likelihood K selection protocol");
    std::string sk_corpus, sk_grid = "3:70", sk_out;
    int sk_reps = 50, sk_iters = 200;
    double sk_heldout = 0.25;
    cmd_selk->add_option("--corpus", sk_corpus, "corpus artifact")->required();
    cmd_selk->add_option("--grid", sk_grid, "K grid, e.g. 3:70 or 2,4,8");
    cmd_selk->add_option("--reps", sk_reps, "replications per K");
    cmd_selk->add_option("--heldout", sk_heldout, "heldout document fraction");
    cmd_selk->add_option("--max-iters", sk_iters, "max EM iterations per replication");
    cmd_selk->add_option("--out", sk_out, "CSV output")->required();

    // ---- effects ----
    auto* cmd_eff = app.add_subcommand("effects", "estimate covariate effects on topics");
    std::string eff_model, eff_out;
    double eff_alpha = 0.01;
    int eff_draws = 25;
    cmd_eff->add_option("--model", eff_model, "model artifact")->required();
    cmd_eff->add_option("--alpha", eff_alpha, "significance level for labels");
    cmd_eff->add_option("--draws", eff_draws, "composition draws");
    cmd_eff->add_option("--out", eff_out, "CSV output")->required();

    // ---- corrnet ----
    auto* cmd_net = app.add_subcommand("corrnet", "topic correlation network and filtration");
    std::string net_model, net_effects, net_dir, net_thresholds = "0.14,0.10,0.05";
    double net_mb_alpha = 0.05;
    int net_draws = 10000;
    cmd_net->add_option("--model", net_model, "model artifact")->required();
    cmd_net->add_option("--effects", net_effects, "effects CSV for node labels")->required();
    cmd_net->add_option("--thresholds", net_thresholds, "descending filtration thresholds");
    cmd_net->add_option("--mb-alpha", net_mb_alpha, "neighborhood-selection level");
    cmd_net->add_option("--corr-draws", net_draws, "Monte Carlo draws for correlations");
    cmd_net->add_option("--out-dir", net_dir, "output directory")->required();

    // ---- narrative ----
    auto* cmd_nar = app.add_subcommand("narrative", "per-topic phrasal network");
    std::string nar_model, nar_out;
    int nar_topic = 0;
    double nar_pct = 0.80;
    bool nar_literal = false;
    cmd_nar->add_option("--model", nar_model, "model artifact")->required();
    cmd_nar->add_option("--topic", nar_topic, "topic index")->required();
    cmd_nar->add_option("--percentile", nar_pct, "retention percentile");
    cmd_nar->add_flag("--literal-delta", nar_literal,
                      "use the literal published difference formula");
    cmd_nar->add_option("--out", nar_out, "output (.graphml or .json)")->required();

    // ---- leadfollow ----
    auto* cmd_lf = app.add_subcommand("leadfollow", "DTW lead/follow index between factions");
    std::string lf_model, lf_out;
    int lf_window = 30, lf_lag = 6, lf_shift = 1;
    cmd_lf->add_option("--model", lf_model, "model artifact")->required();
    cmd_lf->add_option("--window", lf_window, "window length in days");
    cmd_lf->add_option("--max-lag", lf_lag, "max warping lag in days");
    cmd_lf->add_option("--shift", lf_shift, "window step in days");
    cmd_lf->add_option("--out", lf_out, "CSV output")->required();

    // ---- movers ----
    auto* cmd_mov = app.add_subcommand("movers", "weekly top-mover topics per faction");
    std::string mov_model, mov_out;
    int mov_top = 3;
    cmd_mov->add_option("--model", mov_model, "model artifact")->required();
    cmd_mov->add_option("--top", mov_top, "movers per sign class");
    cmd_mov->add_option("--out", mov_out, "CSV output")->required();

    // ---- run / validate ----
    auto* cmd_run = app.add_subcommand("run", "run the full pipeline from a config file");
    std::string run_config;
    cmd_run->add_option("--config", run_config, "key = value config file")->required();

    auto* cmd_val = app.add_subcommand("validate", "validate a config file");
    std::string val_config;
    cmd_val->add_option("--config", val_config, "key = value config file")->required();

    CLI11_PARSE(app, argc, argv);
    set_thread_count(threads);

    try {
        if (cmd_ingest->parsed()) {
            std::vector<LineError> errors;
            const auto rep = run_ingest(in_path, out_path, include_retweets, &errors);
            for (const auto& e : errors) std::cerr << "ingest: " << e.message << '\n';
            if (!report_path.empty()) {
                nlohmann::json j = {{"total_in", rep.total_in},
                                    {"removed_offtopic", rep.removed_offtopic},
                                    {"kept", rep.kept},
                                    {"line_errors", rep.line_errors}};
                std::ofstream out(report_path, std::ios::binary);
                out << j.dump(2) << '\n';
            }
            std::cerr << "ingest: kept " << rep.kept << " of " << rep.total_in << " ("
                      << rep.removed_offtopic << " off-topic)\n";
        } else if (cmd_extract->parsed()) {
            const VerbLexicon lex =
                lexicon_path == "builtin" ? default_lexicon() : load_lexicon(lexicon_path);
            const ExtractionPatternSet pats(lex);
            if (dump_patterns) {
                std::cout << "active_pattern=\"" << pats.active_pattern_string() << "\"\n\n"
                          << "passive_pattern=\"" << pats.passive_pattern_string() << "\"\n\n"
                          << "end_form_pattern=\"" << pats.end_form_pattern_string() << "\"\n\n"
                          << "and_regex=\"" << pats.and_pattern_string() << "\"\n\n"
                          << "nodeal_cause_regex=\"" << pats.nodeal_cause_pattern_string()
                          << "\"\n";
                if (ex_in.empty()) return 0;
            }
            if (ex_in.empty() || ex_out.empty())
                throw std::runtime_error("extract: --input and --output are required");
            const auto rep = run_extract(ex_in, ex_out, pats, nodeal_only);
            std::cerr << "extract: " << rep.relations << " relations from " << rep.tweets
                      << " tweets (" << rep.nodeal_relations << " no-deal)\n";
        } else if (cmd_prep->parsed()) {
            const StopwordSet stops =
                pr_stop == "builtin" ? default_stopwords() : load_stopwords(pr_stop);
            const auto rels = load_relations(pr_rel);
            const auto corpus = run_prep(rels, stops, min_count, spline_df, !no_span);
            save_corpus(corpus, pr_out);
            std::cerr << "prep: " << corpus.matrix.n_docs() << " docs, vocabulary "
                      << corpus.vocab.size() << " (" << corpus.vocab.n_unigrams() << " unigrams, "
                      << corpus.vocab.n_bigrams() << " bigrams), " << corpus.dropped_rel_ids.size()
                      << " dropped\n";
        } else if (cmd_fit->parsed()) {
            ModelArtifact art;
            art.corpus = load_corpus_artifact(fit_corpus);
            art.config.K = fit_k;
            art.config.max_em_iters = fit_iters;
            art.config.em_tol = fit_tol;
            art.config.init.kind =
                fit_init == "random" ? StmInit::Kind::Random : StmInit::Kind::Spectral;
            art.config.init.seed = derive_seed(seed, "fit.init");
            const auto design = art.corpus.design();
            art.model = fit_stm(art.corpus.matrix, design, art.config, &art.corpus.vocab);
            save_model(art, fit_out);
            std::cerr << "fit: bound " << csv::fmt(art.model.bound_trace.back()) << ", "
                      << (art.model.converged_at
                              ? "converged at iteration " + std::to_string(*art.model.converged_at)
                              : std::string("not converged"))
                      << '\n';
            for (const auto& w : art.model.warnings) std::cerr << "fit: warning: " << w << '\n';
        } else if (cmd_selk->parsed()) {
            const auto corpus = load_corpus_artifact(sk_corpus);
            const auto design = corpus.design();
            StmConfig cfg;
            cfg.max_em_iters = sk_iters;
            std::vector<std::string> failures;
            const auto res = select_k(corpus.matrix, design, parse_grid(sk_grid), sk_reps, cfg,
                                      sk_heldout, seed, &failures);
            csv::Writer w(sk_out);
            w.row({"K", "mean_bound", "mean_heldout", "n_ok"});
            for (const auto& row : res.rows)
                w.row({std::to_string(row.K), csv::fmt(row.mean_bound), csv::fmt(row.mean_heldout),
                       std::to_string(row.n_ok)});
            for (const auto& f : failures) std::cerr << "select-k: " << f << '\n';
        } else if (cmd_eff->parsed()) {
            const auto art = load_model(eff_model);
            const auto design = art.corpus.design();
            EffectsTable t;
            t.estimate = estimate_effects(art.model, design, eff_draws, derive_seed(seed, "effects"));
            t.labels = type_topics(t.estimate, eff_alpha);
            write_effects_csv(t, eff_out);
        } else if (cmd_net->parsed()) {
            std::filesystem::create_directories(net_dir);
            const auto art = load_model(net_model);
            const auto design = art.corpus.design();
            const auto corr =
                topic_correlations(art.model, design, net_draws, derive_seed(seed, "corrnet"));
            write_correlation_csv(corr, net_dir + "/correlations.csv");
            auto g = sparsify(corr, art.model.theta, net_mb_alpha);
            label_topic_graph(g, read_effects_csv(net_effects));
            write_topic_graphml(g, net_dir + "/corr_full.graphml");
            write_topic_graph_json(g, net_dir + "/corr_full.json");
            for (const auto& fg : filtrate(g, parse_threshold_list(net_thresholds))) {
                const std::string base = net_dir + "/corr_" + csv::fmt(fg.threshold);
                write_topic_graphml(fg, base + ".graphml");
                write_topic_graph_json(fg, base + ".json");
            }
        } else if (cmd_nar->parsed()) {
            const auto art = load_model(nar_model);
            const auto g =
                build_narrative(art.model, art.corpus.vocab, nar_topic, nar_pct, nar_literal);
            export_narrative(g, nar_out);
            for (const auto& w : g.warnings) std::cerr << "narrative: warning: " << w << '\n';
        } else if (cmd_lf->parsed()) {
            const auto art = load_model(lf_model);
            const auto design = art.corpus.design();
            const auto series = build_series(art.model, design);
            LeadFollowParams params{lf_window, lf_lag, lf_shift};
            write_leadfollow_csv(lead_follow(series[0], series[1], params), lf_out);
        } else if (cmd_mov->parsed()) {
            const auto art = load_model(mov_model);
            const auto design = art.corpus.design();
            std::vector<Mover> all;
            for (const auto& s : build_series(art.model, design)) {
                if (s.n_days() < 8) continue;
                const auto mv = weekly_movers(s, mov_top);
                all.insert(all.end(), mv.begin(), mv.end());
            }
            write_movers_csv(all, mov_out);
        } else if (cmd_run->parsed()) {
            auto cfg = load_config(run_config);
            cfg.seed = seed != 1 ? seed : cfg.seed;
            if (threads != 1) cfg.threads = threads;
            const auto report = run_pipeline(cfg);
            for (const auto& s : report.stages)
                std::cerr << "stage " << s.name << ": " << s.status << " (" << s.rows << " rows)\n";
        } else if (cmd_val->parsed()) {
            const auto cfg = load_config(val_config);
            const auto diags = validate_config(cfg);
            for (const auto& d : diags) std::cout << d << '\n';
            return diags.empty() ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
