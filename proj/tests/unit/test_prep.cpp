#include <catch2/catch_amalgamated.hpp>

#include "rhetorica/design.hpp"
#include "rhetorica/prep.hpp"
#include "rhetorica/rng.hpp"

using namespace rhetorica;

TEST_CASE("tokenize_effect lowercases, filters stopwords, forms bigrams", "[prep]") {
    const auto& stops = default_stopwords();
    const auto t = tokenize_effect("destroy the UK economy", stops);
    REQUIRE(t.unigrams == std::vector<std::string>{"destroy", "uk", "economy"});
    REQUIRE(t.bigrams == std::vector<std::string>{"destroy uk", "uk economy"});

    const auto empty = tokenize_effect("it is so very", stops);
    CHECK(empty.unigrams.empty());
    CHECK(empty.bigrams.empty());

    const auto emoji = tokenize_effect("job losses 😡", stops);
    REQUIRE(emoji.unigrams.size() == 3);
    CHECK(emoji.unigrams[0] == "job");
    CHECK(emoji.unigrams[1] == "losses");
    CHECK(emoji.unigrams[2] == "😡");
}

TEST_CASE("tokenize_effect strips urls and mentions, keeps hyphens", "[prep]") {
    const auto& stops = default_stopwords();
    const auto t = tokenize_effect("no-deal chaos https://t.co/xyz @user WWW.site.com", stops);
    REQUIRE(t.unigrams == std::vector<std::string>{"no-deal", "chaos"});

    // apostrophes stay inside tokens so contractions match the stopword list
    const auto t2 = tokenize_effect("it's the uk's economy", stops);
    CHECK(t2.unigrams == std::vector<std::string>{"uk's", "economy"});
}

TEST_CASE("bigram stopword spanning is switchable", "[prep]") {
    const auto& stops = default_stopwords();
    const auto spanning = tokenize_effect("food of shortages", stops, true);
    REQUIRE(spanning.bigrams == std::vector<std::string>{"food shortages"});
    const auto adjacent = tokenize_effect("food of shortages", stops, false);
    CHECK(adjacent.bigrams.empty());
    const auto direct = tokenize_effect("food shortages", stops, false);
    CHECK(direct.bigrams == std::vector<std::string>{"food shortages"});
}

namespace {

TokenizedEffect doc_of(std::vector<std::string> unigrams, std::vector<std::string> bigrams = {}) {
    TokenizedEffect d;
    d.unigrams = std::move(unigrams);
    d.bigrams = std::move(bigrams);
    return d;
}

}  // namespace

TEST_CASE("build_matrix applies the count threshold", "[prep]") {
    const std::vector<TokenizedEffect> docs = {doc_of({"a"}), doc_of({"a"}), doc_of({"a"})};
    const auto [vocab, mat] = build_matrix(docs, {"d0", "d1", "d2"}, 3);
    REQUIRE(vocab.size() == 1);
    CHECK(vocab.entries[0].token == "a");
    CHECK(mat.col_sums[0] == 3);

    std::vector<TokenizedEffect> sparse(10, doc_of({"common"}));
    sparse.push_back(doc_of({"x", "common"}));
    sparse.push_back(doc_of({"x", "common"}));
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < sparse.size(); ++i) ids.push_back("s" + std::to_string(i));
    const auto [v2, m2] = build_matrix(sparse, ids, 10);
    (void)m2;
    CHECK(v2.lookup("x") == -1);  // appears twice, below threshold
    CHECK(v2.lookup("common") >= 0);
}

TEST_CASE("build_matrix drops emptied docs and reports them", "[prep]") {
    const std::vector<TokenizedEffect> docs = {doc_of({"common", "common"}), doc_of({"rare"}),
                                               doc_of({"common"})};
    const auto [vocab, mat] = build_matrix(docs, {"d0", "d1", "d2"}, 2);
    CHECK(vocab.size() == 1);
    REQUIRE(mat.dropped_docs == std::vector<int>{1});
    CHECK(mat.doc_ids == std::vector<std::string>{"d0", "d2"});
    CHECK_THROWS_WITH(build_matrix({doc_of({"one"})}, {"d0"}, 5), "empty corpus");
}

TEST_CASE("build_matrix pruning is idempotent", "[prep]") {
    Rng rng(77);
    std::vector<TokenizedEffect> docs;
    std::vector<std::string> ids;
    const std::vector<std::string> pool = {"aa", "bb", "cc", "dd", "ee", "ff", "gg"};
    for (int d = 0; d < 40; ++d) {
        TokenizedEffect t;
        const auto len = 1 + rng.uniform_below(5);
        for (std::uint64_t i = 0; i < len; ++i)
            t.unigrams.push_back(pool[rng.uniform_below(pool.size())]);
        docs.push_back(t);
        ids.push_back("d" + std::to_string(d));
    }
    const auto [v1, m1] = build_matrix(docs, ids, 8);
    std::vector<TokenizedEffect> surviving;
    std::vector<std::string> surviving_ids;
    for (const int d : m1.kept_docs) {
        TokenizedEffect t;
        for (const auto& u : docs[static_cast<std::size_t>(d)].unigrams)
            if (v1.lookup(u) >= 0) t.unigrams.push_back(u);
        surviving.push_back(t);
        surviving_ids.push_back(ids[static_cast<std::size_t>(d)]);
    }
    const auto [v2, m2] = build_matrix(surviving, surviving_ids, 8);
    REQUIRE(v2.size() == v1.size());
    for (int v = 0; v < v1.size(); ++v) {
        CHECK(v2.entries[static_cast<std::size_t>(v)].token ==
              v1.entries[static_cast<std::size_t>(v)].token);
        CHECK(m2.col_sums[static_cast<std::size_t>(v)] == m1.col_sums[static_cast<std::size_t>(v)]);
    }
    CHECK(m2.dropped_docs.empty());
}

TEST_CASE("bigram counts never exceed their unigram parts", "[prep]") {
    const auto& stops = default_stopwords();
    Rng rng(31);
    const std::vector<std::string> words = {"food", "shortages", "jobs", "chaos", "queues"};
    std::vector<TokenizedEffect> docs;
    std::vector<std::string> ids;
    for (int d = 0; d < 60; ++d) {
        std::string text;
        const auto len = 2 + rng.uniform_below(6);
        for (std::uint64_t i = 0; i < len; ++i) text += words[rng.uniform_below(words.size())] + " ";
        docs.push_back(tokenize_effect(text, stops));
        ids.push_back("d" + std::to_string(d));
    }
    const auto [vocab, mat] = build_matrix(docs, ids, 1);
    for (const auto& e : vocab.entries) {
        if (e.kind != TokenKind::Bigram) continue;
        const auto [u, w] = Vocabulary::bigram_parts(e.token);
        const auto cu = vocab.entries[static_cast<std::size_t>(vocab.lookup(u))].count;
        const auto cw = vocab.entries[static_cast<std::size_t>(vocab.lookup(w))].count;
        INFO(e.token);
        CHECK(e.count <= std::min(cu, cw));
    }
}

TEST_CASE("bspline basis is a non-negative partition of unity", "[prep]") {
    Rng rng(5);
    for (const int df : {1, 2, 4, 7, 10}) {
        for (int i = 0; i <= 20; ++i) {
            const double t = i == 20 ? 1.0 : rng.uniform();
            const auto b = bspline_basis(t, df);
            REQUIRE(static_cast<int>(b.size()) == df);
            double sum = 0.0;
            for (const double x : b) {
                CHECK(x >= 0.0);
                sum += x;
            }
            INFO("df=" << df << " t=" << t);
            CHECK(sum == Catch::Approx(1.0).epsilon(1e-12));
        }
    }
}

namespace {

RelationTriplet meta_triplet(std::int64_t day, FactionLabel f, RelType rt, bool neg) {
    RelationTriplet t;
    t.day = day;
    t.faction = f;
    t.rel_type = rt;
    t.negated = neg;
    return t;
}

}  // namespace

TEST_CASE("build_design column arithmetic", "[prep]") {
    // single doc, spline_df=10: single-day corpus downgrades to intercept-only
    const auto d1 = build_design({meta_triplet(100, FactionLabel::Other, RelType::Causation, false)},
                                 10);
    CHECK(d1.X.rows() == 1);
    CHECK(d1.X.cols() == 6);
    REQUIRE_FALSE(d1.warnings.empty());

    // two days, spline active: P = 1 + 2 + 1 + 2 + 10 = 16
    const auto d2 = build_design({meta_triplet(100, FactionLabel::Brexiteer, RelType::Creation, true),
                                  meta_triplet(120, FactionLabel::Remainer, RelType::Destruction,
                                               false)},
                                 10);
    CHECK(d2.X.cols() == 16);
    CHECK(d2.X(0, 0) == 1.0);
    CHECK(d2.X(0, 1) == 1.0);  // Creation dummy
    CHECK(d2.X(1, 2) == 1.0);  // Destruction dummy
    CHECK(d2.X(0, 3) == 1.0);  // negation dummy
    CHECK(d2.X(0, 4) == 1.0);  // Brexiteer dummy
    CHECK(d2.X(1, 5) == 1.0);  // Remainer dummy
    // spline rows sum to one
    for (int i = 0; i < 2; ++i) {
        double s = 0;
        for (int j = 6; j < 16; ++j) s += d2.X(i, j);
        CHECK(s == Catch::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("build_design warns on constant covariate columns", "[prep]") {
    std::vector<RelationTriplet> meta;
    for (int i = 0; i < 5; ++i)
        meta.push_back(meta_triplet(100 + i, FactionLabel::Other, RelType::Causation, false));
    const auto d = build_design(meta, 4);
    bool warned = false;
    for (const auto& w : d.warnings)
        if (w.find("constant design column") != std::string::npos) warned = true;
    CHECK(warned);
}
