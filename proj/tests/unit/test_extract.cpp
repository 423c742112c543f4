#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "rhetorica/extract.hpp"
#include "rhetorica/parallel.hpp"
#include "rhetorica/rng.hpp"

using namespace rhetorica;

namespace {

const ExtractionPatternSet& pats() {
    static const ExtractionPatternSet p(default_lexicon());
    return p;
}

}  // namespace

TEST_CASE("segment_sentences splits on terminal punctuation", "[extract]") {
    const auto s1 = segment_sentences("No deal kills jobs. It is bad.");
    REQUIRE(s1.size() == 2);
    CHECK(s1[0].text == "No deal kills jobs.");
    CHECK(s1[0].index == 0);
    CHECK(s1[1].text == "It is bad.");
    CHECK(s1[1].index == 1);

    const auto s2 = segment_sentences("no deal?!");
    REQUIRE(s2.size() == 1);
    CHECK(s2[0].text == "no deal?!");

    CHECK(segment_sentences("").empty());

    const auto s3 = segment_sentences("first line\nsecond line");
    REQUIRE(s3.size() == 2);
}

TEST_CASE("active form with modal-adverb tail", "[extract]") {
    const auto r =
        extract_relations("A no-deal Brexit would certainly destroy UK's economy and labour market.",
                          pats());
    REQUIRE(r.size() == 1);
    CHECK(r[0].cause == "A no-deal Brexit");
    CHECK(r[0].rel_type == RelType::Destruction);
    CHECK_FALSE(r[0].negated);
    CHECK_FALSE(r[0].passive);
    CHECK(r[0].effect == "UK's economy and labour market");
}

TEST_CASE("passive form inverts the pair", "[extract]") {
    const auto r = extract_relations("Chaos will be caused by no deal", pats());
    REQUIRE(r.size() == 1);
    CHECK(r[0].cause == "no deal");
    CHECK(r[0].rel_type == RelType::Causation);
    CHECK(r[0].passive);
    CHECK(r[0].effect == "Chaos");
}

TEST_CASE("negated modal tail sets the flag and strips", "[extract]") {
    const auto r = extract_relations("No deal will not cause shortages", pats());
    REQUIRE(r.size() == 1);
    CHECK(r[0].cause == "No deal");
    CHECK(r[0].negated);
    CHECK(r[0].effect == "shortages");
}

TEST_CASE("end-of-sentence form reorders cause and effect", "[extract]") {
    const auto r = extract_relations("the chaos that no deal would trigger", pats());
    REQUIRE(r.size() == 1);
    CHECK(r[0].cause == "no deal");
    CHECK(r[0].end_form);
    CHECK_FALSE(r[0].passive);
    CHECK(r[0].effect == "the chaos");
}

TEST_CASE("sentences without operators yield nothing", "[extract]") {
    CHECK(extract_relations("I like tea", pats()).empty());
    CHECK(extract_relations("", pats()).empty());
}

TEST_CASE("coordination back-references the earlier cause", "[extract]") {
    const auto r =
        extract_relations("The no deal destroys the economy and kills the jobs.", pats());
    REQUIRE(r.size() == 2);
    CHECK(r[0].cause == "The no deal");
    CHECK(r[0].effect == "the economy");
    CHECK_FALSE(r[0].coref_resolved);
    CHECK(r[1].cause == "The no deal");
    CHECK(r[1].effect == "the jobs");
    CHECK(r[1].coref_resolved);
    CHECK(r[1].rel_type == RelType::Destruction);
}

TEST_CASE("trailing which re-routes the relative clause subject", "[extract]") {
    // commas block the end-of-sentence pattern, so the split path handles this
    const auto r =
        extract_relations("The agreement, which causes delays, triggers real anger", pats());
    REQUIRE(r.size() == 2);
    CHECK(r[0].cause == "The agreement");
    CHECK(r[0].effect == "delays");
    CHECK(r[1].cause == "The agreement");
    CHECK(r[1].effect == "real anger");
}

TEST_CASE("comma-free which clause is captured as an end form", "[extract]") {
    const auto r =
        extract_relations("The agreement which causes delays triggers real anger", pats());
    REQUIRE(r.size() == 1);
    CHECK(r[0].end_form);
    CHECK(r[0].effect == "The agreement");
}

TEST_CASE("is_nodeal_cause applies the trailing-token rule", "[extract]") {
    CHECK(is_nodeal_cause("Which means no deal"));
    CHECK_FALSE(is_nodeal_cause("no deal at the very last possible minute"));
    CHECK(is_nodeal_cause("No-Deal"));
    CHECK(is_nodeal_cause("no_deal then what"));
    CHECK(is_nodeal_cause("a hard no deal exit now honestly"));  // 3 trailing tokens
    CHECK_FALSE(is_nodeal_cause("a no deal one two three four"));
    CHECK(is_nodeal_cause("no deal!!!"));              // trailing punctuation ignored
    CHECK_FALSE(is_nodeal_cause("no deal!!!", true));  // strict mode counts it as a token...
    CHECK_FALSE(is_nodeal_cause("nodeal"));            // separator required
    CHECK_FALSE(is_nodeal_cause("deal or no"));
}

TEST_CASE("lexicon totality: every entry resolves to its own set", "[extract]") {
    const auto lex = default_lexicon();
    for (const RelType t : {RelType::Creation, RelType::Causation, RelType::Destruction}) {
        for (const auto& form : lex.set(t)) {
            const std::string carrier = "The blockade " + form + " severe hardship";
            const auto rels = extract_relations(carrier, pats());
            INFO("form: " << form);
            REQUIRE(rels.size() == 1);
            CHECK(rels[0].rel_type == t);
            CHECK(rels[0].operator_text == form);
            CHECK(rels[0].cause == "The blockade");
            CHECK(rels[0].effect == "severe hardship");
        }
    }
}

TEST_CASE("operator matching respects word-glue boundaries", "[extract]") {
    CHECK(extract_relations("The recreates project warms hearts", pats()).empty());
    CHECK(extract_relations("they re-create the scene quietly", pats()).empty());
    CHECK(extract_relations("the skillset killing_it matters", pats()).empty());
    // emoji breaks words, so the verb is matchable next to one
    const auto r = extract_relations("That stance 😡kills any hope here", pats());
    REQUIRE(r.size() == 1);
    CHECK(r[0].effect == "any hope here");
}

TEST_CASE("passive precedence at overlapping spans", "[extract]") {
    const auto r = extract_relations("the mess caused by the delay", pats());
    REQUIRE(r.size() == 1);
    CHECK(r[0].passive);
    CHECK(r[0].operator_text == "caused by");
    CHECK(r[0].cause == "the delay");
    CHECK(r[0].effect == "the mess");
}

TEST_CASE("reason of is a passive causation operator", "[extract]") {
    const auto r = extract_relations("all this chaos, reason of the blocked talks", pats());
    REQUIRE(r.size() == 1);
    CHECK(r[0].passive);
    CHECK(r[0].rel_type == RelType::Causation);
    CHECK(r[0].cause == "the blocked talks");
}

TEST_CASE("short segments drop their relation", "[extract]") {
    // effect side shorter than four characters
    CHECK(extract_relations("The embargo destroys it", pats()).empty());
    // empty cause side after stripping
    CHECK(extract_relations("will cause shortages", pats()).empty());
}

TEST_CASE("passive inversion property on generated carriers", "[extract]") {
    const auto lex = default_lexicon();
    // participle + " by" passive forms paired with the participle used actively
    std::vector<std::string> participles;
    for (const auto& p : lex.passive) {
        if (p.size() > 3 && p.substr(p.size() - 3) == " by") {
            const std::string stem = p.substr(0, p.size() - 3);
            if (phrase_contains_form(stem, stem)) participles.push_back(stem);
        }
    }
    REQUIRE(participles.size() >= 15);
    static const std::vector<std::string> subjects = {"The blockade", "A hard exit",
                                                      "This standoff", "The vote"};
    static const std::vector<std::string> objects = {"real shortages", "public anger",
                                                     "great uncertainty", "border delays"};
    Rng rng(99);
    for (int i = 0; i < 200; ++i) {
        const auto& part = participles[rng.uniform_below(participles.size())];
        const auto& x = subjects[rng.uniform_below(subjects.size())];
        const auto& y = objects[rng.uniform_below(objects.size())];
        // skip passive idioms that are not lexicon inflections
        const auto active = extract_relations(x + " " + part + " " + y, pats());
        if (active.empty()) continue;
        const auto passive = extract_relations(y + " was " + part + " by " + x, pats());
        INFO("participle: " << part);
        REQUIRE(active.size() == 1);
        REQUIRE(passive.size() == 1);
        CHECK(active[0].cause == passive[0].cause);
        CHECK(active[0].effect == passive[0].effect);
        CHECK(active[0].rel_type == passive[0].rel_type);
        CHECK(passive[0].passive);
    }
}

TEST_CASE("negation flip property on generated carriers", "[extract]") {
    const auto lex = default_lexicon();
    std::vector<std::string> forms = lex.active_forms();
    Rng rng(123);
    static const std::vector<std::string> subjects = {"The standoff", "No deal", "The delay"};
    static const std::vector<std::string> objects = {"food shortages", "price rises",
                                                     "deep uncertainty"};
    for (int i = 0; i < 300; ++i) {
        const auto& form = forms[rng.uniform_below(forms.size())];
        const auto& x = subjects[rng.uniform_below(subjects.size())];
        const auto& y = objects[rng.uniform_below(objects.size())];
        const auto plain = extract_relations(x + " " + form + " " + y, pats());
        const auto negated = extract_relations(x + " will not " + form + " " + y, pats());
        INFO("form: " << form);
        REQUIRE(plain.size() == 1);
        REQUIRE(negated.size() == 1);
        CHECK_FALSE(plain[0].negated);
        CHECK(negated[0].negated);
        CHECK(plain[0].cause == negated[0].cause);
        CHECK(plain[0].effect == negated[0].effect);
    }
}

TEST_CASE("count consistency: at most one triplet per operator hit", "[extract]") {
    const std::vector<std::string> sentences = {
        "No deal causes chaos and triggers panic while the ports jam",
        "The delay creates anger, the anger kills goodwill",
        "A mess caused by delays produces queues",
    };
    for (const auto& s : sentences) {
        const auto hits = pats().operators.find_all(s);
        const auto rels = extract_relations(s, pats());
        INFO(s);
        CHECK(rels.size() <= hits.size());
    }
}

TEST_CASE("extraction is deterministic across batch order and thread count", "[extract]") {
    std::vector<std::string> sentences;
    const auto lex = default_lexicon();
    for (const auto& f : lex.active_forms())
        sentences.push_back("The standoff " + f + " lasting damage downstream");
    auto run = [&](int threads) {
        set_thread_count(threads);
        std::vector<std::string> out(sentences.size());
        parallel_blocks(sentences.size(), 4, [&](std::size_t b0, std::size_t b1) {
            for (std::size_t i = b0; i < b1; ++i) {
                for (const auto& r : extract_relations(sentences[i], pats()))
                    out[i] += r.cause + "|" + r.effect + "|" + to_string(r.rel_type) + ";";
            }
        });
        set_thread_count(1);
        return out;
    };
    const auto a = run(1);
    const auto b = run(8);
    CHECK(a == b);
}

TEST_CASE("rel ids encode tweet, sentence and relation indices", "[extract]") {
    LabeledTweet t;
    t.rec.id = "42";
    t.rec.text = "No deal kills jobs. No deal creates queues and triggers anger.";
    t.faction = FactionLabel::Remainer;
    t.day = 18000;
    const auto rels = extract_from_tweet(t, pats());
    REQUIRE(rels.size() == 3);
    CHECK(rels[0].rel_id == "42.0.0");
    CHECK(rels[1].rel_id == "42.1.0");
    CHECK(rels[2].rel_id == "42.1.1");
    std::set<std::string> ids;
    for (const auto& r : rels) ids.insert(r.rel_id);
    CHECK(ids.size() == rels.size());
    CHECK(rels[0].faction == FactionLabel::Remainer);
}

TEST_CASE("pattern strings render for audit", "[extract]") {
    const auto& p = pats();
    CHECK(p.active_pattern_string().find("(?<![\\pL\\pM_-])(create)(?![\\pL\\pM_-])") !=
          std::string::npos);
    CHECK(p.passive_pattern_string().find("(caused by)") != std::string::npos);
    CHECK(p.end_form_pattern_string().find("(?<effect>") != std::string::npos);
    CHECK(p.nodeal_cause_pattern_string().find("{0,3}") != std::string::npos);
}

TEST_CASE("triplet JSONL round-trip", "[extract]") {
    RelationTriplet t;
    t.rel_id = "a.0.0";
    t.cause = "no deal";
    t.effect = "chaos, maybe";
    t.rel_type = RelType::Destruction;
    t.negated = true;
    t.passive = true;
    t.coref_resolved = false;
    t.end_form = false;
    t.faction = FactionLabel::Brexiteer;
    t.day = 18000;
    t.operator_text = "destroyed by";
    const auto j = triplet_to_json(t);
    const auto back = triplet_from_json(j);
    CHECK(back.rel_id == t.rel_id);
    CHECK(back.cause == t.cause);
    CHECK(back.effect == t.effect);
    CHECK(back.rel_type == t.rel_type);
    CHECK(back.negated == t.negated);
    CHECK(back.passive == t.passive);
    CHECK(back.faction == t.faction);
    CHECK(back.day == t.day);
}
