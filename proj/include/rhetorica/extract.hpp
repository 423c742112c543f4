#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rhetorica/ingest.hpp"
#include "rhetorica/lexicon.hpp"
#include "rhetorica/patterns.hpp"
#include "rhetorica/text.hpp"

namespace rhetorica {

struct RelationTriplet {
    std::string rel_id;       // tweet id + "." + sentence index + "." + relation index
    std::string cause;
    std::string effect;
    RelType rel_type = RelType::Causation;
    bool negated = false;
    bool passive = false;
    bool coref_resolved = false;
    bool end_form = false;
    FactionLabel faction = FactionLabel::Other;
    std::int64_t day = 0;
    std::string operator_text;
};

// ---- sentence segmentation ---------------------------------------------------

struct Sentence {
    std::string text;
    std::size_t index = 0;
};

// Splits on terminal punctuation runs ([.!?]+) and newlines; the punctuation
// cluster stays attached to its sentence.
inline std::vector<Sentence> segment_sentences(std::string_view t) {
    std::vector<Sentence> out;
    std::size_t begin = 0, i = 0;
    auto flush = [&](std::size_t end) {
        const auto piece = text::trim_ws(t.substr(begin, end - begin));
        if (!piece.empty()) out.push_back({std::string(piece), out.size()});
    };
    while (i < t.size()) {
        const char c = t[i];
        if (c == '.' || c == '!' || c == '?') {
            std::size_t j = i;
            while (j < t.size() && (t[j] == '.' || t[j] == '!' || t[j] == '?')) ++j;
            flush(j);
            begin = j;
            i = j;
        } else if (c == '\n') {
            flush(i);
            begin = i + 1;
            ++i;
        } else {
            ++i;
        }
    }
    flush(t.size());
    return out;
}

// ---- relation extraction -------------------------------------------------------

namespace detail {

inline bool clause_punct_cs(char c) {
    return c == ',' || c == ':' || c == '!' || c == '?' || c == ';';
}

// Leading clause carve before end-form matching: drop the longest prefix
// "clause chars + (punct space)+ ..." whose remainder still contains a
// connector followed by an operator form.
inline std::string carve_leading_clause(const std::string& s, const EndFormMatcher& ef) {
    std::size_t best = 0;
    std::size_t i = 0;
    // candidate cuts sit after a (clause punct, space) pair run
    while (i + 1 < s.size()) {
        if (clause_punct_cs(s[i]) && text::is_ascii_space(s[i + 1])) {
            std::size_t j = i;
            // extend over a pair run
            while (j + 1 < s.size() && clause_punct_cs(s[j]) && text::is_ascii_space(s[j + 1]))
                j += 2;
            if (j > s.size()) j = s.size();
            // prefix before the punct must be clause-free and non-empty
            bool clean = i > 0;
            for (std::size_t k = 0; k < i && clean; ++k)
                if (clause_punct_cs(s[k])) clean = false;
            if (clean && j < s.size() && ef.connector_then_verb(std::string_view(s).substr(j)))
                best = std::max(best, j);
            i = j;
        } else {
            ++i;
        }
    }
    return best > 0 ? s.substr(best) : s;
}

// Trailing clause prune after the end form: remove the last "(punct space)+
// tail" when a connector+verb occurs before it and the tail itself is
// clause-punct free.
inline std::string prune_trailing_clause(const std::string& s, const EndFormMatcher& ef) {
    if (s.empty()) return s;
    // find last clause punct followed by a space
    std::size_t pos = std::string::npos;
    for (std::size_t i = 0; i + 1 < s.size(); ++i)
        if (clause_punct_cs(s[i]) && text::is_ascii_space(s[i + 1])) pos = i;
    if (pos == std::string::npos) return s;
    // the tail after the pair run must be clause-free and non-empty
    std::size_t j = pos;
    while (j + 1 < s.size() && clause_punct_cs(s[j]) && text::is_ascii_space(s[j + 1])) j += 2;
    if (j >= s.size()) return s;
    for (std::size_t k = j; k < s.size(); ++k)
        if (clause_punct_cs(s[k])) return s;
    if (!ef.connector_then_verb(std::string_view(s).substr(0, pos))) return s;
    return s.substr(0, pos);
}

// Fragment split after [;:,?!.] (lookbehind split, delimiter stays left).
inline std::vector<std::string> split_fragments(const std::string& s) {
    std::vector<std::string> out;
    std::size_t begin = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (c == ';' || c == ':' || c == ',' || c == '?' || c == '!' || c == '.') {
            out.push_back(s.substr(begin, i + 1 - begin));
            begin = i + 1;
        }
    }
    if (begin < s.size()) out.push_back(s.substr(begin));
    return out;
}

// Strips trailing negator phrases from the end-form effect side, mirroring the
// source's effect cleanup; returns whether one was found.
inline bool strip_effect_negators(std::string& effect) {
    const auto res = strip_verb_tail(effect, /*allow_negators=*/true);
    // only the negated-modal part counts here; a bare modal tail on the effect
    // is left in place unless a negator was present
    if (!res.negated) return false;
    effect = std::string(res.remaining);
    return true;
}

}  // namespace detail

// Extracts relation triplets from one sentence. Faction/day/rel_id are filled
// by the caller.
inline std::vector<RelationTriplet> extract_relations(const std::string& sentence,
                                                      const ExtractionPatternSet& pats) {
    std::vector<RelationTriplet> out;
    if (!pats.operators.any(sentence)) return out;

    std::string working = sentence;
    std::vector<RelationTriplet> end_form_rels;

    if (auto groups = pats.end_form.match(working)) {
        std::string carved = detail::carve_leading_clause(working, pats.end_form);
        carved = detail::prune_trailing_clause(carved, pats.end_form);
        if (auto g = pats.end_form.match(carved)) {
            RelationTriplet rel;
            rel.end_form = true;
            rel.passive = false;
            rel.coref_resolved = false;
            rel.rel_type = g->type;
            rel.operator_text = g->op;
            std::string effect = g->effect;
            rel.negated = detail::strip_effect_negators(effect);
            rel.effect = std::string(text::trim_punct_space(effect));
            const auto cause = strip_verb_tail(text::trim_ws(g->cause), /*allow_negators=*/false);
            rel.cause = std::string(text::trim_punct_space(cause.remaining));
            if (rel.cause.size() >= 4 && rel.effect.size() >= 4) end_form_rels.push_back(rel);
        }
        // prune the end-form fragment before the split pass
        const auto fragments = detail::split_fragments(working);
        std::string rest;
        std::size_t kept = 0;
        for (const auto& frag : fragments) {
            if (!pats.end_form.contains(frag)) {
                rest += frag;
                ++kept;
            }
        }
        working = (fragments.size() > 1 && kept >= 1) ? rest : std::string();
    }

    // normal (active/passive) pass requires some clause content left
    bool has_content = false;
    {
        std::size_t run = 0;
        for (char c : working) {
            if (c == ':' || c == ';' || c == ',' || c == '!') run = 0;
            else if (++run >= 4) { has_content = true; break; }
        }
    }

    out = std::move(end_form_rels);
    if (!has_content) return out;

    const auto ops = pats.operators.find_all(working);
    if (ops.empty()) return out;

    // segments between operator spans
    const std::size_t n = ops.size();
    struct Segment {
        std::string text;
        bool negated = false;
        bool and_flag = false;
        bool which_flag = false;
    };
    std::vector<Segment> segs(n + 1);
    {
        std::size_t prev = 0;
        for (std::size_t i = 0; i < n; ++i) {
            segs[i].text = working.substr(prev, ops[i].begin - prev);
            prev = ops[i].end;
        }
        segs[n].text = working.substr(prev);
    }
    for (auto& seg : segs) {
        std::string_view v = text::trim_punct_space(seg.text);
        const auto tail = strip_verb_tail(v, /*allow_negators=*/true);
        seg.negated = tail.negated;
        v = tail.remaining;
        const auto coord = strip_coordination_tail(v);
        seg.and_flag = coord.matched;
        v = coord.remaining;
        const auto wh = strip_which_that(v);
        seg.which_flag = wh.which;
        v = wh.remaining;
        seg.text = std::string(text::trim_punct_space(v));
    }

    for (std::size_t r = 0; r < n; ++r) {
        std::size_t cause_idx = r, effect_idx = r + 1;
        bool resolved = true;
        if (!ops[r].passive) {
            if (r == 1 && (segs[1].and_flag || segs[0].which_flag)) {
                cause_idx = 0;
                effect_idx = 2;
            } else if (r >= 2 && (segs[r].and_flag || segs[r - 1].which_flag)) {
                resolved = false;
                for (std::size_t i = r; i-- > 0;) {
                    if (!segs[i].and_flag && !segs[i].which_flag) {
                        cause_idx = i;
                        effect_idx = r + 1;
                        resolved = true;
                        break;
                    }
                }
            }
        } else {
            if (r == 1 && (segs[1].and_flag || segs[0].which_flag)) {
                effect_idx = 0;
                cause_idx = 2;
            } else if (r >= 2 && segs[r - 1].which_flag) {
                resolved = false;
                for (std::size_t i = r; i-- > 0;) {
                    if (!segs[i].which_flag) {
                        effect_idx = i;
                        cause_idx = r + 1;
                        resolved = true;
                        break;
                    }
                }
            } else {
                effect_idx = r;
                cause_idx = r + 1;
            }
        }
        if (!resolved) continue;

        RelationTriplet rel;
        rel.cause = segs[cause_idx].text;
        rel.effect = segs[effect_idx].text;
        rel.negated = segs[r].negated;
        rel.passive = ops[r].passive;
        rel.coref_resolved = segs[r].and_flag || segs[r].which_flag;
        rel.rel_type = ops[r].type;
        rel.operator_text = ops[r].form;
        if (rel.cause.size() < 4 || rel.effect.size() < 4) continue;  // content guard
        out.push_back(rel);
    }
    return out;
}

// Extracts all relations from a labeled tweet, assigning rel_ids.
inline std::vector<RelationTriplet> extract_from_tweet(const LabeledTweet& tweet,
                                                       const ExtractionPatternSet& pats) {
    std::vector<RelationTriplet> out;
    for (const auto& sent : segment_sentences(tweet.rec.text)) {
        auto rels = extract_relations(sent.text, pats);
        for (std::size_t r = 0; r < rels.size(); ++r) {
            rels[r].rel_id = tweet.rec.id + "." + std::to_string(sent.index) + "." +
                             std::to_string(r);
            rels[r].faction = tweet.faction;
            rels[r].day = tweet.day;
            out.push_back(std::move(rels[r]));
        }
    }
    return out;
}

// ---- JSONL serialization -------------------------------------------------------

inline nlohmann::json triplet_to_json(const RelationTriplet& t) {
    return {{"rel_id", t.rel_id},
            {"cause", t.cause},
            {"effect", t.effect},
            {"rel_type", to_string(t.rel_type)},
            {"negated", t.negated},
            {"passive", t.passive},
            {"coref_resolved", t.coref_resolved},
            {"end_form", t.end_form},
            {"faction", to_string(t.faction)},
            {"day", day_to_iso(t.day)},
            {"operator_text", t.operator_text}};
}

inline RelationTriplet triplet_from_json(const nlohmann::json& j) {
    RelationTriplet t;
    t.rel_id = j.at("rel_id").get<std::string>();
    t.cause = j.at("cause").get<std::string>();
    t.effect = j.at("effect").get<std::string>();
    t.rel_type = reltype_from_string(j.at("rel_type").get<std::string>());
    t.negated = j.at("negated").get<bool>();
    t.passive = j.at("passive").get<bool>();
    t.coref_resolved = j.at("coref_resolved").get<bool>();
    t.end_form = j.at("end_form").get<bool>();
    t.faction = faction_from_string(j.at("faction").get<std::string>());
    t.day = day_from_iso(j.at("day").get<std::string>());
    t.operator_text = j.at("operator_text").get<std::string>();
    return t;
}

inline std::vector<RelationTriplet> load_relations(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open relations file: " + path);
    std::vector<RelationTriplet> out;
    std::string line;
    while (std::getline(in, line)) {
        if (text::trim_ws(line).empty()) continue;
        out.push_back(triplet_from_json(nlohmann::json::parse(line)));
    }
    return out;
}

struct ExtractReport {
    std::int64_t tweets = 0;
    std::int64_t relations = 0;
    std::int64_t nodeal_relations = 0;
};

// Runs the extract stage over an ingest-labeled JSONL file.
inline ExtractReport run_extract(const std::string& input, const std::string& output,
                                 const ExtractionPatternSet& pats, bool nodeal_only) {
    std::ifstream in(input, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open input file: " + input);
    std::ofstream out(output, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + output);
    ExtractReport report;
    std::string line;
    while (std::getline(in, line)) {
        if (text::trim_ws(line).empty()) continue;
        const auto j = nlohmann::json::parse(line);
        LabeledTweet t;
        t.rec.id = j.at("id").get<std::string>();
        t.rec.text = j.at("text").get<std::string>();
        t.faction = faction_from_string(j.at("faction").get<std::string>());
        t.day = day_from_iso(j.at("day").get<std::string>());
        ++report.tweets;
        for (const auto& rel : extract_from_tweet(t, pats)) {
            ++report.relations;
            const bool nodeal = is_nodeal_cause(rel.cause);
            if (nodeal) ++report.nodeal_relations;
            if (nodeal_only && !nodeal) continue;
            out << triplet_to_json(rel).dump() << '\n';
        }
    }
    return report;
}

}  // namespace rhetorica
