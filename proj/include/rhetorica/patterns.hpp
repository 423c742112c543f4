#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "rhetorica/lexicon.hpp"
#include "rhetorica/text.hpp"

namespace rhetorica {

// ---- operator matching ------------------------------------------------------

struct OperatorHit {
    std::size_t begin = 0;
    std::size_t end = 0;
    bool passive = false;
    RelType type = RelType::Causation;
    std::string form;  // lowercase surface form that matched
};

namespace detail {

// Case-insensitive literal match of `form` at byte `pos`; a single space in
// the form matches exactly one space in the text.
inline bool form_at(std::string_view s, std::size_t pos, std::string_view form) {
    if (pos + form.size() > s.size()) return false;
    for (std::size_t i = 0; i < form.size(); ++i)
        if (text::ascii_lower(s[pos + i]) != form[i]) return false;
    return true;
}

}  // namespace detail

// Finds operator phrases with the letter/mark/underscore/hyphen boundary
// guards. Passive forms are tried before active ones at each position, which
// gives them precedence on overlapping spans ("caused by" beats "caused");
// scanning is leftmost and non-overlapping.
class OperatorMatcher {
public:
    OperatorMatcher() = default;

    OperatorMatcher(const VerbLexicon& lex) {
        for (const auto& f : lex.passive)
            forms_.push_back({f, true, resolve_rel_type(lex, f)});
        for (RelType t : {RelType::Creation, RelType::Destruction, RelType::Causation})
            for (const auto& f : lex.set(t)) forms_.push_back({f, false, t});
    }

    std::vector<OperatorHit> find_all(std::string_view s) const {
        std::vector<OperatorHit> hits;
        std::size_t pos = 0;
        while (pos < s.size()) {
            if (text::glue_before(s, pos)) { ++pos; continue; }
            bool advanced = false;
            for (const auto& f : forms_) {
                if (!detail::form_at(s, pos, f.form)) continue;
                const std::size_t end = pos + f.form.size();
                if (text::glue_at(s, end)) continue;
                hits.push_back({pos, end, f.passive, f.type, f.form});
                pos = end;
                advanced = true;
                break;
            }
            if (!advanced) ++pos;
        }
        return hits;
    }

    bool any(std::string_view s) const {
        std::size_t pos = 0;
        while (pos < s.size()) {
            if (!text::glue_before(s, pos)) {
                for (const auto& f : forms_) {
                    if (detail::form_at(s, pos, f.form) && !text::glue_at(s, pos + f.form.size()))
                        return true;
                }
            }
            ++pos;
        }
        return false;
    }

private:
    struct Entry {
        std::string form;
        bool passive;
        RelType type;
    };
    std::vector<Entry> forms_;
};

// ---- trailing modal / negated-modal stripping -------------------------------

struct TailStripResult {
    std::string_view remaining;
    bool negated = false;
};

namespace detail {

inline const std::set<std::string, std::less<>>& modal_bare() {
    static const std::set<std::string, std::less<>> s = {
        "have", "had",   "has",  "is",    "are",   "am",   "was",  "were",
        "will", "could", "would", "should", "may",  "can",  "might", "must",
        "shall", "be",   "been", "being"};
    return s;
}

inline const std::set<std::string, std::less<>>& negator_bare() {
    static const std::set<std::string, std::less<>> s = {
        "not",     "cannot",  "won't",    "wont",     "wouldn't", "shan't",
        "shouldn't", "couldn't", "can't", "mustn't",  "haven't",  "hasn't",
        "hadn't",  "isn't",   "aren't",   "wasn't",   "weren't",  "doesn't",
        "don't",   "dont",    "did't",    "didn't"};
    return s;
}

// Chain auxiliaries that are only strippable once the chain is open
// ("do not have to", "having to", "ought to").
inline const std::set<std::string, std::less<>>& chain_aux() {
    static const std::set<std::string, std::less<>> s = {"do", "does", "did", "having", "ought"};
    return s;
}

inline bool ends_with(std::string_view w, std::string_view suf) {
    return w.size() >= suf.size() && w.substr(w.size() - suf.size()) == suf;
}

}  // namespace detail

// Strips the trailing auxiliary verb phrase from a segment: negated modals
// (recording negation), bare modals and "be" auxiliaries, have-to chains, and
// a single -ly adverb sitting inside the modal chain ("would certainly").
// This is the guarded-tail equivalent of the source stripping pass; when
// allow_negators is false only the modal chain is removed.
inline TailStripResult strip_verb_tail(std::string_view segment, bool allow_negators) {
    const auto words = text::split_words(segment);
    std::size_t idx = words.size();
    bool negated = false;
    bool chain_open = false;
    while (idx > 0) {
        const auto span = words[idx - 1];
        const std::string w = text::to_lower(segment.substr(span.begin, span.end - span.begin));
        if (allow_negators && detail::negator_bare().count(w)) {
            --idx;
            negated = true;
            chain_open = true;
            continue;
        }
        if (allow_negators && w == "than" && idx >= 2) {
            const auto prev = words[idx - 2];
            if (text::iequals(segment.substr(prev.begin, prev.end - prev.begin), "other")) {
                idx -= 2;
                negated = true;
                chain_open = true;
                continue;
            }
        }
        if (detail::modal_bare().count(w)) {
            --idx;
            chain_open = true;
            continue;
        }
        if (w == "to" && idx >= 2) {
            const auto prev = words[idx - 2];
            const std::string pw = text::to_lower(segment.substr(prev.begin, prev.end - prev.begin));
            if (pw == "have" || pw == "has" || pw == "had" || pw == "having" || pw == "ought" ||
                pw == "not") {
                --idx;
                chain_open = true;
                continue;
            }
        }
        if (chain_open && detail::chain_aux().count(w)) {
            --idx;
            continue;
        }
        if (w.size() >= 4 && text::all_ascii_alpha(w) && detail::ends_with(w, "ly") && idx >= 2) {
            const auto prev = words[idx - 2];
            const std::string pw = text::to_lower(segment.substr(prev.begin, prev.end - prev.begin));
            if (detail::modal_bare().count(pw)) {
                --idx;
                chain_open = true;
                continue;
            }
        }
        break;
    }
    std::string_view rem =
        idx == 0 ? std::string_view{} : segment.substr(0, words[idx - 1].end);
    while (!rem.empty() && text::is_ascii_space(rem.back())) rem.remove_suffix(1);
    return {rem, negated};
}

// ---- trailing coordination markers ("and", "but also", ...) -----------------

struct CoordStripResult {
    std::string_view remaining;
    bool matched = false;
};

namespace detail {

inline const std::vector<std::string>& simple_markers() {
    // longest-first so the greedier phrase wins
    static const std::vector<std::string> m = {
        "at the same time", "as well as", "simultaneously", "concurrently",
        "and also",         "but also",   "meanwhile",      "jointly",
        "while",            "also",       "and",            "but"};
    return m;
}

inline const std::vector<std::string>& composite_tails() {
    static const std::vector<std::string> m = {"at the same time", "simultaneously",
                                               "concurrently",     "jointly", "meanwhile"};
    return m;
}

inline bool is_punct_space(char c) {
    return text::is_ascii_space(c) || text::is_ascii_punct(c);
}

// Tries to match one coordination marker ending exactly at `end`; returns its
// begin offset. Composites are "and|but" + punct/space run + tail.
inline std::optional<std::size_t> marker_ending_at(std::string_view s, std::size_t end) {
    auto tail_matches = [&](std::string_view phrase) -> std::optional<std::size_t> {
        if (phrase.size() > end) return std::nullopt;
        const std::size_t b = end - phrase.size();
        for (std::size_t i = 0; i < phrase.size(); ++i)
            if (text::ascii_lower(s[b + i]) != phrase[i]) return std::nullopt;
        return b;
    };
    for (const auto& tail : composite_tails()) {
        auto b = tail_matches(tail);
        if (!b) continue;
        std::size_t p = *b;
        if (p == 0 || !is_punct_space(s[p - 1])) continue;
        while (p > 0 && is_punct_space(s[p - 1])) --p;
        for (std::string_view head : {"and", "but"}) {
            if (p >= head.size()) {
                bool ok = true;
                for (std::size_t i = 0; i < head.size(); ++i)
                    if (text::ascii_lower(s[p - head.size() + i]) != head[i]) { ok = false; break; }
                if (ok) return p - head.size();
            }
        }
    }
    for (const auto& m : simple_markers()) {
        auto b = tail_matches(m);
        if (b) return *b;
    }
    return std::nullopt;
}

}  // namespace detail

// Detects (and strips) the trailing coordination construct: one or more
// markers, an optional dangling pronoun, surrounding punctuation/space, all
// preceded by at least one punctuation/space character.
inline CoordStripResult strip_coordination_tail(std::string_view segment) {
    std::size_t e = segment.size();
    while (e > 0 && detail::is_punct_space(segment[e - 1])) --e;
    // optional dangling pronoun
    static const std::vector<std::string> pronouns = {"i", "you", "he", "she", "it", "we", "they"};
    std::size_t e_markers = e;
    {
        std::size_t wb = e;
        while (wb > 0 && !text::is_ascii_space(segment[wb - 1]) &&
               !text::is_ascii_punct(segment[wb - 1]))
            --wb;
        const std::string w = text::to_lower(segment.substr(wb, e - wb));
        for (const auto& p : pronouns) {
            if (w == p) {
                std::size_t e2 = wb;
                while (e2 > 0 && detail::is_punct_space(segment[e2 - 1])) --e2;
                e_markers = e2;
                break;
            }
        }
    }
    auto try_run = [&](std::size_t run_end) -> std::optional<std::size_t> {
        std::size_t cursor = run_end;
        bool any = false;
        while (true) {
            auto b = detail::marker_ending_at(segment, cursor);
            if (!b) break;
            cursor = *b;
            any = true;
        }
        if (!any) return std::nullopt;
        if (cursor == 0 || !detail::is_punct_space(segment[cursor - 1])) return std::nullopt;
        while (cursor > 0 && detail::is_punct_space(segment[cursor - 1])) --cursor;
        return cursor;
    };
    // a marker run may end either before the pronoun or at the plain tail
    for (std::size_t cand : {e_markers, e}) {
        if (auto begin = try_run(cand)) return {segment.substr(0, *begin), true};
    }
    return {segment, false};
}

// Trailing "which" flag and "which|that" strip (no word boundary, mirroring
// the source pattern).
struct WhichStripResult {
    std::string_view remaining;
    bool which = false;
};

inline WhichStripResult strip_which_that(std::string_view segment) {
    std::string_view s = segment;
    std::size_t e = s.size();
    while (e > 0 && text::is_ascii_space(s[e - 1])) --e;
    WhichStripResult out{segment, false};
    auto ends_ci = [&](std::string_view suf) {
        if (e < suf.size()) return false;
        for (std::size_t i = 0; i < suf.size(); ++i)
            if (text::ascii_lower(s[e - suf.size() + i]) != suf[i]) return false;
        return true;
    };
    if (ends_ci("which")) {
        out.which = true;
        out.remaining = s.substr(0, e - 5);
    } else if (ends_ci("that")) {
        out.remaining = s.substr(0, e - 4);
    }
    return out;
}

// ---- end-of-sentence form ----------------------------------------------------

// "EFFECT that|which CAUSE VERB [effect tail]" with greedy group semantics:
// leftmost start, longest effect, then longest cause; the operator alternation
// is unguarded, as in the source pattern.
struct EndFormGroups {
    std::string effect;      // effect group + effect_end tail
    std::string cause;
    std::string op;          // matched operator form (lowercase)
    RelType type = RelType::Causation;
};

class EndFormMatcher {
public:
    EndFormMatcher() = default;

    explicit EndFormMatcher(const VerbLexicon& lex) : lex_(&lex) {
        forms_ = lex.active_forms();
    }

    static bool clause_punct(char c) { return c == ':' || c == ';' || c == ',' || c == '!'; }

    std::optional<EndFormGroups> match(std::string_view s) const {
        static const std::vector<std::string> connectors = {" that ", " which ", ",which "};
        for (std::size_t start = 0; start < s.size(); ++start) {
            if (clause_punct(s[start])) continue;
            std::size_t run_end = start;
            while (run_end < s.size() && !clause_punct(s[run_end])) ++run_end;
            const std::size_t max_elen = run_end - start;
            if (max_elen < 2) continue;
            for (std::size_t elen = max_elen; elen >= 2; --elen) {
                const std::size_t cpos = start + elen;
                for (const auto& conn : connectors) {
                    if (!detail::form_at(s, cpos, conn)) continue;
                    const std::size_t ppos = cpos + conn.size();
                    std::size_t cause_run = ppos;
                    while (cause_run < s.size() && !clause_punct(s[cause_run])) ++cause_run;
                    if (cause_run - ppos < 2) continue;
                    // longest cause first: scan operator start positions from the right
                    for (std::size_t qpos = cause_run; qpos >= ppos + 2; --qpos) {
                        for (const auto& f : forms_) {
                            if (!detail::form_at(s, qpos, f)) continue;
                            EndFormGroups g;
                            g.effect = std::string(s.substr(start, elen));
                            g.cause = std::string(s.substr(ppos, qpos - ppos));
                            g.op = f;
                            g.type = resolve_rel_type(*lex_, f);
                            g.effect += std::string(effect_tail(s, qpos + f.size()));
                            return g;
                        }
                        if (qpos == ppos + 2) break;
                    }
                }
            }
        }
        return std::nullopt;
    }

    bool contains(std::string_view s) const { return match(s).has_value(); }

    // Weaker containment used by the clause carving lookahead: a connector
    // followed (anywhere later) by an operator form substring.
    bool connector_then_verb(std::string_view s) const {
        static const std::vector<std::string> connectors = {" that ", " which ", ",which "};
        for (std::size_t i = 0; i < s.size(); ++i) {
            for (const auto& conn : connectors) {
                if (!detail::form_at(s, i, conn)) continue;
                for (std::size_t j = i + conn.size(); j < s.size(); ++j)
                    for (const auto& f : forms_)
                        if (detail::form_at(s, j, f)) return true;
            }
        }
        return false;
    }

private:
    // " in ...", " on ...", etc. appended to the effect; greedy single pass.
    static std::string_view effect_tail(std::string_view s, std::size_t pos) {
        static const std::vector<std::string> preps = {
            " in ",     " on ",       " since ", " at ",        " during ", " to ",
            " for ",    " while ",    " throughout ",           " all-over ",
            " all over ", " inside ", " outside ",              " everywhere "};
        const std::size_t begin = pos;
        while (true) {
            bool advanced = false;
            for (const auto& p : preps) {
                if (!detail::form_at(s, pos, p)) continue;
                std::size_t q = pos + p.size();
                std::size_t run = q;
                while (run < s.size() && !clause_punct(s[run])) ++run;
                if (run - q < 2) continue;
                pos = run;
                advanced = true;
                break;
            }
            if (!advanced) break;
        }
        return s.substr(begin, pos - begin);
    }

    const VerbLexicon* lex_ = nullptr;
    std::vector<std::string> forms_;
};

// ---- no-deal cause test ------------------------------------------------------

// "no deal" / "no-deal" / "no_deal" with at most three word tokens between it
// and the end of the cause string. Default mode ignores a trailing
// punctuation/space run; strict mode counts any non-space run as a token.
inline bool is_nodeal_cause(std::string_view cause, bool count_punct_tokens = false) {
    auto ci = [](char a, char b) { return text::ascii_lower(a) == b; };
    for (std::size_t i = 0; i + 7 <= cause.size(); ++i) {
        if (!(ci(cause[i], 'n') && ci(cause[i + 1], 'o'))) continue;
        const char sep = cause[i + 2];
        if (!(sep == '-' || sep == '_' || text::is_ascii_space(sep))) continue;
        if (!(ci(cause[i + 3], 'd') && ci(cause[i + 4], 'e') && ci(cause[i + 5], 'a') &&
              ci(cause[i + 6], 'l')))
            continue;
        std::size_t p = i + 7;
        if (p < cause.size() &&
            (cause[p] == '"' || cause[p] == '\'' || cause[p] == '?' || cause[p] == '>'))
            ++p;
        // positions after consuming 0..3 trailing tokens (maximal munch)
        std::vector<std::size_t> stops = {p};
        {
            std::size_t q = p;
            while (stops.size() <= 3) {
                std::size_t r = q;
                while (r < cause.size() && text::is_ascii_space(cause[r])) ++r;
                if (r == q || r >= cause.size()) break;
                std::size_t e = r;
                if (count_punct_tokens) {
                    while (e < cause.size() && !text::is_ascii_space(cause[e])) ++e;
                } else {
                    while (e < cause.size() &&
                           ((cause[e] >= 'A' && cause[e] <= 'Z') ||
                            (cause[e] >= 'a' && cause[e] <= 'z') || cause[e] == '_'))
                        ++e;
                }
                if (e == r) break;
                stops.push_back(e);
                q = e;
            }
        }
        for (auto it = stops.rbegin(); it != stops.rend(); ++it) {
            std::size_t r = *it;
            while (r < cause.size() &&
                   (text::is_ascii_space(cause[r]) ||
                    (!count_punct_tokens && text::is_ascii_punct(cause[r]))))
                ++r;
            if (r >= cause.size()) return true;
        }
    }
    return false;
}

// ---- compiled set ------------------------------------------------------------

// The full compiled pattern machinery for one lexicon, plus the regex strings
// rendered for audit via `--dump-patterns`.
struct ExtractionPatternSet {
    VerbLexicon lexicon;
    OperatorMatcher operators;
    EndFormMatcher end_form;

    explicit ExtractionPatternSet(VerbLexicon lex)
        : lexicon(std::move(lex)), operators(lexicon), end_form(lexicon) {}

    static std::string guarded_alternation(const std::vector<std::string>& forms) {
        std::string out;
        for (std::size_t i = 0; i < forms.size(); ++i) {
            if (i) out += '|';
            out += "(?<![\\pL\\pM_-])(" + forms[i] + ")(?![\\pL\\pM_-])";
        }
        return out;
    }

    static std::string plain_alternation(const std::vector<std::string>& forms) {
        std::string out;
        for (std::size_t i = 0; i < forms.size(); ++i) {
            if (i) out += '|';
            out += forms[i];
        }
        return out;
    }

    std::string active_pattern_string() const {
        return guarded_alternation(lexicon.active_forms());
    }
    std::string passive_pattern_string() const { return guarded_alternation(lexicon.passive); }
    std::string all_at_end_string() const { return plain_alternation(lexicon.active_forms()); }
    std::string end_form_pattern_string() const {
        return "(?<effect>[^:;,!]{2,})(?<connector> that | which |[,]{1}which ){1}(?<cause>[^:;,!]"
               "{2,})(?<rel_operator>" +
               all_at_end_string() +
               "){1}(?<effect_end> in [^:;,!]{2,}| on [^:;,!]{2,}| since [^:;,!]{2,}| at "
               "[^:;,!]{2,}| during [^:;,!]{2,}| to [^:;,!]{2,}| for [^:;,!]{2,}| while "
               "[^:;,!]{2,}| throughout [^:;,!]{2,}| all-over [^:;,!]{2,}| all over [^:;,!]{2,}| "
               "inside [^:;,!]{2,}| outside [^:;,!]{2,}| everywhere [^:;,!]{2,}){0,}[[:punct:]]{0,}";
    }
    std::string nodeal_cause_pattern_string() const {
        return "([Nn]{1}[Oo]{1}[-_[:space:]]{1}[Dd]{1}[Ee]{1}[Aa]{1}[lL]{1}){1}[\"'?>]{0,1}([[:"
               "space:]]+[A-Za-z_]+){0,3}[[:space:][:punct:]]{0,}$";
    }
    std::string and_pattern_string() const {
        return "([[:punct:][:space:]]){1,}(and also|but also|also|while|as well "
               "as|but([[:punct:][:space:]]){1,}meanwhile|and([[:punct:][:space:]]){1,}meanwhile|"
               "meanwhile|but([[:punct:][:space:]]){1,}at the same time|and([[:punct:][:space:]])"
               "{1,}at the same time|at the same time|and([[:punct:][:space:]]){1,}simultaneously|"
               "but([[:punct:][:space:]]){1,}simultaneously|simultaneously|and([[:punct:][:space:]"
               "]){1,}concurrently|but([[:punct:][:space:]]){1,}concurrently|concurrently|and([[:"
               "punct:][:space:]]){1,}jointly|but([[:punct:][:space:]]){1,}jointly|jointly|but|and"
               "){1,}([[:punct:][:space:]]){0,}(I|you|he|she|it|we|you|they){0,}([[:punct:][:space"
               ":]]){0,}$";
    }
};

}  // namespace rhetorica
