#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rhetorica/text.hpp"

namespace rhetorica {

enum class RelType { Creation, Causation, Destruction };

inline const char* to_string(RelType t) {
    switch (t) {
        case RelType::Creation: return "Creation";
        case RelType::Causation: return "Causation";
        default: return "Destruction";
    }
}

inline RelType reltype_from_string(std::string_view s) {
    if (s == "Creation") return RelType::Creation;
    if (s == "Causation") return RelType::Causation;
    if (s == "Destruction") return RelType::Destruction;
    throw std::runtime_error("unknown relation type: " + std::string(s));
}

// Verb surface forms per relation type (all inflections, lowercase, multi-word
// allowed), plus the passive operator phrases. Vectors keep declaration order
// because pattern alternation order follows it.
struct VerbLexicon {
    std::vector<std::string> creation;
    std::vector<std::string> causation;
    std::vector<std::string> destruction;
    std::vector<std::string> passive;

    const std::vector<std::string>& set(RelType t) const {
        switch (t) {
            case RelType::Creation: return creation;
            case RelType::Causation: return causation;
            default: return destruction;
        }
    }

    // Active forms in canonical alternation order: Creation, Destruction,
    // Causation.
    std::vector<std::string> active_forms() const {
        std::vector<std::string> out;
        out.reserve(creation.size() + destruction.size() + causation.size());
        out.insert(out.end(), creation.begin(), creation.end());
        out.insert(out.end(), destruction.begin(), destruction.end());
        out.insert(out.end(), causation.begin(), causation.end());
        return out;
    }
};

inline VerbLexicon default_lexicon() {
    VerbLexicon lex;
    lex.creation = {
        "create",    "creates",    "creating",    "created",
        "produce",   "produces",   "producing",   "produced",
        "originate", "originates", "originating", "originated",
        "generate",  "generates",  "generated",   "generating",
        "make",      "makes",      "making",      "made"};
    lex.destruction = {
        "destroy",    "destroys",    "destroyed",    "destroying",
        "demolish",   "demolishes",  "demolished",   "demolishing",
        "annihilate", "annihilates", "annihilated",  "annihilating",
        "obliterate", "obliterates", "obliterated",  "obliterating",
        "cancel",     "cancels",     "cancelled",    "canceled",
        "cancelling", "canceling",   "eradicate",    "eradicates",
        "eradicated", "eradicating", "extirpate",    "extirpates",
        "extirpated", "extirpating", "eliminate",    "eliminates",
        "eliminated", "eliminating", "wipe out",     "wipes out",
        "wiped out",  "wiping out",  "wipe off",     "wipes off",
        "wiped off",  "wiping off",  "kill",         "kills",
        "killed",     "killing"};
    lex.causation = {
        "cause",     "causes",     "causing",     "caused",
        "determine", "determines", "determining", "determined",
        "engender",  "engenders",  "engendered",  "engendering",
        "entail",    "entails",    "entailed",    "entailing",
        "provoke",   "provokes",   "provoked",    "provoking",
        "trigger",   "triggers",   "triggered",   "triggering",
        "leads to",  "lead to",    "led to",      "leading to",
        "result in", "results in", "resulted in", "resulting in"};
    lex.passive = {
        "created by",     "produced by",    "originated by",   "generated by",
        "made by",        "destroyed by",   "demolished by",   "annihilated by",
        "obliterated by", "cancelled by",   "canceled by",     "eradicated by",
        "extirpated by",  "eliminated by",  "wiped out by",    "wiped off by",
        "killed by",      "caused by",      "determined by",   "engendered by",
        "entailed by",    "provoked by",    "triggered by",    "cause was",
        "determine was",  "provoke was",    "due to",          "led by",
        "reason of",      "result from",    "results from",    "resulted from",
        "resulting from", "stem from",      "stems from",      "stemmed from",
        "stemming from",  "derive from",    "derives from",    "derived from",
        "deriving from",  "originate from", "originates from", "originated from",
        "originating from"};
    return lex;
}

// True when `form` occurs as a whole space-delimited word sequence in `phrase`.
inline bool phrase_contains_form(std::string_view phrase, std::string_view form) {
    if (phrase == form) return true;
    const std::string padded = " " + std::string(phrase) + " ";
    const std::string needle = " " + std::string(form) + " ";
    return padded.find(needle) != std::string::npos;
}

// Resolves the relation type of any operator phrase: membership of an active
// lexicon form wins; the remaining passive idioms (due to, stem from, ...)
// count as Causation.
inline RelType resolve_rel_type(const VerbLexicon& lex, std::string_view phrase) {
    for (const auto& f : lex.creation)
        if (phrase_contains_form(phrase, f)) return RelType::Creation;
    for (const auto& f : lex.destruction)
        if (phrase_contains_form(phrase, f)) return RelType::Destruction;
    for (const auto& f : lex.causation)
        if (phrase_contains_form(phrase, f)) return RelType::Causation;
    return RelType::Causation;
}

// Validation diagnostics; empty means the lexicon is usable.
inline std::vector<std::string> validate_lexicon(const VerbLexicon& lex) {
    std::vector<std::string> issues;
    std::map<std::string, const char*> seen;
    auto check = [&](const std::vector<std::string>& forms, const char* name) {
        for (const auto& f : forms) {
            if (f.empty()) {
                issues.push_back(std::string("empty form in set ") + name);
                continue;
            }
            if (f != text::to_lower(f))
                issues.push_back("form not lowercase: " + f);
            auto [it, inserted] = seen.emplace(f, name);
            if (!inserted)
                issues.push_back("duplicate form '" + f + "' in sets " + it->second + " and " + name);
        }
    };
    check(lex.creation, "creation");
    check(lex.causation, "causation");
    check(lex.destruction, "destruction");
    return issues;
}

// Lexicon file format: INI-like sections [creation], [causation],
// [destruction], [passive]; one surface form per line; '#' starts a comment.
inline VerbLexicon load_lexicon(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open lexicon file: " + path);
    VerbLexicon lex;
    std::vector<std::string>* current = nullptr;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string entry(text::trim_ws(line));
        if (entry.empty()) continue;
        if (entry.front() == '[' && entry.back() == ']') {
            const std::string section = text::to_lower(entry.substr(1, entry.size() - 2));
            if (section == "creation") current = &lex.creation;
            else if (section == "causation") current = &lex.causation;
            else if (section == "destruction") current = &lex.destruction;
            else if (section == "passive") current = &lex.passive;
            else throw std::runtime_error("unknown lexicon section '" + section + "' at line " +
                                          std::to_string(lineno));
            continue;
        }
        if (!current)
            throw std::runtime_error("lexicon entry before any section at line " +
                                     std::to_string(lineno));
        current->push_back(text::to_lower(entry));
    }
    const auto issues = validate_lexicon(lex);
    if (!issues.empty()) throw std::runtime_error("invalid lexicon: " + issues.front());
    return lex;
}

inline void save_lexicon(const VerbLexicon& lex, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    auto dump = [&](const char* name, const std::vector<std::string>& forms) {
        out << '[' << name << "]\n";
        for (const auto& f : forms) out << f << '\n';
        out << '\n';
    };
    dump("creation", lex.creation);
    dump("causation", lex.causation);
    dump("destruction", lex.destruction);
    dump("passive", lex.passive);
}

}  // namespace rhetorica
