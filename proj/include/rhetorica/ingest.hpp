#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rhetorica/text.hpp"

namespace rhetorica {

enum class FactionLabel { Brexiteer, Remainer, Other };

inline const char* to_string(FactionLabel f) {
    switch (f) {
        case FactionLabel::Brexiteer: return "Brexiteer";
        case FactionLabel::Remainer: return "Remainer";
        default: return "Other";
    }
}

inline FactionLabel faction_from_string(std::string_view s) {
    if (s == "Brexiteer") return FactionLabel::Brexiteer;
    if (s == "Remainer") return FactionLabel::Remainer;
    if (s == "Other") return FactionLabel::Other;
    throw std::runtime_error("unknown faction label: " + std::string(s));
}

struct TweetRecord {
    std::string id;
    std::string created_at;  // ISO-8601, second resolution
    std::string text;
    std::string user_bio;
    bool is_retweet = false;
};

struct LineError {
    std::size_t line = 0;
    std::string message;
};

struct CorpusFilterReport {
    std::int64_t total_in = 0;
    std::int64_t removed_offtopic = 0;
    std::int64_t kept = 0;
    std::int64_t skipped_retweets = 0;
    std::int64_t line_errors = 0;
};

// ---- timestamps -----------------------------------------------------------

// Days since 1970-01-01 for a civil date (valid across the Gregorian range).
inline std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2) / 5 + static_cast<unsigned>(d) - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return static_cast<std::int64_t>(era) * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

struct UtcTime {
    std::int64_t day = 0;  // UTC calendar day index (days since epoch)
    int hh = 0, mm = 0, ss = 0;
};

// Parses "YYYY-MM-DD[T ]HH:MM:SS" with optional 'Z' or +/-HH:MM offset; the
// offset is folded back into UTC.
inline std::optional<UtcTime> parse_iso8601(std::string_view s) {
    auto num = [&](std::size_t pos, std::size_t n, int& out) {
        if (pos + n > s.size()) return false;
        int v = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!text::is_ascii_digit(s[pos + i])) return false;
            v = v * 10 + (s[pos + i] - '0');
        }
        out = v;
        return true;
    };
    int y, mo, d, hh, mi, ss;
    if (!num(0, 4, y) || s.size() < 19) return std::nullopt;
    if (s[4] != '-' || s[7] != '-') return std::nullopt;
    if (!num(5, 2, mo) || !num(8, 2, d)) return std::nullopt;
    if (s[10] != 'T' && s[10] != ' ') return std::nullopt;
    if (!num(11, 2, hh) || s[13] != ':' || !num(14, 2, mi) || s[16] != ':' || !num(17, 2, ss))
        return std::nullopt;
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || hh > 23 || mi > 59 || ss > 60) return std::nullopt;
    std::int64_t offset_min = 0;
    if (s.size() > 19) {
        const char c = s[19];
        if (c == 'Z') {
            if (s.size() != 20) return std::nullopt;
        } else if (c == '+' || c == '-') {
            int oh, om;
            if (s.size() < 25 || !num(20, 2, oh) || s[22] != ':' || !num(23, 2, om)) return std::nullopt;
            offset_min = (c == '+' ? 1 : -1) * (oh * 60 + om);
        } else {
            return std::nullopt;
        }
    }
    std::int64_t minutes = days_from_civil(y, mo, d) * 1440 + hh * 60 + mi - offset_min;
    UtcTime t;
    t.day = minutes >= 0 ? minutes / 1440 : (minutes - 1439) / 1440;
    const std::int64_t rem = minutes - t.day * 1440;
    t.hh = static_cast<int>(rem / 60);
    t.mm = static_cast<int>(rem % 60);
    t.ss = ss;
    return t;
}

inline std::string day_to_iso(std::int64_t day) {
    int y, m, d;
    civil_from_days(day, y, m, d);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
    return buf;
}

inline std::int64_t day_from_iso(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-')
        throw std::runtime_error("bad date: " + std::string(s));
    const int y = std::stoi(std::string(s.substr(0, 4)));
    const int m = std::stoi(std::string(s.substr(5, 2)));
    const int d = std::stoi(std::string(s.substr(8, 2)));
    return days_from_civil(y, m, d);
}

// ---- loading --------------------------------------------------------------

// Streams JSONL records; malformed lines surface as per-line errors and the
// stream continues. Retweets are dropped here when include_retweets is false.
inline void load_corpus(const std::string& path, bool include_retweets,
                        const std::function<void(const TweetRecord&)>& on_record,
                        const std::function<void(const LineError&)>& on_error) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open corpus file: " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim_ws(line).empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            on_error({lineno, "malformed JSON at line " + std::to_string(lineno)});
            continue;
        }
        static const std::array<const char*, 5> fields = {"text", "created_at", "id", "user_bio",
                                                          "is_retweet"};
        const char* missing = nullptr;
        for (const char* f : fields)
            if (!j.contains(f)) { missing = f; break; }
        if (missing) {
            on_error({lineno, std::string("missing field ") + missing + " at line " +
                                  std::to_string(lineno)});
            continue;
        }
        TweetRecord rec;
        try {
            rec.id = j.at("id").get<std::string>();
            rec.created_at = j.at("created_at").get<std::string>();
            rec.text = j.at("text").get<std::string>();
            rec.user_bio = j.at("user_bio").is_null() ? "" : j.at("user_bio").get<std::string>();
            rec.is_retweet = j.at("is_retweet").get<bool>();
        } catch (const std::exception&) {
            on_error({lineno, "bad field type at line " + std::to_string(lineno)});
            continue;
        }
        if (rec.id.empty()) {
            on_error({lineno, "empty id at line " + std::to_string(lineno)});
            continue;
        }
        if (!parse_iso8601(rec.created_at)) {
            on_error({lineno, "unparseable created_at at line " + std::to_string(lineno)});
            continue;
        }
        if (!include_retweets && rec.is_retweet) continue;
        on_record(rec);
    }
}

// ---- off-topic filter -----------------------------------------------------

// The US-China trade-war filter, implemented as the literal alternation the
// source regex spells out (all alternatives are plain strings once [.] is
// resolved). Case-sensitive by construction, including the bare "US" token
// that matches inside words; that over-match is intentional.
inline const std::vector<std::string>& offtopic_literals() {
    static const std::vector<std::string> lits = {
        "China",         "china",         "u.s.a",        "u.s",       " U.S",
        "US",            "USA",           "UNITEDSTATES", "UnitedStates",
        "unitedstates",  "UNITED STATES", "United States", "united states",
        "trump",         "Trump",         "TRUMP",        "XI",        "Xi"};
    return lits;
}

// Returns true when the record should be kept (no off-topic match).
inline bool filter_offtopic(const TweetRecord& rec) {
    for (const auto& lit : offtopic_literals())
        if (rec.text.find(lit) != std::string::npos) return false;
    return true;
}

// ---- faction classification -----------------------------------------------

inline const std::vector<std::string>& brexiteer_dictionary() {
    static const std::vector<std::string> d = {
        "brexiteer",   "vote brexit",  "voted brexit", "voted for brexit", "ukip",
        "brexit party", "vote leave",  "leave the eu", "respect my vote",  "johnson",
        "farage",      "anti-eu",      "antieu"};
    return d;
}

inline const std::vector<std::string>& remainer_dictionary() {
    static const std::vector<std::string> d = {
        "remainer",      "vote remain", "voted remain", "voted for remain", "remain party",
        "new vote",      "stay in the eu", "pro-eu",    "proeu"};
    return d;
}

// Case-insensitive dictionary match on the bio stored with the record; a bio
// matching both dictionaries is deliberately Other.
inline FactionLabel classify_faction(std::string_view bio) {
    bool brex = false, rem = false;
    for (const auto& e : brexiteer_dictionary())
        if (text::icontains(bio, e)) { brex = true; break; }
    for (const auto& e : remainer_dictionary())
        if (text::icontains(bio, e)) { rem = true; break; }
    if (brex && !rem) return FactionLabel::Brexiteer;
    if (rem && !brex) return FactionLabel::Remainer;
    return FactionLabel::Other;
}

// ---- labeled output -------------------------------------------------------

struct LabeledTweet {
    TweetRecord rec;
    FactionLabel faction = FactionLabel::Other;
    std::int64_t day = 0;
};

inline LabeledTweet label_tweet(const TweetRecord& rec) {
    LabeledTweet out;
    out.rec = rec;
    out.faction = classify_faction(rec.user_bio);
    out.day = parse_iso8601(rec.created_at)->day;
    return out;
}

inline nlohmann::json labeled_to_json(const LabeledTweet& t) {
    return {{"id", t.rec.id},
            {"created_at", t.rec.created_at},
            {"text", t.rec.text},
            {"user_bio", t.rec.user_bio},
            {"is_retweet", t.rec.is_retweet},
            {"faction", to_string(t.faction)},
            {"day", day_to_iso(t.day)}};
}

// Runs the full ingest stage: load, filter, label, write JSONL.
inline CorpusFilterReport run_ingest(const std::string& input, const std::string& output,
                                     bool include_retweets,
                                     std::vector<LineError>* errors = nullptr) {
    std::ofstream out(output, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + output);
    CorpusFilterReport report;
    load_corpus(
        input, include_retweets,
        [&](const TweetRecord& rec) {
            ++report.total_in;
            if (!filter_offtopic(rec)) {
                ++report.removed_offtopic;
                return;
            }
            ++report.kept;
            out << labeled_to_json(label_tweet(rec)).dump() << '\n';
        },
        [&](const LineError& err) {
            ++report.line_errors;
            if (errors) errors->push_back(err);
        });
    return report;
}

}  // namespace rhetorica
