#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rhetorica/stopwords.hpp"
#include "rhetorica/text.hpp"

namespace rhetorica {

// ---- tokenization -----------------------------------------------------------

namespace detail {

inline bool is_emoji_cp(char32_t cp) {
    return (cp >= 0x2190 && cp <= 0x21FF) || (cp >= 0x2600 && cp <= 0x27BF) ||
           (cp >= 0x2B00 && cp <= 0x2BFF) || (cp >= 0x1F000 && cp <= 0x1FAFF);
}

inline bool is_token_char(char32_t cp) {
    return text::is_letter_or_mark(cp) || (cp >= U'0' && cp <= U'9') || cp == U'_' ||
           cp == U'-' || cp == U'\'';
}

inline bool drop_word(std::string_view w) {
    auto starts = [&](std::string_view p) {
        return w.size() >= p.size() && text::iequals(w.substr(0, p.size()), p);
    };
    return starts("http://") || starts("https://") || starts("www.") || (!w.empty() && w[0] == '@');
}

}  // namespace detail

struct TokenizedEffect {
    std::vector<std::string> unigrams;
    std::vector<std::string> bigrams;  // "u w" keys, directed u -> w
};

// Lowercases, removes URLs and @mentions, keeps emojis as standalone tokens
// and hyphens/apostrophes inside tokens, then filters stopwords. Bigrams are
// adjacent pairs of the surviving stream by default; with
// bigrams_span_stopwords=false only pairs that were adjacent before stopword
// removal are formed.
inline TokenizedEffect tokenize_effect(std::string_view effect, const StopwordSet& stopwords,
                                       bool bigrams_span_stopwords = true) {
    struct Raw {
        std::string token;
        std::size_t position;  // index in the pre-stopword stream
    };
    std::vector<Raw> kept;
    std::size_t stream_pos = 0;

    auto emit = [&](std::string tok) {
        if (tok.empty()) return;
        // trim stray apostrophes/hyphens at the edges
        std::size_t b = 0, e = tok.size();
        while (b < e && (tok[b] == '\'' || tok[b] == '-')) ++b;
        while (e > b && (tok[e - 1] == '\'' || tok[e - 1] == '-')) --e;
        tok = tok.substr(b, e - b);
        if (tok.empty()) return;
        const std::size_t pos = stream_pos++;
        if (stopwords.count(tok)) return;
        kept.push_back({std::move(tok), pos});
    };

    for (const auto span : text::split_words(effect)) {
        const std::string_view word = effect.substr(span.begin, span.end - span.begin);
        if (detail::drop_word(word)) continue;
        std::string current;
        std::size_t i = 0;
        while (i < word.size()) {
            std::size_t len = 0;
            const char32_t cp = text::decode_utf8(word, i, len);
            if (detail::is_token_char(cp)) {
                for (std::size_t k = 0; k < len; ++k)
                    current += text::ascii_lower(word[i + k]);
            } else if (detail::is_emoji_cp(cp)) {
                emit(std::move(current));
                current.clear();
                emit(std::string(word.substr(i, len)));
            } else {
                emit(std::move(current));
                current.clear();
            }
            i += len;
        }
        emit(std::move(current));
    }

    TokenizedEffect out;
    out.unigrams.reserve(kept.size());
    for (const auto& r : kept) out.unigrams.push_back(r.token);
    for (std::size_t i = 0; i + 1 < kept.size(); ++i) {
        if (!bigrams_span_stopwords && kept[i + 1].position != kept[i].position + 1) continue;
        out.bigrams.push_back(kept[i].token + " " + kept[i + 1].token);
    }
    return out;
}

// ---- vocabulary and document-term matrix --------------------------------------

enum class TokenKind { Unigram, Bigram };

struct VocabEntry {
    std::string token;       // bigrams use "u w"
    TokenKind kind = TokenKind::Unigram;
    std::int64_t count = 0;  // corpus count
};

struct Vocabulary {
    std::vector<VocabEntry> entries;
    std::unordered_map<std::string, int> index;

    int size() const { return static_cast<int>(entries.size()); }
    int n_unigrams() const {
        int n = 0;
        for (const auto& e : entries) n += e.kind == TokenKind::Unigram;
        return n;
    }
    int n_bigrams() const { return size() - n_unigrams(); }

    int lookup(std::string_view tok) const {
        const auto it = index.find(std::string(tok));
        return it == index.end() ? -1 : it->second;
    }

    // Splits a bigram key into its two unigram parts.
    static std::pair<std::string, std::string> bigram_parts(const std::string& token) {
        const auto sp = token.find(' ');
        return {token.substr(0, sp), token.substr(sp + 1)};
    }
};

struct CorpusMatrix {
    std::vector<std::string> doc_ids;                      // aligned to rows
    std::vector<std::vector<std::pair<int, int>>> rows;    // (token index, count)
    std::vector<std::int64_t> col_sums;
    std::vector<int> dropped_docs;                         // indices into the input doc list
    std::vector<int> kept_docs;                            // surviving input indices

    int n_docs() const { return static_cast<int>(rows.size()); }
    std::int64_t doc_total(int d) const {
        std::int64_t n = 0;
        for (const auto& [v, c] : rows[d]) n += c;
        return n;
    }
};

// Builds the pruned vocabulary (corpus count >= min_count over unigrams and
// bigrams alike) and the sparse counts matrix; documents emptied by pruning
// are dropped and recorded.
inline std::pair<Vocabulary, CorpusMatrix> build_matrix(
    const std::vector<TokenizedEffect>& docs, const std::vector<std::string>& doc_ids,
    int min_count = 10) {
    if (docs.empty()) throw std::runtime_error("build_matrix: no documents");
    if (docs.size() != doc_ids.size())
        throw std::runtime_error("build_matrix: ids not aligned with documents");

    std::map<std::string, std::pair<std::int64_t, TokenKind>> counts;
    for (const auto& d : docs) {
        for (const auto& t : d.unigrams) {
            auto& e = counts[t];
            e.first += 1;
            e.second = TokenKind::Unigram;
        }
        for (const auto& t : d.bigrams) {
            auto& e = counts[t];
            e.first += 1;
            e.second = TokenKind::Bigram;
        }
    }

    Vocabulary vocab;
    for (const auto& [tok, e] : counts) {
        if (e.first < min_count) continue;
        vocab.index.emplace(tok, vocab.size());
        vocab.entries.push_back({tok, e.second, e.first});
    }
    if (vocab.entries.empty()) throw std::runtime_error("empty corpus");

    CorpusMatrix mat;
    mat.col_sums.assign(vocab.entries.size(), 0);
    for (std::size_t d = 0; d < docs.size(); ++d) {
        std::map<int, int> row;
        for (const auto& t : docs[d].unigrams) {
            const int v = vocab.lookup(t);
            if (v >= 0) ++row[v];
        }
        for (const auto& t : docs[d].bigrams) {
            const int v = vocab.lookup(t);
            if (v >= 0) ++row[v];
        }
        if (row.empty()) {
            mat.dropped_docs.push_back(static_cast<int>(d));
            continue;
        }
        std::vector<std::pair<int, int>> cells(row.begin(), row.end());
        for (const auto& [v, c] : cells) mat.col_sums[static_cast<std::size_t>(v)] += c;
        mat.rows.push_back(std::move(cells));
        mat.doc_ids.push_back(doc_ids[d]);
        mat.kept_docs.push_back(static_cast<int>(d));
    }
    if (mat.rows.empty()) throw std::runtime_error("empty corpus");
    return {std::move(vocab), std::move(mat)};
}

}  // namespace rhetorica
