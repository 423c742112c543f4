#pragma once

#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

#include "rhetorica/text.hpp"

namespace rhetorica {

using StopwordSet = std::set<std::string, std::less<>>;

// Quanteda-style English stopword list used for the topic-model vocabulary,
// including the corpus-specific additions (single letters, twitterisms, and
// contraction artifacts like "thatbe"/"webe").
inline const StopwordSet& default_stopwords() {
    static const StopwordSet s = {
        "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "your", "yours",
        "yourself", "yourselves", "he", "him", "his", "himself", "she", "her", "hers", "herself",
        "it", "its", "itself", "they", "them", "their", "theirs", "themselves", "what", "which",
        "who", "whom", "this", "that", "these", "those", "am", "is", "are", "was", "were", "be",
        "been", "being", "have", "has", "had", "having", "do", "does", "did", "doing", "would",
        "should", "could", "ought", "i'm", "you're", "he's", "she's", "it's", "we're", "they're",
        "i've", "you've", "we've", "they've", "i'd", "you'd", "he'd", "she'd", "we'd", "they'd",
        "i'll", "you'll", "he'll", "she'll", "we'll", "they'll", "isn't", "aren't", "wasn't",
        "weren't", "hasn't", "haven't", "hadn't", "doesn't", "don't", "didn't", "won't",
        "wouldn't", "shan't", "shouldn't", "can't", "cannot", "couldn't", "mustn't", "let's",
        "that's", "who's", "what's", "here's", "there's", "when's", "where's", "why's", "how's",
        "a", "an", "the", "and", "but", "because", "as", "until", "while", "of", "at", "by",
        "for", "with", "about", "against", "between", "into", "through", "during", "before",
        "after", "above", "below", "to", "from", "up", "down", "in", "out", "on", "over",
        "under", "again", "further", "then", "once", "here", "there", "when", "where", "why",
        "how", "all", "any", "both", "each", "few", "more", "most", "other", "some", "such",
        "only", "own", "same", "so", "than", "too", "very", "will", "b", "c", "d", "e", "f",
        "g", "h", "j", "k", "l", "m", "n", "o", "p", "q", "r", "s", "t", "u", "v", "w", "x",
        "y", "z", "wa", "us", "ll", "can", "etc", "ve", "imo", "amp", "thatbe", "therebe",
        "webe", "&", "ie", "via", "also", "think", "simply", "dr", "re", "youwatch", "whomost",
        "nah", "itbe", "amongst", "lrast", "youto", "theof", "mayhem", "amlo", "oui", "oh",
        "kap", "ect", "bla", "try", "yet", "thats", "got", "hoc", "lot"};
    return s;
}

// One stopword per line; '#' comments allowed.
inline StopwordSet load_stopwords(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open stopword file: " + path);
    StopwordSet out;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto w = text::trim_ws(line);
        if (!w.empty()) out.insert(text::to_lower(w));
    }
    return out;
}

inline void save_stopwords(const StopwordSet& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& w : s) out << w << '\n';
}

}  // namespace rhetorica
