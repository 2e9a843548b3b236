#include "exqa/textkit.hpp"

#include <cctype>
#include <stdexcept>

namespace exqa::text {

namespace {

bool is_space(char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

bool is_punct(char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

char lower(char c) {
    return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

}  // namespace

std::string TokenSequence::joined() const {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) out += ' ';
        out += tokens[i];
    }
    return out;
}

TokenSequence tokenize(std::string_view raw, SourceKind kind) {
    TokenSequence seq;
    seq.kind = kind;

    std::size_t i = 0;
    while (i < raw.size()) {
        while (i < raw.size() && is_space(raw[i])) ++i;
        if (i >= raw.size()) break;
        std::size_t j = i;
        while (j < raw.size() && !is_space(raw[j])) ++j;

        std::string chunk;
        chunk.reserve(j - i);
        for (std::size_t k = i; k < j; ++k) chunk += lower(raw[k]);
        i = j;

        // Detach leading and trailing punctuation characters as their own
        // tokens; internal punctuation (u.s, well-known, 3.5) stays put.
        std::size_t lo = 0;
        std::size_t hi = chunk.size();
        while (lo < hi && is_punct(chunk[lo])) ++lo;
        while (hi > lo && is_punct(chunk[hi - 1])) --hi;

        for (std::size_t k = 0; k < lo; ++k) seq.tokens.emplace_back(1, chunk[k]);
        if (hi > lo) seq.tokens.push_back(chunk.substr(lo, hi - lo));
        for (std::size_t k = hi; k < chunk.size(); ++k) seq.tokens.emplace_back(1, chunk[k]);
    }
    return seq;
}

TokenSequence normalize_answer(std::string_view raw) {
    std::string cleaned;
    cleaned.reserve(raw.size());
    for (char c : raw) {
        if (is_punct(c)) continue;
        cleaned += lower(c);
    }

    TokenSequence seq;
    seq.kind = SourceKind::answer;
    std::size_t i = 0;
    while (i < cleaned.size()) {
        while (i < cleaned.size() && is_space(cleaned[i])) ++i;
        if (i >= cleaned.size()) break;
        std::size_t j = i;
        while (j < cleaned.size() && !is_space(cleaned[j])) ++j;
        std::string tok = cleaned.substr(i, j - i);
        i = j;
        if (tok == "a" || tok == "an" || tok == "the") continue;
        seq.tokens.push_back(std::move(tok));
    }
    return seq;
}

NGramSet ngrams(const TokenSequence& seq, int n) {
    if (n < 1) throw std::invalid_argument("ngrams: n must be >= 1");
    NGramSet out;
    out.n = n;
    const auto& t = seq.tokens;
    if (t.size() < static_cast<std::size_t>(n)) return out;
    for (std::size_t start = 0; start + n <= t.size(); ++start) {
        std::string gram = t[start];
        for (std::size_t k = 1; k < static_cast<std::size_t>(n); ++k) {
            gram += ' ';
            gram += t[start + k];
        }
        out.grams.insert(std::move(gram));
    }
    return out;
}

NGramSet unigrams(const TokenSequence& seq) {
    return ngrams(seq, 1);
}

double coverage(const std::unordered_set<std::string>& p,
                const std::unordered_set<std::string>& q) {
    if (q.empty()) return 1.0;
    std::size_t hit = 0;
    for (const auto& g : q) {
        if (p.count(g) > 0) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(q.size());
}

double coverage(const NGramSet& p, const NGramSet& q) {
    return coverage(p.grams, q.grams);
}

}  // namespace exqa::text
