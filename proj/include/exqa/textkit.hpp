#pragma once

#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace exqa::text {

enum class SourceKind { question, paragraph, explanation, answer };

// Ordered list of lowercase tokens. Tokens never contain whitespace and are
// never empty.
struct TokenSequence {
    std::vector<std::string> tokens;
    SourceKind kind{SourceKind::paragraph};

    std::size_t size() const { return tokens.size(); }
    bool empty() const { return tokens.empty(); }
    std::string joined() const;
};

// Lowercase + whitespace split + leading/trailing punctuation detached as
// separate tokens. Deterministic; idempotent on its own space-joined output.
TokenSequence tokenize(std::string_view raw, SourceKind kind);

// SQuAD-style answer normalization: lowercase, strip punctuation characters,
// drop articles (a, an, the), collapse whitespace.
TokenSequence normalize_answer(std::string_view raw);

// Set of n-grams, each gram stored as its tokens joined with a single space.
// Tokens contain no whitespace, so the joined form is collision-free.
struct NGramSet {
    int n{1};
    std::unordered_set<std::string> grams;

    std::size_t size() const { return grams.size(); }
    bool empty() const { return grams.empty(); }
    bool contains(const std::string& g) const { return grams.count(g) > 0; }
};

// All contiguous n-token windows of seq. Throws std::invalid_argument for
// n < 1. Empty set when seq has fewer than n tokens.
NGramSet ngrams(const TokenSequence& seq, int n);

// Distinct unigrams of seq, i.e. ngrams(seq, 1).
NGramSet unigrams(const TokenSequence& seq);

// |P ∩ Q| / |Q|. An empty Q imposes no requirement and yields 1.0.
double coverage(const NGramSet& p, const NGramSet& q);
double coverage(const std::unordered_set<std::string>& p,
                const std::unordered_set<std::string>& q);

}  // namespace exqa::text
