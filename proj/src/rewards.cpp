#include "exqa/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "exqa/metrics.hpp"

namespace exqa::reward {

namespace {

const std::unordered_set<std::string> kPronouns = {
    "he",  "she",  "it",    "they", "his",  "her",
    "its", "their", "this", "that", "these", "those"};

bool in_unit_interval(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

const std::array<const char*, RewardBreakdown::kNumElements>&
RewardBreakdown::element_names() {
    static const std::array<const char*, kNumElements> names = {
        "compression",  "abstractiveness", "relevance",
        "question_coverage", "qam_f1",     "span_exists",
        "acceptability", "noisiness_ok",   "well_formed"};
    return names;
}

double reward_compression(const text::TokenSequence& explanation,
                          const text::TokenSequence& paragraphs) {
    if (paragraphs.empty()) {
        throw std::invalid_argument("reward_compression: empty paragraphs");
    }
    double ratio = 1.0 - static_cast<double>(explanation.size()) /
                             static_cast<double>(paragraphs.size());
    return std::clamp(ratio, 0.0, 1.0);
}

double reward_abstractiveness(const text::TokenSequence& explanation,
                              const text::TokenSequence& paragraphs,
                              bool* degenerate) {
    if (degenerate) *degenerate = false;
    if (explanation.empty()) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    double sum = 0.0;
    for (int i = 1; i <= 4; ++i) {
        sum += 1.0 - text::coverage(text::ngrams(paragraphs, i),
                                    text::ngrams(explanation, i));
    }
    return sum / 4.0;
}

double reward_relevance(const text::TokenSequence& explanation,
                        const text::TokenSequence& paragraphs) {
    return text::coverage(text::unigrams(paragraphs), text::unigrams(explanation));
}

double reward_question_coverage(const text::TokenSequence& explanation,
                                const text::TokenSequence& question) {
    return text::coverage(text::unigrams(explanation), text::unigrams(question));
}

double reward_span_exists(const text::TokenSequence& explanation,
                          const text::TokenSequence& gold_answer,
                          bool* degenerate) {
    if (degenerate) *degenerate = false;
    const text::TokenSequence gold = text::normalize_answer(gold_answer.joined());
    const text::TokenSequence expl = text::normalize_answer(explanation.joined());
    if (gold.empty()) {
        if (degenerate) *degenerate = true;
        return 1.0;
    }
    if (expl.size() < gold.size()) return 0.0;
    for (std::size_t start = 0; start + gold.size() <= expl.size(); ++start) {
        bool match = true;
        for (std::size_t k = 0; k < gold.size(); ++k) {
            if (expl.tokens[start + k] != gold.tokens[k]) {
                match = false;
                break;
            }
        }
        if (match) return 1.0;
    }
    return 0.0;
}

double reward_qam_f1(const std::string& explanation,
                     const std::string& question,
                     const std::string& gold_answer,
                     AnswerOracle& oracle) {
    const std::string predicted = oracle.answer(question, explanation);
    return metrics::answer_f1(predicted, gold_answer).f1;
}

double reward_noisiness(double seq_logprob, const RLConfig& config) {
    return seq_logprob > config.noisiness_threshold ? 1.0 : 0.0;
}

double reward_well_formed(const text::TokenSequence& explanation) {
    const auto& toks = explanation.tokens;
    if (toks.empty()) return 0.0;
    if (toks.back() != ".") return 0.0;
    if (kPronouns.count(toks.front()) > 0) return 0.0;
    for (const auto& t : toks) {
        if (t.size() > 25) return 0.0;
    }
    if (toks.size() >= 5) {
        std::unordered_map<std::string, int> seen;
        for (std::size_t start = 0; start + 4 <= toks.size(); ++start) {
            std::string gram = toks[start];
            for (std::size_t k = 1; k < 4; ++k) {
                gram += ' ';
                gram += toks[start + k];
            }
            if (++seen[gram] > 1) return 0.0;
        }
    }
    return 1.0;
}

double reward_acceptability(const std::string& explanation,
                            AcceptabilityScorer& scorer) {
    double v = scorer.score(explanation);
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw ProtocolError("acceptability score outside [0,1]");
    }
    return v;
}

double geometric_mean(const std::array<double, RewardBreakdown::kNumElements>& elements) {
    // Sorting first makes the result exactly permutation-invariant.
    auto sorted = elements;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() == 0.0) return 0.0;
    double log_sum = 0.0;
    for (double v : sorted) log_sum += std::log(v);
    return std::exp(log_sum / static_cast<double>(RewardBreakdown::kNumElements));
}

RewardBreakdown combine(const std::array<double, RewardBreakdown::kNumElements>& elements) {
    for (std::size_t i = 0; i < elements.size(); ++i) {
        if (!std::isfinite(elements[i]) || !in_unit_interval(elements[i])) {
            throw std::invalid_argument(
                std::string("combine: element out of range: ") +
                RewardBreakdown::element_names()[i]);
        }
    }
    RewardBreakdown b;
    b.compression = elements[0];
    b.abstractiveness = elements[1];
    b.relevance = elements[2];
    b.question_coverage = elements[3];
    b.qam_f1 = elements[4];
    b.span_exists = elements[5];
    b.acceptability = elements[6];
    b.noisiness_ok = elements[7];
    b.well_formed = elements[8];
    b.combined = geometric_mean(elements);
    return b;
}

RewardBreakdown score_explanation(const RewardContext& ctx,
                                  const std::string& explanation,
                                  double seq_logprob,
                                  const RLConfig& config,
                                  AnswerOracle& oracle,
                                  AcceptabilityScorer& acceptability) {
    using text::SourceKind;
    const auto e = text::tokenize(explanation, SourceKind::explanation);
    const auto c = text::tokenize(ctx.paragraphs, SourceKind::paragraph);
    const auto q = text::tokenize(ctx.question, SourceKind::question);
    const auto gold = text::tokenize(ctx.gold_answer, SourceKind::answer);

    bool degenerate_abs = false;
    bool degenerate_span = false;
    std::array<double, RewardBreakdown::kNumElements> r{};
    r[0] = reward_compression(e, c);
    r[1] = reward_abstractiveness(e, c, &degenerate_abs);
    r[2] = reward_relevance(e, c);
    r[3] = reward_question_coverage(e, q);
    r[4] = reward_qam_f1(explanation, ctx.question, ctx.gold_answer, oracle);
    r[5] = reward_span_exists(e, gold, &degenerate_span);
    r[6] = reward_acceptability(explanation, acceptability);
    r[7] = reward_noisiness(seq_logprob, config);
    r[8] = reward_well_formed(e);

    RewardBreakdown b = combine(r);
    b.degenerate_input = degenerate_abs || degenerate_span;
    return b;
}

}  // namespace exqa::reward
