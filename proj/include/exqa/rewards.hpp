#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "exqa/oracle.hpp"
#include "exqa/textkit.hpp"

namespace exqa::reward {

// Hyperparameters of the self-critical training stage and the reward gates.
struct RLConfig {
    double lambda_ml{0.1};
    double sample_temperature{0.4};
    double advantage_clip_min{-0.001};
    double noisiness_threshold{-50.0};
    int max_explanation_tokens{256};
    std::uint64_t rng_seed{0};
};

// The nine elemental reward values and their geometric mean. The combined
// value is zero exactly when any element is zero.
struct RewardBreakdown {
    double compression{0.0};
    double abstractiveness{0.0};
    double relevance{0.0};
    double question_coverage{0.0};
    double qam_f1{0.0};
    double span_exists{0.0};
    double acceptability{0.0};
    double noisiness_ok{0.0};
    double well_formed{0.0};
    double combined{0.0};
    bool degenerate_input{false};

    static constexpr int kNumElements = 9;
    std::array<double, kNumElements> elements() const {
        return {compression,   abstractiveness, relevance,
                question_coverage, qam_f1,      span_exists,
                acceptability, noisiness_ok,    well_formed};
    }
    static const std::array<const char*, kNumElements>& element_names();
};

// 1 - len(e)/len(c), clamped to [0,1]. Throws on empty paragraphs.
double reward_compression(const text::TokenSequence& explanation,
                          const text::TokenSequence& paragraphs);

// Mean over i in 1..4 of (1 - cov(ng(c,i), ng(e,i))). An empty explanation
// abstracts nothing: 0.0 with the degenerate flag set.
double reward_abstractiveness(const text::TokenSequence& explanation,
                              const text::TokenSequence& paragraphs,
                              bool* degenerate = nullptr);

// cov(w(c), w(e)): fraction of e's distinct unigrams that appear in c.
double reward_relevance(const text::TokenSequence& explanation,
                        const text::TokenSequence& paragraphs);

// cov(w(e), w(q)): fraction of q's distinct unigrams present in e.
double reward_question_coverage(const text::TokenSequence& explanation,
                                const text::TokenSequence& question);

// 1 iff the normalized gold answer occurs as a contiguous run inside the
// normalized explanation. An empty normalized gold is vacuously present.
double reward_span_exists(const text::TokenSequence& explanation,
                          const text::TokenSequence& gold_answer,
                          bool* degenerate = nullptr);

// Feed the explanation to the answer oracle and score its answer against
// gold with token-level F1.
double reward_qam_f1(const std::string& explanation,
                     const std::string& question,
                     const std::string& gold_answer,
                     AnswerOracle& oracle);

// 1 iff the sequence log-probability exceeds the noisiness threshold.
double reward_noisiness(double seq_logprob, const RLConfig& config);

// 0 if any trigger fires: a 4-gram occurring twice, a token longer than 25
// characters, a leading pronoun, or a missing final period.
double reward_well_formed(const text::TokenSequence& explanation);

// Probability-of-acceptable from the scorer. Values outside [0,1] are a
// protocol violation.
double reward_acceptability(const std::string& explanation,
                            AcceptabilityScorer& scorer);

// Geometric mean of the nine elements. Throws std::invalid_argument when an
// element is outside its range. Exact zero when any element is zero, and
// invariant under permutation of the elements.
RewardBreakdown combine(const std::array<double, RewardBreakdown::kNumElements>& elements);

double geometric_mean(const std::array<double, RewardBreakdown::kNumElements>& elements);

// Everything a full reward evaluation needs besides the explanation itself.
struct RewardContext {
    std::string question;
    std::string paragraphs;
    std::string gold_answer;
};

// Run all nine elemental rewards on one explanation and combine them.
// seq_logprob is log p(e | q, p) under the policy that produced e.
RewardBreakdown score_explanation(const RewardContext& ctx,
                                  const std::string& explanation,
                                  double seq_logprob,
                                  const RLConfig& config,
                                  AnswerOracle& oracle,
                                  AcceptabilityScorer& acceptability);

}  // namespace exqa::reward
