#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "exqa/corpus.hpp"
#include "exqa/explainer.hpp"
#include "exqa/metrics.hpp"
#include "exqa/oracle.hpp"
#include "exqa/ranker.hpp"
#include "exqa/rewards.hpp"

namespace exqa::pipeline {

// Rule-based answerer over the synthetic grammar.
class SyntheticRuleOracle final : public AnswerOracle {
public:
    std::string answer(const std::string& question, const std::string& explanation) override {
        return corpus::synthetic_answer_oracle(question, explanation);
    }
};

// Offline lexical stand-in for a trained reader: picks the explanation span
// that best matches the question focus under fixed rules.
std::string span_matcher_answer(const std::string& question, const std::string& explanation);

class SpanMatcherOracle final : public AnswerOracle {
public:
    std::string answer(const std::string& question, const std::string& explanation) override {
        return span_matcher_answer(question, explanation);
    }
};

enum class InputRegime {
    ranked,               // top-k paragraphs from the ranker
    gold_plus_distractor  // gold supporting paragraphs + sampled distractors
};

struct EvalOptions {
    InputRegime regime{InputRegime::ranked};
    int k{3};
    int distractors{1};           // for gold_plus_distractor
    std::uint64_t seed{42};       // distractor sampling
    bool gold_passthrough{false}; // score the gold explanation as if generated
    reward::RLConfig rl;
};

struct PipelineResult {
    std::string id;
    std::string explanation;
    std::string answer;
    double seq_logprob{0.0};
    std::vector<int> input_paragraphs;
    reward::RewardBreakdown rewards;
    metrics::InstanceMetrics row;
    bool failed{false};
    std::string error;
};

// Deterministic per-instance paragraph selection for either regime.
std::vector<int> select_input_paragraphs(const corpus::QAInstance& instance,
                                         const ranker::RankerModel* ranker_model,
                                         const EvalOptions& options);

// Rank paragraphs, decode an explanation, answer from the explanation alone,
// score. Component failures produce a failed result, not an exception.
PipelineResult run_instance(const corpus::QAInstance& instance,
                            const ranker::RankerModel* ranker_model,
                            const explainer::ExplainerModel& model, AnswerOracle& oracle,
                            AcceptabilityScorer& acceptability, const EvalOptions& options);

struct CorpusEvaluation {
    std::vector<PipelineResult> results;
    metrics::MetricsReport report;
};

CorpusEvaluation evaluate_corpus(const std::vector<corpus::QAInstance>& instances,
                                 const ranker::RankerModel* ranker_model,
                                 const explainer::ExplainerModel& model, AnswerOracle& oracle,
                                 AcceptabilityScorer& acceptability, const EvalOptions& options,
                                 const std::map<std::string, int>* suf_labels = nullptr);

// Counts over {sufficient, insufficient} x {correct (F1 > 0.5), wrong}.
// matrix[suf][correct]; throws when a result id is missing a label.
std::array<std::array<int, 2>, 2> sufficiency_correctness_matrix(
    const std::vector<PipelineResult>& results, const std::map<std::string, int>& suf_labels);

// Builds TrainItems (encoder input, gold target ids, reward context) from
// instances under the training input regime.
std::vector<explainer::TrainItem> build_train_items(
    const std::vector<corpus::QAInstance>& instances, const explainer::Vocab& vocab,
    const explainer::ModelConfig& cfg, int distractors, std::uint64_t seed);

}  // namespace exqa::pipeline
