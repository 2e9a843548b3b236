#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "exqa/corpus.hpp"
#include "exqa/textkit.hpp"

namespace exqa::ranker {

// Logistic model over lexical features of a (question, paragraph) pair.
// The idf table is fitted at training time and persisted with the model so
// that scoring is self-contained.
struct RankerModel {
    std::vector<std::string> feature_names;
    std::vector<double> weights;
    double bias{0.0};
    std::map<std::string, double> idf;
    double idf_unseen{0.0};

    void save(const std::string& path) const;
    static RankerModel load(const std::string& path);
};

struct RankerConfig {
    int k{3};
    double learning_rate{0.5};
    int epochs{300};
    std::uint64_t rng_seed{7};
};

const std::vector<std::string>& feature_names();

// Fixed-order feature vector: question coverage by the paragraph, paragraph
// coverage by the question, question-bigram coverage, idf-weighted overlap,
// log paragraph length, title-in-question indicator.
std::vector<double> featurize(const RankerModel& model, const text::TokenSequence& question,
                              const text::TokenSequence& title,
                              const text::TokenSequence& paragraph);

double score_paragraph(const RankerModel& model, const text::TokenSequence& question,
                       const text::TokenSequence& title, const text::TokenSequence& paragraph);

// Binary cross-entropy of the model on labeled feature rows.
double bce_loss(const RankerModel& model, const std::vector<std::vector<double>>& rows,
                const std::vector<int>& labels);

struct TrainStats {
    std::vector<double> epoch_bce;
    int sampled_negatives{0};  // one cross-question supporting paragraph per question
};

// Fits idf on the instances, then gradient descent on BCE over rows built
// per question: supporting paragraphs positive, same-question distractors
// negative, plus one supporting paragraph sampled from another question as
// an extra negative. Throws when the data has only one class.
RankerModel train_ranker(const std::vector<corpus::QAInstance>& instances,
                         const RankerConfig& config, TrainStats* stats = nullptr);

struct TopK {
    std::vector<int> indices;  // best first; ties broken by lower index
    bool short_input{false};   // fewer than k paragraphs were available
};

TopK rank_topk(const RankerModel& model, const text::TokenSequence& question,
               const std::vector<corpus::Paragraph>& paragraphs, int k);

// Fraction of instances whose every supporting paragraph lands in the top-k.
double recall_at_k(const RankerModel& model, const std::vector<corpus::QAInstance>& instances,
                   int k);

}  // namespace exqa::ranker
