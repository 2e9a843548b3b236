#pragma once

#include <optional>
#include <string>
#include <vector>

#include "exqa/textkit.hpp"

namespace exqa::metrics {

struct F1EM {
    double f1{0.0};
    int em{0};
};

// Token-level F1 with multiset overlap over normalized answers, plus exact
// match of the normalized strings. Two empty answers count as a perfect match.
F1EM answer_f1(const std::string& prediction, const std::string& gold);

// Balanced F-measure over bigram multiset overlap. Zero when either side has
// no bigrams.
double rouge2(const text::TokenSequence& candidate, const text::TokenSequence& reference);

struct Conciseness {
    double cm{0.0};   // len(c) / len(e)
    double abs{0.0};  // n-gram abstractiveness of e w.r.t. c
};

// Throws std::invalid_argument for an empty explanation (undefined metric).
Conciseness conciseness_metrics(const text::TokenSequence& explanation,
                                const text::TokenSequence& paragraphs);

enum class SufLabel { yes, likely, no, unsure };

SufLabel suf_label_from_string(const std::string& s);
std::string to_string(SufLabel label);

struct SufficiencyJudgement {
    std::string worker_id;
    SufLabel label{SufLabel::no};
    std::string worker_answer;
    std::string gold_answer;
};

// Per-worker preprocessing (wrong answer -> no, unsure -> no, likely -> yes)
// followed by a majority vote over {yes, no}; ties resolve to no.
int aggregate_sufficiency(const std::vector<SufficiencyJudgement>& judgements);

struct SufF1 {
    int suf{0};
    double f1{0.0};
};

// Mean of suf(i) * F1(i). Throws on an empty list.
double xf1(const std::vector<SufF1>& rows);

struct InstanceMetrics {
    std::string id;
    double f1{0.0};
    int em{0};
    std::optional<double> cm;
    std::optional<double> abs;
    std::optional<double> rg2;
    std::optional<int> suf;
};

struct CorpusMetrics {
    double mean_f1{0.0};
    double mean_em{0.0};
    std::optional<double> mean_cm;
    std::optional<double> mean_abs;  // reported x100 in serialized tables
    std::optional<double> mean_rg2;
    std::optional<double> xf1;
    std::optional<double> suf_rate;
    std::size_t n_instances{0};
};

struct MetricsReport {
    std::vector<InstanceMetrics> per_instance;
    CorpusMetrics corpus;
};

// Corpus aggregates are arithmetic means over the instances where each
// column is defined. xf1 and suf_rate are present only when any instance
// carries a sufficiency label.
MetricsReport build_report(std::vector<InstanceMetrics> rows);

}  // namespace exqa::metrics
