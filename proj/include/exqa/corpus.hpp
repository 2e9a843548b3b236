#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace exqa::corpus {

struct Paragraph {
    std::string title;
    std::vector<std::string> sentences;
};

struct SupportingFact {
    std::string title;
    int sentence_index{0};
};

struct QAInstance {
    std::string id;
    std::string question;
    std::vector<Paragraph> paragraphs;
    std::string gold_answer;
    std::vector<SupportingFact> supporting_facts;
    std::optional<std::vector<std::string>> gold_explanation;

    // All tokens of the selected paragraphs (title + sentences), or of all
    // paragraphs when indices is empty.
    std::string paragraphs_text(const std::vector<int>& indices = {}) const;
    std::vector<int> supporting_paragraph_indices() const;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Reads a HotpotQA distractor-format file: a JSON array of records
// {_id, question, answer, context, supporting_facts[, gold_explanation]},
// or the same array wrapped as {"config":..., "data": [...]}.
std::vector<QAInstance> load_hotpotqa(const std::string& path);

struct Triplet {
    std::string head;
    std::string relation;
    std::string tail;
};

// Reads a map id -> per-annotator lists of [head, relation, tail].
std::map<std::string, std::vector<std::vector<Triplet>>> load_r4c(const std::string& path);

// Each triplet becomes one sentence "head relation tail ." with runs of
// whitespace collapsed to single spaces. Throws on an empty derivation.
std::vector<std::string> flatten_triplets(const std::vector<Triplet>& derivation);

// Seeded two-hop question-focused compression task. Every instance has two
// supporting paragraphs hidden among distractors, a rule-parseable question,
// and a gold abstractive explanation with pronouns resolved.
struct SyntheticSpec {
    std::uint64_t rng_seed{1};
    int n_instances{100};
    int n_distractor_sentences{2};
    int n_distractor_paragraphs{8};
    std::vector<std::string> vocab;  // empty -> default_vocab()
    double pronoun_rate{0.5};
    bool summarization_targets{false};  // targets = all facts, not question-focused
};

const std::vector<std::string>& default_vocab();

std::vector<QAInstance> generate_synthetic(const SyntheticSpec& spec);

// Deterministic stand-in for a frozen QA model on the synthetic grammar.
// Returns the gold answer iff the explanation states both required facts
// with resolved referents; otherwise a single-fact guess or "".
std::string synthetic_answer_oracle(const std::string& question,
                                    const std::string& explanation);

// Fraction of instances whose concatenated supporting-fact sentences contain
// the normalized gold answer span, or whose answer is yes/no.
double answer_span_sanity(const std::vector<QAInstance>& instances);

}  // namespace exqa::corpus
