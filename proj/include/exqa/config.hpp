#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "exqa/corpus.hpp"
#include "exqa/explainer.hpp"
#include "exqa/pipeline.hpp"
#include "exqa/ranker.hpp"
#include "exqa/rewards.hpp"

namespace exqa::config {

struct OracleConfig {
    std::string kind{"synthetic_rule"};  // synthetic_rule | span_matcher | remote
    std::string endpoint;
    int timeout_s{30};
};

struct AcceptabilityConfig {
    std::string kind{"builtin"};  // builtin | remote
    std::string endpoint;
    int timeout_s{30};
};

struct SyntheticConfig {
    std::uint64_t rng_seed{1};
    int n_train{500};
    int n_dev{100};
    int n_test{100};
    int n_distractor_sentences{2};
    int n_distractor_paragraphs{8};
    double pronoun_rate{0.5};
    std::vector<std::string> vocab;  // empty -> built-in default
    bool sum_split{false};
};

struct PathsConfig {
    std::string train;
    std::string dev;
    std::string test;
    std::string checkpoint;
    std::string init_checkpoint;
    std::string ranker_model;
    std::string out_dir{"out"};
    std::string judgements;
};

struct EvalConfig {
    std::string input_regime{"gold_plus_distractor"};  // or "ranked"
    bool gold_passthrough{false};
};

// One config object for the whole CLI; fully serialized into every output
// artifact.
struct RunConfig {
    std::uint64_t seed{42};
    reward::RLConfig rl;
    int rl_steps{2000};
    explainer::TrainConfig train;
    explainer::ModelConfig model;
    std::size_t max_vocab{20000};
    ranker::RankerConfig ranker;
    SyntheticConfig synthetic;
    PathsConfig paths;
    OracleConfig oracle;
    AcceptabilityConfig acceptability;
    EvalConfig eval;

    static RunConfig from_file(const std::string& path);
    static RunConfig from_json_text(const std::string& text);
    std::string to_json_text(int indent = 1) const;

    corpus::SyntheticSpec synthetic_spec(std::uint64_t seed_offset = 0,
                                         int n_instances = -1) const;
    pipeline::EvalOptions eval_options() const;
};

// FNV-1a content hash of a file, "fnv1a:<16 hex digits>". Used to stamp
// input provenance into output artifacts.
std::string content_hash(const std::string& path);

// Resolved config + content hashes for the given input files.
std::string provenance_json(const RunConfig& config,
                            const std::vector<std::string>& input_files);

}  // namespace exqa::config
