#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "exqa/oracle.hpp"
#include "exqa/rewards.hpp"
#include "exqa/rng.hpp"
#include "exqa/textkit.hpp"

namespace exqa::explainer {

// Word-level vocabulary with reserved ids for the special tokens.
struct Vocab {
    static constexpr int pad = 0;
    static constexpr int bos = 1;
    static constexpr int eos = 2;
    static constexpr int sep = 3;
    static constexpr int unk = 4;

    std::vector<std::string> id_to_token;
    std::unordered_map<std::string, int> token_to_id;

    int size() const { return static_cast<int>(id_to_token.size()); }
    int id(const std::string& token) const;
    const std::string& token(int id) const { return id_to_token[static_cast<std::size_t>(id)]; }

    // Frequency-ranked vocabulary over whitespace-split tokens of texts,
    // ties broken alphabetically. max_size includes the special tokens.
    static Vocab build(const std::vector<std::string>& texts, std::size_t max_size = 20000);
};

struct ModelConfig {
    int embed_dim{32};
    int hidden_dim{64};
    int max_input_tokens{192};
};

// Single-layer GRU encoder-decoder with dot-product attention, all
// parameters in one flat double array addressed through named views.
struct ExplainerModel {
    struct ParamEntry {
        std::string name;
        std::size_t offset{0};
        std::size_t rows{0};
        std::size_t cols{0};
        std::size_t count() const { return rows * cols; }
    };

    Vocab vocab;
    ModelConfig cfg;
    std::vector<double> params;
    std::vector<ParamEntry> layout;
    std::uint64_t rng_state{0};

    static ExplainerModel init(Vocab vocab, ModelConfig cfg, std::uint64_t seed);

    const ParamEntry& entry(const std::string& name) const;
    std::span<const double> view(const std::string& name) const;
    std::span<double> view(const std::string& name);
    std::size_t param_count() const { return params.size(); }
};

struct EncodedInput {
    std::vector<int> ids;
    bool truncated{false};
    int unknown_count{0};
};

// [bos] question [sep] paragraphs [eos], truncated to the model input limit
// with the final eos kept. Throws on an empty question.
EncodedInput encode_input(const Vocab& vocab, const ModelConfig& cfg,
                          const text::TokenSequence& question,
                          const text::TokenSequence& paragraphs);

struct Decoded {
    std::vector<int> ids;               // generated ids, including final eos if emitted
    std::vector<double> token_logprobs; // under the distribution decoded from
    double seq_logprob{0.0};
    std::string text(const Vocab& vocab) const;  // special tokens skipped
};

Decoded decode_greedy(const ExplainerModel& model, const std::vector<int>& input, int limit);

Decoded decode_sample(const ExplainerModel& model, const std::vector<int>& input,
                      double temperature, int limit, Rng& rng);

// Teacher-forced sum of per-token negative log-likelihoods of target under
// softmax(logits / temperature).
double sequence_nll(const ExplainerModel& model, const std::vector<int>& input,
                    const std::vector<int>& target, double temperature);

// Accumulates weight * d(sequence_nll)/dtheta into grad (size = params).
double sequence_nll_backward(const ExplainerModel& model, const std::vector<int>& input,
                             const std::vector<int>& target, double temperature,
                             double weight, std::vector<double>& grad);

struct LossGrads {
    double loss{0.0};
    std::vector<double> grads;
};

struct MLItem {
    std::vector<int> input;
    std::vector<int> gold;  // gold explanation ids, eos-terminated
};

// Mean negative log-likelihood per gold token over the batch, with
// gradients. Throws when the batch carries no gold tokens.
LossGrads loss_ml(const ExplainerModel& model, const std::vector<MLItem>& batch);

struct RLItem {
    std::vector<int> input;
    std::vector<int> sampled;          // eos-terminated sample from this snapshot
    double sampled_seq_logprob{0.0};   // recorded at sampling time
    double reward_sampled{0.0};
    double reward_greedy{0.0};
};

// Self-critical surrogate: mean over the batch of A * (mean NLL of the
// sampled tokens), A = max(r(sampled) - r(greedy), advantage_clip_min).
// Verifies each sample came from the current parameter snapshot.
LossGrads loss_rl(const ExplainerModel& model, const std::vector<RLItem>& batch,
                  const reward::RLConfig& config);

struct TrainConfig {
    int batch_size{8};
    double learning_rate{2e-3};
    std::string optimizer{"adam"};  // "adam" or "sgd"
    int max_epochs{60};
    int validate_every{0};          // in update steps; 0 = once per epoch
    int patience{5};
    std::uint64_t rng_seed{123};
};

// One instance prepared for training: encoder input, optional gold target,
// and everything the reward function needs.
struct TrainItem {
    std::string id;
    std::vector<int> input;
    std::optional<std::vector<int>> gold;
    reward::RewardContext reward_ctx;
};

// Stop after `patience` consecutive checks without improvement.
class EarlyStopper {
public:
    explicit EarlyStopper(int patience) : patience_(patience) {}

    // Returns true when training should stop after observing this value.
    bool observe(double value) {
        if (!has_best_ || value < best_) {
            best_ = value;
            has_best_ = true;
            fails_ = 0;
            return false;
        }
        ++fails_;
        return fails_ >= patience_;
    }

    bool improved_last() const { return fails_ == 0; }
    double best() const { return best_; }

private:
    int patience_;
    int fails_{0};
    double best_{0.0};
    bool has_best_{false};
};

struct SupervisedResult {
    ExplainerModel model;               // best checkpoint by validation NLL
    double best_val_nll{0.0};
    int steps{0};
    int validation_checks{0};
    bool early_stopped{false};
};

// Teacher-forcing training with periodic validation and early stopping
// after `patience` consecutive non-improving checks. Throws when the
// validation split is empty or no item has a gold target.
SupervisedResult train_supervised(ExplainerModel model,
                                  const std::vector<TrainItem>& train,
                                  const std::vector<TrainItem>& val,
                                  const TrainConfig& config);

struct StepDiagnostics {
    double loss_rl{0.0};
    double loss_ml{0.0};
    double mean_reward_sampled{0.0};
    double mean_reward_greedy{0.0};
    std::map<std::string, double> elemental_means;  // over sampled explanations
    int batch_size{0};
    int ml_items{0};
};

// Owns the optimizer state for joint RL+ML training; one step() call is one
// gradient update on L_RL + lambda * L_ML.
class JointTrainer {
public:
    JointTrainer(ExplainerModel model, TrainConfig train_cfg, reward::RLConfig rl_cfg,
                 AnswerOracle& oracle, AcceptabilityScorer& acceptability);

    StepDiagnostics step(const std::vector<const TrainItem*>& batch);

    const ExplainerModel& model() const { return model_; }
    ExplainerModel take_model() { return std::move(model_); }
    Rng& rng() { return rng_; }

private:
    void apply_update(const std::vector<double>& grads);

    ExplainerModel model_;
    TrainConfig train_cfg_;
    reward::RLConfig rl_cfg_;
    AnswerOracle& oracle_;
    AcceptabilityScorer& acceptability_;
    Rng rng_;
    std::vector<double> adam_m_;
    std::vector<double> adam_v_;
    long long adam_t_{0};
};

// Versioned checkpoint: vocab + named parameter arrays + caller-provided
// config echo. Round-trips bit-exactly.
void save_checkpoint(const ExplainerModel& model, const std::string& path,
                     const std::string& config_echo_json);
ExplainerModel load_checkpoint(const std::string& path, std::string* config_echo_json = nullptr);

}  // namespace exqa::explainer
