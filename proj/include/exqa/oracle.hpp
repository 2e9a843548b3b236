#pragma once

#include <stdexcept>
#include <string>

namespace exqa {

// A model-backed scorer or answerer was needed but could not be reached.
// Training must abort on this rather than substitute a silent zero.
struct RewardUnavailableError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The remote peer answered, but not in the agreed shape or range.
struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Answers a question from an explanation alone. The interface deliberately
// has no paragraph parameter: whatever implements it can only ever see the
// question and the generated explanation.
class AnswerOracle {
public:
    virtual ~AnswerOracle() = default;
    virtual std::string answer(const std::string& question,
                               const std::string& explanation) = 0;
};

// Probability-of-acceptable for a piece of text, in [0, 1].
class AcceptabilityScorer {
public:
    virtual ~AcceptabilityScorer() = default;
    virtual double score(const std::string& text) = 0;
};

// Always returns 1.0, which is neutral under the geometric mean.
class BuiltinAcceptabilityScorer final : public AcceptabilityScorer {
public:
    double score(const std::string&) override { return 1.0; }
};

enum class ScorerKind { acceptability, answer_oracle };

// Locator for a model-backed scorer: "builtin" or a remote endpoint.
struct ScorerHandle {
    ScorerKind kind{ScorerKind::acceptability};
    std::string endpoint{"builtin"};

    bool builtin() const { return endpoint == "builtin"; }
};

}  // namespace exqa
