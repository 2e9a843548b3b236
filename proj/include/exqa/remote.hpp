#pragma once

#include <memory>
#include <string>

#include "exqa/oracle.hpp"

namespace exqa::remote {

// POST /score with {"kind": ..., "question"?: ..., "text": ...}; the peer
// answers {"score": x} for scorers and {"answer": s} for oracles.
class RemoteClient {
public:
    RemoteClient(std::string endpoint, int timeout_seconds = 30);

    double acceptability(const std::string& text);
    std::string answer(const std::string& question, const std::string& explanation);

private:
    std::string post(const std::string& body);

    std::string host_;
    int port_{0};
    int timeout_seconds_{30};
};

class RemoteAcceptabilityScorer final : public AcceptabilityScorer {
public:
    RemoteAcceptabilityScorer(std::string endpoint, int timeout_seconds = 30)
        : client_(std::move(endpoint), timeout_seconds) {}
    double score(const std::string& text) override { return client_.acceptability(text); }

private:
    RemoteClient client_;
};

class RemoteAnswerOracle final : public AnswerOracle {
public:
    RemoteAnswerOracle(std::string endpoint, int timeout_seconds = 30)
        : client_(std::move(endpoint), timeout_seconds) {}
    std::string answer(const std::string& question, const std::string& explanation) override {
        return client_.answer(question, explanation);
    }

private:
    RemoteClient client_;
};

// Local oracle/scorer stub for integration tests: acceptability is always
// 1.0 and answers come from the synthetic rule oracle.
class StubServer {
public:
    StubServer();
    ~StubServer();
    StubServer(const StubServer&) = delete;
    StubServer& operator=(const StubServer&) = delete;

    // Binds to 127.0.0.1 on the given port (0 picks a free one) and serves
    // on a background thread until stop() or destruction.
    int start(int port = 0);
    void stop();
    int port() const { return port_; }
    std::string endpoint() const;

    // Serve on the calling thread (used by the CLI).
    bool listen_forever(int port);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int port_{0};
};

}  // namespace exqa::remote
