#include "exqa/remote.hpp"

#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "exqa/corpus.hpp"

namespace exqa::remote {

using nlohmann::json;

namespace {

// Accepts "host:port" or "http://host:port".
void parse_endpoint(const std::string& endpoint, std::string& host, int& port) {
    std::string rest = endpoint;
    const std::string scheme = "http://";
    if (rest.rfind(scheme, 0) == 0) rest = rest.substr(scheme.size());
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos) {
        throw std::invalid_argument("endpoint must be host:port, got " + endpoint);
    }
    host = rest.substr(0, colon);
    port = std::stoi(rest.substr(colon + 1));
}

}  // namespace

RemoteClient::RemoteClient(std::string endpoint, int timeout_seconds)
    : timeout_seconds_(timeout_seconds) {
    parse_endpoint(endpoint, host_, port_);
}

std::string RemoteClient::post(const std::string& body) {
    httplib::Client client(host_, port_);
    client.set_connection_timeout(timeout_seconds_, 0);
    client.set_read_timeout(timeout_seconds_, 0);
    auto res = client.Post("/score", body, "application/json");
    if (!res) {
        throw RewardUnavailableError("scorer endpoint unreachable: " + host_ + ":" +
                                     std::to_string(port_));
    }
    if (res->status != 200) {
        throw ProtocolError("scorer endpoint returned status " + std::to_string(res->status));
    }
    return res->body;
}

double RemoteClient::acceptability(const std::string& text) {
    json req{{"kind", "acceptability"}, {"text", text}};
    json res;
    try {
        res = json::parse(post(req.dump()));
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed scorer response: ") + e.what());
    }
    if (!res.is_object() || !res.contains("score") || !res["score"].is_number()) {
        throw ProtocolError("scorer response missing numeric 'score'");
    }
    return res["score"].get<double>();
}

std::string RemoteClient::answer(const std::string& question, const std::string& explanation) {
    json req{{"kind", "answer_oracle"}, {"question", question}, {"text", explanation}};
    json res;
    try {
        res = json::parse(post(req.dump()));
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed oracle response: ") + e.what());
    }
    if (!res.is_object() || !res.contains("answer") || !res["answer"].is_string()) {
        throw ProtocolError("oracle response missing string 'answer'");
    }
    return res["answer"].get<std::string>();
}

struct StubServer::Impl {
    httplib::Server server;
    std::thread thread;

    Impl() {
        server.Post("/score", [](const httplib::Request& req, httplib::Response& res) {
            json body;
            try {
                body = json::parse(req.body);
            } catch (const json::exception&) {
                res.status = 400;
                res.set_content("{\"error\":\"invalid json\"}", "application/json");
                return;
            }
            const std::string kind = body.value("kind", "");
            if (kind == "acceptability") {
                res.set_content(json{{"score", 1.0}}.dump(), "application/json");
            } else if (kind == "answer_oracle") {
                const std::string answer = corpus::synthetic_answer_oracle(
                    body.value("question", ""), body.value("text", ""));
                res.set_content(json{{"answer", answer}}.dump(), "application/json");
            } else {
                res.status = 400;
                res.set_content("{\"error\":\"unknown kind\"}", "application/json");
            }
        });
    }
};

StubServer::StubServer() : impl_(std::make_unique<Impl>()) {}

StubServer::~StubServer() { stop(); }

int StubServer::start(int port) {
    if (port == 0) {
        port_ = impl_->server.bind_to_any_port("127.0.0.1");
    } else {
        if (!impl_->server.bind_to_port("127.0.0.1", port)) {
            throw std::runtime_error("stub server: cannot bind port " + std::to_string(port));
        }
        port_ = port;
    }
    impl_->thread = std::thread([this]() { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return port_;
}

void StubServer::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
    if (impl_ && impl_->thread.joinable()) impl_->thread.join();
}

std::string StubServer::endpoint() const {
    return "127.0.0.1:" + std::to_string(port_);
}

bool StubServer::listen_forever(int port) {
    port_ = port;
    return impl_->server.listen("127.0.0.1", port);
}

}  // namespace exqa::remote
