#pragma once

#include <cstddef>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "cotc/gateway.hpp"

namespace cotc {

// Deterministic unit vector seeded by SHA-256 of `text`.
std::vector<double> hashed_unit_vector(std::string_view text, std::size_t dim);

struct MockOptions {
    bool teacher_fallback = true;   // synthesize traces for unmatched teacher prompts
    bool scorer_fallback = true;    // synthesize rubric JSON for unmatched scorer prompts
    bool embedding_fallback = true; // hashed unit vectors for texts without a fixture
    std::size_t embedding_dim = 32;
};

// Speaks the chat/embeddings wire contract from fixtures:
//
//   <dir>/mock.json         {"fallback": {"teacher": b, "scorer": b, "embeddings": b},
//                            "embedding_dim": n}
//   <dir>/responses.jsonl   {"request_hash": H, "text": T, "finish_reason": "stop"}
//   <dir>/embeddings.jsonl  {"text": t, "vector": [...]}
//                           {"text": t, "alias_of": s, "perturb": p}
//
// All files are optional. Responses are a pure function of fixtures + request.
class MockEndpoint {
public:
    explicit MockEndpoint(MockOptions options = {});
    static std::shared_ptr<MockEndpoint> load(const std::filesystem::path& fixture_dir);

    void add_response(std::string request_hash, ChatResponse response);
    void add_embedding(std::string text, std::vector<double> vector);
    void add_alias(std::string text, std::string alias_of, double perturb);

    HttpResult handle(const std::string& path, const std::string& body) const;

    std::vector<double> embedding_for(const std::string& text) const;
    const MockOptions& options() const { return options_; }

private:
    HttpResult handle_chat(const std::string& body) const;
    HttpResult handle_embeddings(const std::string& body) const;
    std::vector<double> resolve_embedding(const std::string& text, int depth) const;

    MockOptions options_;
    std::map<std::string, ChatResponse> responses_;
    std::map<std::string, std::vector<double>> embeddings_;
    std::map<std::string, std::pair<std::string, double>> aliases_;
};

// Calls the mock directly, no sockets.
class InProcessTransport final : public Transport {
public:
    explicit InProcessTransport(std::shared_ptr<const MockEndpoint> endpoint) : endpoint_(std::move(endpoint)) {}
    HttpResult post(const std::string& path, const std::string& body) override {
        return endpoint_->handle(path, body);
    }

private:
    std::shared_ptr<const MockEndpoint> endpoint_;
};

// Fault injection: replays `script` statuses (0 = transport failure) for the
// first calls, then forwards to `inner`. Counts every call.
class ScriptedFaultTransport final : public Transport {
public:
    ScriptedFaultTransport(std::shared_ptr<Transport> inner, std::vector<int> script);
    HttpResult post(const std::string& path, const std::string& body) override;
    std::size_t calls() const;

private:
    std::shared_ptr<Transport> inner_;
    mutable std::mutex mu_;
    std::deque<int> script_;
    std::size_t calls_ = 0;
};

// Local HTTP server wrapping a MockEndpoint on 127.0.0.1.
class MockServer {
public:
    MockServer(std::shared_ptr<const MockEndpoint> endpoint, int port);
    ~MockServer();
    MockServer(const MockServer&) = delete;
    MockServer& operator=(const MockServer&) = delete;

    int port() const { return port_; }
    std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }
    void wait();  // blocks until stop()
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int port_ = 0;
    std::thread thread_;
};

// port 0 binds an ephemeral port.
std::unique_ptr<MockServer> serve_mock(const std::filesystem::path& fixture_dir, int port = 0);

}  // namespace cotc
