#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "cotc/error.hpp"

namespace cotc {

enum class Role { System, User };

struct Message {
    Role role = Role::User;
    std::string text;
    std::optional<std::string> image_ref;  // sent as a URI content part

    bool operator==(const Message&) const = default;
};

struct ChatRequest {
    std::string model_name;
    std::vector<Message> messages;
    double temperature = 0.0;
    int max_output_tokens = 1;

    void validate() const;
    bool operator==(const ChatRequest&) const = default;
};

enum class FinishReason { Stop, Length, Error };

struct Usage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    bool operator==(const Usage&) const = default;
};

struct ChatResponse {
    std::string text;
    FinishReason finish_reason = FinishReason::Stop;
    std::optional<Usage> usage;
    int attempts = 1;  // transport attempts spent on this logical request

    bool operator==(const ChatResponse&) const = default;
};

struct EmbeddingBatch {
    std::vector<std::string> texts;
    std::vector<std::vector<double>> vectors;

    std::size_t dim() const { return vectors.empty() ? 0 : vectors.front().size(); }
};

struct RetryPolicy {
    int max_attempts = 4;
    std::chrono::milliseconds base_backoff{500};
    double jitter_fraction = 0.2;

    void validate() const;
    // Delay before retry number `retry` (1 = after the first failure). Grows
    // monotonically in `retry` for any jitter_fraction in [0,1].
    std::chrono::milliseconds delay_for(int retry, std::uint64_t jitter_seed) const;
};

enum class GatewayErrorKind {
    AttemptsExhausted,
    AuthFailure,
    MalformedEndpointResponse,
    NotFound,
    DimensionMismatch,
    InvalidRequest,
};

class GatewayError : public Error {
public:
    GatewayError(GatewayErrorKind kind, const std::string& what)
        : Error(ErrorFamily::Gateway, what), kind_(kind) {}
    GatewayErrorKind kind() const noexcept { return kind_; }

private:
    GatewayErrorKind kind_;
};

// One POST on the wire. status 0 means the transport itself failed.
struct HttpResult {
    int status = 0;
    std::string body;
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResult post(const std::string& path, const std::string& body) = 0;
};

// Real endpoint over HTTP(S). `api_key` goes into a Bearer header when nonempty.
std::shared_ptr<Transport> make_http_transport(const std::string& base_url, const std::string& api_key,
                                               std::chrono::seconds timeout = std::chrono::seconds(600));

inline constexpr const char* kChatPath = "/v1/chat/completions";
inline constexpr const char* kEmbeddingsPath = "/v1/embeddings";

// Chat-completions wire body. Canonical (sorted keys), so its hash identifies
// a logical request.
std::string chat_request_body(const ChatRequest& request);
std::string request_hash(const ChatRequest& request);
ChatResponse parse_chat_response_body(const std::string& body);
std::string chat_response_body(const ChatResponse& response);

using Sleeper = std::function<void(std::chrono::milliseconds)>;
Sleeper real_sleeper();

class ChatClient {
public:
    ChatClient(std::shared_ptr<Transport> transport, RetryPolicy policy, Sleeper sleeper = real_sleeper());

    ChatResponse complete(const ChatRequest& request) const { return complete(request, policy_); }
    ChatResponse complete(const ChatRequest& request, const RetryPolicy& policy) const;

private:
    std::shared_ptr<Transport> transport_;
    RetryPolicy policy_;
    Sleeper sleeper_;
};

// Embedder role. Vector dimension is pinned by the first batch and enforced
// for the lifetime of the client.
class EmbeddingClient {
public:
    EmbeddingClient(std::shared_ptr<Transport> transport, std::string model_name, RetryPolicy policy,
                    std::size_t batch_size = 256, Sleeper sleeper = real_sleeper());

    EmbeddingBatch embed(const std::vector<std::string>& texts) const;
    std::optional<std::size_t> pinned_dim() const;

private:
    std::vector<std::vector<double>> embed_chunk(const std::vector<std::string>& texts) const;

    std::shared_ptr<Transport> transport_;
    std::string model_name_;
    RetryPolicy policy_;
    std::size_t batch_size_;
    Sleeper sleeper_;
    mutable std::mutex mu_;
    mutable std::optional<std::size_t> dim_;
};

// Shared retry loop: retries transport failures, 408, 429 and 5xx.
HttpResult post_with_retry(Transport& transport, const std::string& path, const std::string& body,
                           const RetryPolicy& policy, const Sleeper& sleeper, int* attempts_out);

}  // namespace cotc
