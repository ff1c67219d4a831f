#include "cotc/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "cotc/hash.hpp"
#include "cotc/random.hpp"
#include "json.hpp"

namespace cotc {

using json = nlohmann::json;

void ChatRequest::validate() const {
    if (model_name.empty()) throw InvariantError("model_name", "must be nonempty");
    if (messages.empty()) throw InvariantError("messages", "must be nonempty");
    for (std::size_t i = 0; i < messages.size(); ++i) {
        if (messages[i].role == Role::System && i != 0) {
            throw InvariantError("messages", "system message must be first and unique");
        }
    }
    if (!(temperature >= 0.0 && temperature <= 2.0)) throw InvariantError("temperature", "must be in [0,2]");
    if (max_output_tokens <= 0) throw InvariantError("max_output_tokens", "must be positive");
}

void RetryPolicy::validate() const {
    if (max_attempts < 1) throw InvariantError("max_attempts", "must be positive");
    if (base_backoff.count() < 0) throw InvariantError("base_backoff", "must be nonnegative");
    if (!(jitter_fraction >= 0.0 && jitter_fraction <= 1.0)) {
        throw InvariantError("jitter_fraction", "must be in [0,1]");
    }
}

std::chrono::milliseconds RetryPolicy::delay_for(int retry, std::uint64_t jitter_seed) const {
    Rng rng(jitter_seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(retry)));
    const double u = uniform01(rng);
    const double exp = std::ldexp(1.0, std::clamp(retry - 1, 0, 30));
    const double ms = static_cast<double>(base_backoff.count()) * exp * (1.0 + jitter_fraction * u);
    return std::chrono::milliseconds(static_cast<std::int64_t>(std::floor(ms)));
}

std::string chat_request_body(const ChatRequest& request) {
    json msgs = json::array();
    for (const auto& m : request.messages) {
        json msg;
        msg["role"] = m.role == Role::System ? "system" : "user";
        if (m.image_ref) {
            msg["content"] = json::array({
                {{"type", "image_url"}, {"image_url", {{"url", *m.image_ref}}}},
                {{"type", "text"}, {"text", m.text}},
            });
        } else {
            msg["content"] = m.text;
        }
        msgs.push_back(std::move(msg));
    }
    json body = {
        {"model", request.model_name},
        {"messages", std::move(msgs)},
        {"temperature", request.temperature},
        {"max_tokens", request.max_output_tokens},
    };
    return body.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string request_hash(const ChatRequest& request) { return sha256_hex(chat_request_body(request)); }

ChatResponse parse_chat_response_body(const std::string& body) {
    try {
        const json j = json::parse(body);
        const auto& choice = j.at("choices").at(0);
        ChatResponse r;
        const auto& content = choice.at("message").at("content");
        r.text = content.is_null() ? std::string{} : content.get<std::string>();
        const std::string fr = choice.value("finish_reason", std::string("stop"));
        r.finish_reason = fr == "stop" ? FinishReason::Stop : fr == "length" ? FinishReason::Length
                                                                              : FinishReason::Error;
        if (auto it = j.find("usage"); it != j.end() && it->is_object()) {
            r.usage = Usage{it->value("prompt_tokens", std::int64_t{0}),
                            it->value("completion_tokens", std::int64_t{0})};
        }
        return r;
    } catch (const json::exception& e) {
        throw GatewayError(GatewayErrorKind::MalformedEndpointResponse,
                           std::string("malformed chat response: ") + e.what());
    }
}

std::string chat_response_body(const ChatResponse& response) {
    const char* fr = response.finish_reason == FinishReason::Stop     ? "stop"
                     : response.finish_reason == FinishReason::Length ? "length"
                                                                      : "error";
    json j = {{"object", "chat.completion"},
              {"choices", json::array({{{"index", 0},
                                        {"message", {{"role", "assistant"}, {"content", response.text}}},
                                        {"finish_reason", fr}}})}};
    if (response.usage) {
        j["usage"] = {{"prompt_tokens", response.usage->prompt_tokens},
                      {"completion_tokens", response.usage->completion_tokens}};
    }
    return j.dump();
}

Sleeper real_sleeper() {
    return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

namespace {

bool retryable(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }

}  // namespace

HttpResult post_with_retry(Transport& transport, const std::string& path, const std::string& body,
                           const RetryPolicy& policy, const Sleeper& sleeper, int* attempts_out) {
    policy.validate();
    const std::uint64_t jitter_seed = sha256_u64(body);
    HttpResult last;
    for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
        last = transport.post(path, body);
        if (attempts_out) *attempts_out = attempt;
        if (last.status >= 200 && last.status < 300) return last;
        if (last.status == 401 || last.status == 403) {
            throw GatewayError(GatewayErrorKind::AuthFailure, "authentication failed (HTTP " +
                                                                  std::to_string(last.status) + ")");
        }
        if (last.status == 404) {
            throw GatewayError(GatewayErrorKind::NotFound, "endpoint returned 404: " + last.body);
        }
        if (!retryable(last.status)) {
            throw GatewayError(GatewayErrorKind::InvalidRequest,
                               "HTTP " + std::to_string(last.status) + ": " + last.body);
        }
        if (attempt < policy.max_attempts) sleeper(policy.delay_for(attempt, jitter_seed));
    }
    throw GatewayError(GatewayErrorKind::AttemptsExhausted,
                       "gave up after " + std::to_string(policy.max_attempts) + " attempts (last status " +
                           std::to_string(last.status) + (last.body.empty() ? "" : ": " + last.body) + ")");
}

ChatClient::ChatClient(std::shared_ptr<Transport> transport, RetryPolicy policy, Sleeper sleeper)
    : transport_(std::move(transport)), policy_(policy), sleeper_(std::move(sleeper)) {
    policy_.validate();
}

ChatResponse ChatClient::complete(const ChatRequest& request, const RetryPolicy& policy) const {
    request.validate();
    int attempts = 0;
    const auto result = post_with_retry(*transport_, kChatPath, chat_request_body(request), policy, sleeper_,
                                        &attempts);
    ChatResponse r = parse_chat_response_body(result.body);
    r.attempts = attempts;
    return r;
}

EmbeddingClient::EmbeddingClient(std::shared_ptr<Transport> transport, std::string model_name,
                                 RetryPolicy policy, std::size_t batch_size, Sleeper sleeper)
    : transport_(std::move(transport)),
      model_name_(std::move(model_name)),
      policy_(policy),
      batch_size_(std::max<std::size_t>(1, batch_size)),
      sleeper_(std::move(sleeper)) {
    policy_.validate();
}

std::optional<std::size_t> EmbeddingClient::pinned_dim() const {
    std::lock_guard lock(mu_);
    return dim_;
}

std::vector<std::vector<double>> EmbeddingClient::embed_chunk(const std::vector<std::string>& texts) const {
    const json body = {{"model", model_name_}, {"input", texts}};
    const auto result = post_with_retry(*transport_, kEmbeddingsPath,
                                        body.dump(-1, ' ', false, json::error_handler_t::replace), policy_,
                                        sleeper_, nullptr);
    std::vector<std::vector<double>> out(texts.size());
    std::vector<bool> seen(texts.size(), false);
    try {
        const json j = json::parse(result.body);
        const auto& data = j.at("data");
        if (!data.is_array() || data.size() != texts.size()) {
            throw GatewayError(GatewayErrorKind::MalformedEndpointResponse,
                               "embedding response has " + std::to_string(data.size()) + " vectors for " +
                                   std::to_string(texts.size()) + " inputs");
        }
        for (std::size_t k = 0; k < data.size(); ++k) {
            const std::size_t idx = data[k].value("index", k);
            if (idx >= texts.size() || seen[idx]) {
                throw GatewayError(GatewayErrorKind::MalformedEndpointResponse, "bad embedding index");
            }
            seen[idx] = true;
            out[idx] = data[k].at("embedding").get<std::vector<double>>();
        }
    } catch (const json::exception& e) {
        throw GatewayError(GatewayErrorKind::MalformedEndpointResponse,
                           std::string("malformed embedding response: ") + e.what());
    }
    return out;
}

EmbeddingBatch EmbeddingClient::embed(const std::vector<std::string>& texts) const {
    if (texts.empty()) throw InvariantError("texts", "must be nonempty");
    for (const auto& t : texts) {
        if (t.empty()) throw InvariantError("texts", "every text must be nonempty");
    }
    EmbeddingBatch batch;
    batch.texts = texts;
    batch.vectors.reserve(texts.size());
    for (std::size_t start = 0; start < texts.size(); start += batch_size_) {
        const std::size_t end = std::min(texts.size(), start + batch_size_);
        auto chunk = embed_chunk({texts.begin() + static_cast<std::ptrdiff_t>(start),
                                  texts.begin() + static_cast<std::ptrdiff_t>(end)});
        for (auto& v : chunk) batch.vectors.push_back(std::move(v));
    }
    const std::size_t d = batch.vectors.front().size();
    for (const auto& v : batch.vectors) {
        if (v.size() != d || d == 0) {
            throw GatewayError(GatewayErrorKind::DimensionMismatch, "embedding endpoint returned ragged vectors");
        }
    }
    std::lock_guard lock(mu_);
    if (dim_ && *dim_ != d) {
        throw GatewayError(GatewayErrorKind::DimensionMismatch,
                           "embedding dimension changed from " + std::to_string(*dim_) + " to " + std::to_string(d));
    }
    dim_ = d;
    return batch;
}

}  // namespace cotc
