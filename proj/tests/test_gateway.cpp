#include <mutex>

#include "cotc/gateway.hpp"
#include "cotc/mock.hpp"
#include "cotc/parallel.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support.hpp"

using namespace cotc;
using json = nlohmann::json;

namespace {

ChatRequest teacher_like(const std::string& question) {
    ChatRequest r;
    r.model_name = "teacher";
    r.temperature = 0.5;
    r.max_output_tokens = 8192;
    r.messages.push_back({Role::System, "sys", std::nullopt});
    r.messages.push_back({Role::User, "### Question\n" + question + "\n### Output Format (Strictly Enforced)\n",
                          std::string("img/1.png")});
    return r;
}

ChatRequest plain(const std::string& text) {
    ChatRequest r;
    r.model_name = "m";
    r.messages.push_back({Role::User, text, std::nullopt});
    return r;
}

struct RecordingSleeper {
    std::shared_ptr<std::vector<std::chrono::milliseconds>> delays =
        std::make_shared<std::vector<std::chrono::milliseconds>>();
    Sleeper fn() const {
        auto d = delays;
        return [d](std::chrono::milliseconds ms) { d->push_back(ms); };
    }
};

std::shared_ptr<Transport> mock_transport(MockOptions opts = {}) {
    return std::make_shared<InProcessTransport>(std::make_shared<MockEndpoint>(opts));
}

// Fixed embedding replies regardless of input.
class CannedEmbeddings final : public Transport {
public:
    explicit CannedEmbeddings(std::vector<std::size_t> dims) : dims_(std::move(dims)) {}
    HttpResult post(const std::string&, const std::string& body) override {
        const auto j = json::parse(body);
        const auto d = dims_[std::min(call_++, dims_.size() - 1)];
        json data = json::array();
        for (std::size_t i = 0; i < j.at("input").size(); ++i) {
            data.push_back({{"index", i}, {"embedding", std::vector<double>(d, 1.0)}});
        }
        return {200, json{{"data", data}}.dump()};
    }

private:
    std::vector<std::size_t> dims_;
    std::size_t call_ = 0;
};

}  // namespace

TEST_CASE("chat request wire body") {
    const auto req = teacher_like("How many?");
    const auto body = json::parse(chat_request_body(req));
    CHECK(body.at("model") == "teacher");
    CHECK(body.at("temperature") == 0.5);
    CHECK(body.at("max_tokens") == 8192);
    CHECK(body.at("messages").size() == 2);
    CHECK(body.at("messages")[0].at("role") == "system");
    CHECK(body.at("messages")[0].at("content") == "sys");
    const auto& parts = body.at("messages")[1].at("content");
    REQUIRE(parts.is_array());
    CHECK(parts[0].at("type") == "image_url");
    CHECK(parts[0].at("image_url").at("url") == "img/1.png");
    CHECK(parts[1].at("type") == "text");
    CHECK(request_hash(req) == request_hash(teacher_like("How many?")));
    CHECK(request_hash(req) != request_hash(teacher_like("How many? ")));
}

TEST_CASE("chat request invariants") {
    auto r = plain("x");
    r.messages.push_back({Role::System, "late", std::nullopt});
    CHECK_THROWS_AS(r.validate(), InvariantError);
    r = plain("x");
    r.temperature = 2.5;
    CHECK_THROWS_AS(r.validate(), InvariantError);
    r = plain("x");
    r.max_output_tokens = 0;
    CHECK_THROWS_AS(r.validate(), InvariantError);
}

TEST_CASE("response body round trip") {
    ChatResponse r{"hello", FinishReason::Length, Usage{3, 4}, 1};
    CHECK(parse_chat_response_body(chat_response_body(r)) == r);
    CHECK_THROWS_AS(parse_chat_response_body("{\"choices\":[]}"), GatewayError);
}

TEST_CASE("transient failures are retried with growing backoff") {
    RecordingSleeper sleeper;
    auto faulty = std::make_shared<ScriptedFaultTransport>(mock_transport(), std::vector<int>{503, 429, 0});
    ChatClient client(faulty, RetryPolicy{}, sleeper.fn());
    const auto resp = client.complete(teacher_like("q"));
    CHECK(resp.attempts == 4);
    CHECK(faulty->calls() == 4);
    REQUIRE(sleeper.delays->size() == 3);
    CHECK((*sleeper.delays)[0] >= std::chrono::milliseconds(500));
    CHECK((*sleeper.delays)[0] < (*sleeper.delays)[1]);
    CHECK((*sleeper.delays)[1] < (*sleeper.delays)[2]);
}

TEST_CASE("attempt budget is bounded") {
    RecordingSleeper sleeper;
    auto faulty = std::make_shared<ScriptedFaultTransport>(mock_transport(), std::vector<int>(10, 500));
    ChatClient client(faulty, RetryPolicy{3, std::chrono::milliseconds(1), 0.0}, sleeper.fn());
    try {
        client.complete(teacher_like("q"));
        FAIL("expected AttemptsExhausted");
    } catch (const GatewayError& e) {
        CHECK(e.kind() == GatewayErrorKind::AttemptsExhausted);
        CHECK(e.family() == ErrorFamily::Gateway);
    }
    CHECK(faulty->calls() == 3);
    CHECK(sleeper.delays->size() == 2);
}

TEST_CASE("non-retryable statuses fail fast") {
    const std::vector<std::pair<int, GatewayErrorKind>> cases = {
        {401, GatewayErrorKind::AuthFailure},
        {403, GatewayErrorKind::AuthFailure},
        {400, GatewayErrorKind::InvalidRequest},
        {404, GatewayErrorKind::NotFound},
    };
    for (const auto& [status, kind] : cases) {
        auto faulty = std::make_shared<ScriptedFaultTransport>(mock_transport(), std::vector<int>{status});
        ChatClient client(faulty, RetryPolicy{}, [](auto) {});
        try {
            client.complete(teacher_like("q"));
            FAIL("expected an error");
        } catch (const GatewayError& e) {
            CHECK(e.kind() == kind);
        }
        CHECK(faulty->calls() == 1);
    }
}

TEST_CASE("backoff is monotone for any jitter") {
    Rng rng(17);
    for (int trial = 0; trial < 500; ++trial) {
        RetryPolicy p;
        p.base_backoff = std::chrono::milliseconds(1 + uniform_below(rng, 2000));
        p.jitter_fraction = uniform01(rng);
        const auto seed = rng();
        for (int k = 1; k < 10; ++k) CHECK(p.delay_for(k, seed) <= p.delay_for(k + 1, seed));
        CHECK(p.delay_for(1, seed) >= p.base_backoff);
    }
    RetryPolicy bad;
    bad.jitter_fraction = 1.5;
    CHECK_THROWS_AS(bad.validate(), InvariantError);
    bad = RetryPolicy{};
    bad.max_attempts = 0;
    CHECK_THROWS_AS(bad.validate(), InvariantError);
}

TEST_CASE("mock: fixture lookup by request hash, 404 when nothing matches") {
    auto endpoint = std::make_shared<MockEndpoint>(MockOptions{false, false, true, 8});
    const auto req = plain("hello there");
    endpoint->add_response(request_hash(req), ChatResponse{"fixture says hi", FinishReason::Stop, std::nullopt, 1});
    ChatClient client(std::make_shared<InProcessTransport>(endpoint), RetryPolicy{}, [](auto) {});
    CHECK(client.complete(req).text == "fixture says hi");
    try {
        client.complete(plain("something else"));
        FAIL("expected NotFound");
    } catch (const GatewayError& e) {
        CHECK(e.kind() == GatewayErrorKind::NotFound);
        CHECK(std::string(e.what()).find("fixture_not_found") != std::string::npos);
    }
}

TEST_CASE("mock: responses are a pure function of the request") {
    ChatClient a(mock_transport(), RetryPolicy{}, [](auto) {});
    ChatClient b(mock_transport(), RetryPolicy{}, [](auto) {});
    for (int i = 0; i < 30; ++i) {
        const auto req = teacher_like("question " + std::to_string(i));
        CHECK(a.complete(req) == b.complete(req));
    }
}

TEST_CASE("concurrent requests return in input order") {
    ChatClient client(mock_transport(), RetryPolicy{}, [](auto) {});
    std::vector<int> items(64);
    for (int i = 0; i < 64; ++i) items[i] = i;
    const auto one = [&](int i) { return client.complete(teacher_like("q" + std::to_string(i))).text; };
    const auto serial = parallel_map_ordered(items, 1, one);
    const auto parallel = parallel_map_ordered(items, 8, one);
    CHECK(serial == parallel);
}

TEST_CASE("parallel map rethrows the lowest failing index") {
    std::vector<int> items = {0, 1, 2, 3, 4, 5, 6, 7};
    try {
        parallel_map_ordered(items, 4, [](int i) -> int {
            if (i == 5 || i == 2) throw std::runtime_error("fail " + std::to_string(i));
            return i;
        });
        FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()) == "fail 2");
    }
}

TEST_CASE("embedding dimension is pinned") {
    EmbeddingClient client(std::make_shared<CannedEmbeddings>(std::vector<std::size_t>{3, 4}), "e", RetryPolicy{},
                           256, [](auto) {});
    CHECK(client.embed({"a", "b"}).dim() == 3);
    CHECK(client.pinned_dim() == 3u);
    try {
        client.embed({"c"});
        FAIL("expected DimensionMismatch");
    } catch (const GatewayError& e) {
        CHECK(e.kind() == GatewayErrorKind::DimensionMismatch);
    }
    CHECK_THROWS_AS(client.embed({}), InvariantError);
}

TEST_CASE("embeddings are batched and keep input order") {
    auto endpoint = std::make_shared<MockEndpoint>();
    EmbeddingClient client(std::make_shared<InProcessTransport>(endpoint), "e", RetryPolicy{}, 3, [](auto) {});
    std::vector<std::string> texts;
    for (int i = 0; i < 10; ++i) texts.push_back("tag" + std::to_string(i));
    const auto batch = client.embed(texts);
    REQUIRE(batch.vectors.size() == texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) CHECK(batch.vectors[i] == endpoint->embedding_for(texts[i]));
}

TEST_CASE("mock aliases sit close to their base vector") {
    auto endpoint = std::make_shared<MockEndpoint>();
    endpoint->add_alias("position", "spatial", 0.2);
    const auto a = endpoint->embedding_for("spatial");
    const auto b = endpoint->embedding_for("position");
    double dot = 0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    CHECK(1.0 - dot < 0.15);
    CHECK(1.0 - dot > 0.0);
}

TEST_CASE("mock server speaks the same contract over HTTP") {
    auto server = serve_mock(testing::fixture_dir() / "mock", 0);
    REQUIRE(server->port() > 0);
    auto http = make_http_transport(server->base_url(), "secret");
    ChatClient over_http(http, RetryPolicy{2, std::chrono::milliseconds(1), 0.0}, [](auto) {});
    ChatClient in_process(std::make_shared<InProcessTransport>(MockEndpoint::load(testing::fixture_dir() / "mock")),
                          RetryPolicy{}, [](auto) {});
    const auto req = teacher_like("How many apples?");
    CHECK(over_http.complete(req).text == in_process.complete(req).text);

    EmbeddingClient emb(http, "e", RetryPolicy{}, 256, [](auto) {});
    CHECK(emb.embed({"spatial", "position"}).dim() == 32);
    server->stop();
}

TEST_CASE("unreachable endpoint reports a transport failure") {
    auto http = make_http_transport("http://127.0.0.1:1", "", std::chrono::seconds(2));
    ChatClient client(http, RetryPolicy{2, std::chrono::milliseconds(1), 0.0}, [](auto) {});
    try {
        client.complete(plain("x"));
        FAIL("expected an error");
    } catch (const GatewayError& e) {
        CHECK(e.kind() == GatewayErrorKind::AttemptsExhausted);
    }
}
