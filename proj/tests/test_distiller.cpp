#include <map>
#include <regex>
#include <set>

#include "cotc/distiller.hpp"
#include "cotc/mock.hpp"
#include "cotc/text.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "support.hpp"

using namespace cotc;
using oracle::mutated_trace;
using oracle::trim_copy;

namespace {

// Expected user turn, written out in full.
const std::string kExpectedQuery =
    "### Image\n"
    "<image>\n"
    "### Question\n"
    "How many red cubes are left of the sphere?\n"
    "### Output Format (Strictly Enforced)\n"
    "<think>\n"
    "Clearly explain your reasoning step by step. Describe how you arrived at the conclusion. "
    "The reasoning process MUST BE enclosed within <think> </think> tags.\n"
    "/<think>\n"
    "<answer>\n"
    "Your final answer to the user's question.\n"
    "</answer>";

SeedSample sample(const std::string& id, const std::string& question, const std::string& image = "img/a.png") {
    return SeedSample{id, "ds", "cat", image, question, std::nullopt};
}

std::size_t occurrences(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + needle.size())) ++n;
    return n;
}

// Split-on-whitespace oracle for ASCII text.
std::size_t split_count(const std::string& s) {
    std::size_t n = 0;
    bool in = false;
    for (unsigned char c : s) {
        const bool sp = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
        if (!sp && !in) ++n;
        in = !sp;
    }
    return n;
}


std::shared_ptr<MockEndpoint> strict_mock() { return std::make_shared<MockEndpoint>(MockOptions{false, false, true, 8}); }

ChatClient client_for(std::shared_ptr<MockEndpoint> endpoint) {
    return ChatClient(std::make_shared<InProcessTransport>(endpoint), RetryPolicy{}, [](auto) {});
}

}  // namespace

TEST_CASE("teacher prompt is rendered byte for byte") {
    const auto s = sample("s1", "How many red cubes are left of the sphere?");
    const TeacherConfig cfg;
    const auto req = render_teacher_prompt(s, cfg);
    REQUIRE(req.messages.size() == 2);
    CHECK(req.messages[0].role == Role::System);
    CHECK(req.messages[0].text ==
          "You are a helpful assistant to think step by step. Provide your reasoning steps within "
          "<think></think> tags and give your final answer within <answer></answer> tags.");
    CHECK(req.messages[1].role == Role::User);
    CHECK(req.messages[1].text == kExpectedQuery);
    CHECK(req.messages[1].image_ref == std::optional<std::string>("img/a.png"));
    CHECK(req.temperature == 0.5);
    CHECK(req.max_output_tokens == 8192);
    CHECK(request_hash(req) == request_hash(render_teacher_prompt(s, cfg)));

    CHECK_FALSE(render_teacher_prompt(sample("s2", "q", ""), cfg).messages[1].image_ref.has_value());

    TeacherConfig custom;
    custom.system_prompt = "be brief";
    custom.temperature = 0.9;
    const auto r2 = render_teacher_prompt(s, custom);
    CHECK(r2.messages[0].text == "be brief");
    CHECK(r2.temperature == 0.9);
    CHECK(r2.messages[1].text == kExpectedQuery);
}

TEST_CASE("question heading appears exactly once for any question") {
    Rng rng(21);
    for (int i = 0; i < 200; ++i) {
        const auto s = testing::random_seed_sample(rng, "q" + std::to_string(i));
        const auto text = render_teacher_prompt(s, {}).messages[1].text;
        CHECK(occurrences(text, "### Question") == 1);
        CHECK(text.find("### Question\n" + s.instruction + "\n") != std::string::npos);
    }
}

TEST_CASE("empty instruction is a precondition failure") {
    CHECK_THROWS_AS(render_teacher_prompt(sample("s", "   "), {}), InvariantError);
}

TEST_CASE("minimal well-formed trace") {
    const auto p = parse_structured_trace("<think>a b c</think><answer>c</answer>");
    REQUIRE(std::holds_alternative<DistilledTrace>(p));
    const auto& t = std::get<DistilledTrace>(p);
    CHECK(t.think_text == "a b c");
    CHECK(t.answer_text == "c");
    CHECK(t.token_count == 3);
    CHECK_FALSE(t.stray_text);
    CHECK(t.raw_text == "<think>a b c</think><answer>c</answer>");
}

TEST_CASE("typed parse errors") {
    const auto err = [](std::string_view raw) {
        const auto p = parse_structured_trace(raw);
        REQUIRE(std::holds_alternative<TraceError>(p));
        return std::get<TraceError>(p);
    };
    CHECK(err("<think>x</think><answer>a</answer><answer>b</answer>") == TraceError::DuplicateBlock);
    CHECK(err("no tags at all") == TraceError::MissingThink);
    CHECK(err("") == TraceError::MissingThink);
    CHECK(err("<think>x</think> then nothing") == TraceError::MissingAnswer);
    CHECK(err("<think>x <answer>a</answer>") == TraceError::UnclosedTag);
    CHECK(err("</think>x<think><answer>a</answer>") == TraceError::UnclosedTag);
    CHECK(err("<answer>a</answer><think>x</think>") == TraceError::AnswerBeforeThink);
}

TEST_CASE("whitespace around block contents is trimmed") {
    const auto p = parse_structured_trace("<think>\n  first\nsecond \n</think>\n<answer>\n 7 \n</answer>\n");
    REQUIRE(std::holds_alternative<DistilledTrace>(p));
    CHECK(std::get<DistilledTrace>(p).think_text == "first\nsecond");
    CHECK(std::get<DistilledTrace>(p).answer_text == "7");
    CHECK_FALSE(std::get<DistilledTrace>(p).stray_text);
}

TEST_CASE("stray text is flagged, or rejected in strict mode") {
    const std::string raw = "Sure! <think>x y</think> and <answer>z</answer>";
    const auto lenient = parse_structured_trace(raw);
    REQUIRE(std::holds_alternative<DistilledTrace>(lenient));
    CHECK(std::get<DistilledTrace>(lenient).stray_text);
    const auto strict = parse_structured_trace(raw, TraceParseOptions{true, {}});
    REQUIRE(std::holds_alternative<TraceError>(strict));
    CHECK(std::get<TraceError>(strict) == TraceError::StrayText);
    CHECK(std::holds_alternative<DistilledTrace>(
        parse_structured_trace("  <think>x</think>\n<answer>z</answer>\n", TraceParseOptions{true, {}})));
}

TEST_CASE("a substitute tokenizer can be plugged in") {
    TraceParseOptions opts;
    opts.tokenizer = [](std::string_view s) { return s.size(); };
    const auto p = parse_structured_trace("<think>abcd</think><answer>x</answer>", opts);
    CHECK(std::get<DistilledTrace>(p).token_count == 4);
}

TEST_CASE("mutation corpus agrees with the tag-sequence oracle") {
    Rng rng(314);
    int well_formed = 0, malformed = 0;
    for (int i = 0; i < 2000; ++i) {
        const auto raw = mutated_trace(rng);
        const auto expected = oracle::classify_trace(raw);
        const auto got = parse_structured_trace(raw);
        if (expected.error) {
            ++malformed;
            REQUIRE_MESSAGE(std::holds_alternative<TraceError>(got), raw);
            CHECK_MESSAGE(std::get<TraceError>(got) == *expected.error, raw);
        } else {
            ++well_formed;
            REQUIRE_MESSAGE(std::holds_alternative<DistilledTrace>(got), raw);
            const auto& t = std::get<DistilledTrace>(got);
            CHECK(t.think_text == expected.think);
            CHECK(t.answer_text == expected.answer);
            CHECK(t.stray_text == expected.stray);
            CHECK(t.raw_text == raw);
        }
    }
    CHECK(well_formed > 100);
    CHECK(malformed > 200);
}

TEST_CASE("parser is total over arbitrary bytes") {
    Rng rng(2718);
    const std::string alphabet = "<>/thinkaswer \n\xff";
    for (int i = 0; i < 3000; ++i) {
        std::string s;
        const auto n = uniform_below(rng, 60);
        for (std::size_t k = 0; k < n; ++k) s.push_back(alphabet[uniform_below(rng, alphabet.size())]);
        CHECK_NOTHROW(parse_structured_trace(s));
    }
}

TEST_CASE("count_tokens") {
    CHECK(count_tokens("") == 0);
    CHECK(count_tokens("one two  three") == 3);
    CHECK(count_tokens("  \n\t ") == 0);
    CHECK(count_tokens("\xe4\xb8\x80\xe4\xba\x8c\xe4\xb8\x89") == 3);          // three Han characters
    CHECK(count_tokens("abc\xe4\xb8\x80" "def") == 3);                         // CJK splits the run
    CHECK(count_tokens("a\xc2\xa0" "b\xe3\x80\x80" "c") == 3);                 // NBSP and ideographic space
    Rng rng(55);
    for (int i = 0; i < 500; ++i) {
        std::string s;
        const auto n = uniform_below(rng, 80);
        for (std::size_t k = 0; k < n; ++k) s.push_back(static_cast<char>(9 + uniform_below(rng, 118)));
        CHECK_MESSAGE(count_tokens(s) == split_count(s), s);
    }
}

TEST_CASE("token count grows with appended text") {
    Rng rng(56);
    for (int i = 0; i < 300; ++i) {
        const auto a = testing::random_words(rng, uniform_below(rng, 10));
        const auto b = testing::random_words(rng, uniform_below(rng, 10));
        CHECK(count_tokens(a + " " + b) >= count_tokens(a));
    }
}

TEST_CASE("distill with a well-formed mock reply") {
    auto endpoint = strict_mock();
    const CuratedRecord rec(sample("d1", "What is shown?"));
    const auto req = render_teacher_prompt(rec.seed, {});
    const std::string raw = "<think>\nit is a cat on a mat\n</think>\n<answer>\ncat\n</answer>";
    endpoint->add_response(request_hash(req), ChatResponse{raw, FinishReason::Stop, std::nullopt, 1});
    const auto out = distill(rec, {}, client_for(endpoint));
    CHECK(out.status() == Status::Distilled);
    REQUIRE(out.trace.has_value());
    CHECK(out.trace->raw_text == raw);
    CHECK(out.trace->answer_text == "cat");
    CHECK(out.trace->token_count == 7);
}

TEST_CASE("distill rejects untagged prose and notes truncation") {
    auto endpoint = strict_mock();
    const CuratedRecord a(sample("d1", "first?")), b(sample("d2", "second?"));
    endpoint->add_response(request_hash(render_teacher_prompt(a.seed, {})),
                           ChatResponse{"I think it is a dog.", FinishReason::Stop, std::nullopt, 1});
    endpoint->add_response(request_hash(render_teacher_prompt(b.seed, {})),
                           ChatResponse{"<think>long long", FinishReason::Length, std::nullopt, 1});
    const auto ra = distill(a, {}, client_for(endpoint));
    CHECK(ra.status() == Status::Rejected);
    CHECK(ra.reject_reason()->code == RejectCode::MissingTags);
    const auto rb = distill(b, {}, client_for(endpoint));
    CHECK(rb.reject_reason()->code == RejectCode::MissingTags);
    CHECK(rb.reject_reason()->detail.find("max tokens") != std::string::npos);
}

TEST_CASE("planted malformed replies are exactly the rejects") {
    auto endpoint = strict_mock();
    const std::set<int> planted = {3, 17, 28, 44, 61, 79, 95};
    std::vector<CuratedRecord> records;
    for (int i = 0; i < 100; ++i) {
        records.emplace_back(sample(testing::padded_id(static_cast<std::size_t>(i)), "question " + std::to_string(i)));
        const auto raw = planted.count(i) ? std::string("<think>dangling</think> no answer here")
                                          : "<think>step " + std::to_string(i) + "</think><answer>x</answer>";
        endpoint->add_response(request_hash(render_teacher_prompt(records.back().seed, {})),
                               ChatResponse{raw, FinishReason::Stop, std::nullopt, 1});
    }
    const auto client = client_for(endpoint);
    int distilled = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto out = distill(records[i], {}, client);
        if (out.status() == Status::Distilled) ++distilled;
        CHECK((out.status() == Status::Rejected) == (planted.count(static_cast<int>(i)) == 1));
    }
    CHECK(distilled == 93);
}

TEST_CASE("gateway failure leaves the record seeded") {
    auto endpoint = strict_mock();  // no fixtures and no fallback: every call is a 404
    const CuratedRecord rec(sample("g1", "anything"));
    CHECK_THROWS_AS(distill(rec, {}, client_for(endpoint)), GatewayError);
    CHECK(rec.status() == Status::Seeded);
    CuratedRecord done(sample("g2", "x"));
    done.reject(RejectCode::MissingTags);
    CHECK_THROWS_AS(distill(done, {}, client_for(endpoint)), InvariantError);
}
