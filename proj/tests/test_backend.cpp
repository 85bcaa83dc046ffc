#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <string>
#include <vector>

#include <json.hpp>

#include "dr/agent_backend.hpp"
#include "dr/errors.hpp"

using namespace dr;

TEST_CASE("token counter heuristic") {
    CHECK(approx_token_count("") == 0);
    CHECK(approx_token_count("12345678") == 2);
    CHECK(approx_token_count("123456789") == 3);
    CHECK(count_tokens(nullptr, "abcd") == 1);
    TokenCounter per_byte = [](std::string_view s) { return static_cast<std::int64_t>(s.size()); };
    CHECK(count_tokens(per_byte, "abcd") == 4);
}

TEST_CASE("token counter is monotone under concatenation") {
    const std::string parts[] = {"", "a", "hello world", std::string(37, 'x'), "\xc3\xa9"};
    for (const std::string& a : parts) {
        for (const std::string& b : parts) {
            const auto joined = approx_token_count(a + b);
            CHECK(joined >= approx_token_count(a));
            CHECK(joined >= approx_token_count(b));
        }
    }
}

TEST_CASE("replay backend answers by (agent, round)") {
    auto backend = ReplayBackend::from_jsonl(
        R"({"agent":"S","round":1,"text":"thinking...\nFinal Answer: B","completion_tokens":9})"
        "\n"
        R"({"agent":"S","round":2,"text":"again\nFinal Answer: B","completion_tokens":5})"
        "\n");
    Completion c = backend->complete({"prompt text", "S", 1, "", {}});
    CHECK(c.text == "thinking...\nFinal Answer: B");
    CHECK(c.completion_tokens == 9);
    CHECK(c.prompt_tokens == approx_token_count("prompt text"));

    // Referential transparency.
    Completion again = backend->complete({"prompt text", "S", 1, "", {}});
    CHECK(again.text == c.text);

    CHECK_THROWS_WITH_AS(backend->complete({"p", "T1", 1, "", {}}),
                         doctest::Contains("missing_fixture"), BackendError);
}

TEST_CASE("replay backend scope prefix and digest keying") {
    const std::string digest = prompt_digest("the exact prompt");
    auto backend = ReplayBackend::from_jsonl(
        R"({"agent":"p1/S","round":1,"text":"scoped","completion_tokens":1})"
        "\n"
        R"({"agent":"S","round":1,"text":"bare","completion_tokens":1})"
        "\n"
        R"({"agent":"d","round":9,"prompt_digest":")" +
        digest + R"(","text":"by digest","completion_tokens":1})" + "\n");

    CHECK(backend->complete({"p", "S", 1, "p1", {}}).text == "scoped");
    CHECK(backend->complete({"p", "S", 1, "", {}}).text == "bare");
    CHECK(backend->complete({"p", "S", 1, "p2", {}}).text == "bare");  // scope falls back
    CHECK(backend->complete({"the exact prompt", "anyone", 3, "", {}}).text == "by digest");
}

TEST_CASE("replay script errors") {
    CHECK_THROWS_AS(ReplayBackend::from_jsonl(""), ParseError);
    CHECK_THROWS_AS(ReplayBackend::from_jsonl("\n   \n"), ParseError);

    // Duplicate key.
    CHECK_THROWS_AS(ReplayBackend::from_jsonl(
                        R"({"agent":"S","round":1,"text":"a","completion_tokens":1})"
                        "\n"
                        R"({"agent":"S","round":1,"text":"b","completion_tokens":1})"
                        "\n"),
                    ParseError);

    // Parse errors carry the line number.
    try {
        ReplayBackend::from_jsonl(
            R"({"agent":"S","round":1,"text":"a","completion_tokens":1})"
            "\n{broken\n",
            "script.jsonl");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("script.jsonl:2") != std::string::npos);
    }

    // Unknown keys are rejected.
    CHECK_THROWS_AS(
        ReplayBackend::from_jsonl(
            R"({"agent":"S","round":1,"text":"a","completion_tokens":1,"extra":true})" "\n"),
        ParseError);
}

TEST_CASE("replay backend flags empty completions") {
    auto backend = ReplayBackend::from_jsonl(
        R"({"agent":"S","round":1,"text":"","completion_tokens":0})" "\n");
    CHECK_THROWS_AS(backend->complete({"p", "S", 1, "", {}}), EmptyCompletionError);
}

namespace {

struct FakeTransport {
    std::vector<HttpResponse> responses;
    std::atomic<int> calls{0};
    std::vector<std::string> bodies;

    HttpTransport fn() {
        return [this](const std::string&, const std::string&, const std::string& body) {
            bodies.push_back(body);
            const int i = calls.fetch_add(1);
            if (i >= static_cast<int>(responses.size())) {
                throw BackendError("transport exhausted");
            }
            return responses[i];
        };
    }
};

std::string ok_body(const std::string& text) {
    nlohmann::json j;
    j["choices"] = {{{"message", {{"role", "assistant"}, {"content", text}}}}};
    j["usage"] = {{"prompt_tokens", 12}, {"completion_tokens", 34}};
    return j.dump();
}

RetryPolicy fast_retry(int attempts) {
    RetryPolicy p;
    p.max_attempts = attempts;
    p.base_backoff = std::chrono::milliseconds(1);
    return p;
}

}  // namespace

TEST_CASE("remote backend retries retryable statuses with backoff") {
    FakeTransport transport;
    transport.responses = {{429, ""}, {429, ""}, {200, ok_body("fine\nFinal Answer: B")}};
    RemoteBackend backend("http://gw", "key", "m-large", fast_retry(3), 2, transport.fn());

    Completion c = backend.complete({"the prompt", "S", 1, "", GenConfig{0.3, 700, std::nullopt}});
    CHECK(c.text == "fine\nFinal Answer: B");
    CHECK(c.prompt_tokens == 12);
    CHECK(c.completion_tokens == 34);
    CHECK(transport.calls == 3);

    // Wire format: exactly the documented keys.
    nlohmann::json body = nlohmann::json::parse(transport.bodies[0]);
    CHECK(body.size() == 4);
    CHECK(body["model"] == "m-large");
    CHECK(body["messages"][0]["role"] == "user");
    CHECK(body["messages"][0]["content"] == "the prompt");
    CHECK(body["temperature"] == 0.3);
    CHECK(body["max_tokens"] == 700);
}

TEST_CASE("remote backend gives up after max_attempts") {
    FakeTransport transport;
    transport.responses = {{503, ""}, {503, ""}, {503, ""}, {200, ok_body("late")}};
    RemoteBackend backend("http://gw", "", "m", fast_retry(3), 1, transport.fn());
    CHECK_THROWS_AS(backend.complete({"p", "S", 1, "", {}}), BackendError);
    CHECK(transport.calls == 3);
}

TEST_CASE("remote backend does not retry non-retryable statuses") {
    FakeTransport transport;
    transport.responses = {{400, ""}, {200, ok_body("never")}};
    RemoteBackend backend("http://gw", "", "m", fast_retry(3), 1, transport.fn());
    CHECK_THROWS_AS(backend.complete({"p", "S", 1, "", {}}), BackendError);
    CHECK(transport.calls == 1);
}

TEST_CASE("remote backend estimates usage when the response omits it") {
    FakeTransport transport;
    nlohmann::json j;
    j["choices"] = {{{"message", {{"role", "assistant"}, {"content", "answer text"}}}}};
    transport.responses = {{200, j.dump()}};
    RemoteBackend backend("http://gw", "", "m", fast_retry(1), 1, transport.fn());
    Completion c = backend.complete({"12345678", "S", 1, "", {}});
    CHECK(c.prompt_tokens == 2);
    CHECK(c.completion_tokens == approx_token_count("answer text"));
}

TEST_CASE("remote backend reports empty completions distinctly") {
    FakeTransport transport;
    transport.responses = {{200, ok_body("")}};
    RemoteBackend backend("http://gw", "", "m", fast_retry(2), 1, transport.fn());
    CHECK_THROWS_AS(backend.complete({"p", "S", 1, "", {}}), EmptyCompletionError);
    CHECK(transport.calls == 1);  // an empty completion is not transient
}

TEST_CASE("transport exceptions count as retryable") {
    FakeTransport transport;
    transport.responses = {};  // every call throws
    RemoteBackend backend("http://gw", "", "m", fast_retry(2), 1, transport.fn());
    CHECK_THROWS_AS(backend.complete({"p", "S", 1, "", {}}), BackendError);
    CHECK(transport.calls == 2);
}

TEST_CASE("prompt digest is stable") {
    CHECK(prompt_digest("abc") == prompt_digest("abc"));
    CHECK(prompt_digest("abc") != prompt_digest("abd"));
    CHECK(prompt_digest("abc").size() == 16);
}

TEST_CASE("from_env requires DR_API_BASE") {
    unsetenv("DR_API_BASE");
    CHECK_THROWS_AS(RemoteBackend::from_env("m"), ConfigError);
    setenv("DR_API_BASE", "http://gateway:8080/v1", 1);
    setenv("DR_API_KEY", "k", 1);
    CHECK(RemoteBackend::from_env("m") != nullptr);
    unsetenv("DR_API_BASE");
    unsetenv("DR_API_KEY");
}
