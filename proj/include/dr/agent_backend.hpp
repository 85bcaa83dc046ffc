#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace dr {

/// Generation knobs shared by every completion call.
struct GenConfig {
    double temperature = 0.3;
    int max_tokens = 700;
    std::optional<int> soft_word_limit;

    friend bool operator==(const GenConfig&, const GenConfig&) = default;
};

struct Completion {
    std::string text;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
};

/// Retry contract for remote backends. `retryable` holds exact HTTP status
/// codes (e.g. 429) or class digits (5 means any 5xx). Transport-level
/// failures are always treated as retryable.
struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds base_backoff{250};
    std::set<int> retryable{429, 5};
};

/// One completion request. `agent` and `round` are the replay routing key;
/// `scope` (usually the problem id) namespaces keys when one script serves
/// several debates. Remote backends only read `prompt` and `gen`.
struct CompletionRequest {
    std::string prompt;
    std::string agent;
    int round = 1;
    std::string scope;
    GenConfig gen;
};

/// Uniform completion interface. Implementations are thread-safe.
class Backend {
  public:
    virtual ~Backend() = default;
    virtual Completion complete(const CompletionRequest& request) = 0;
};

using TokenCounter = std::function<std::int64_t(std::string_view)>;

/// Default deterministic counter: ceil(utf8 bytes / 4).
std::int64_t approx_token_count(std::string_view text);
TokenCounter default_token_counter();

/// Counts with `counter`, falling back to the byte heuristic when empty.
std::int64_t count_tokens(const TokenCounter& counter, std::string_view text);

/// FNV-1a 64-bit digest of the prompt bytes, as 16 lowercase hex chars.
/// Replay scripts may key records on this instead of (agent, round).
std::string prompt_digest(std::string_view prompt);

/// Deterministic backend answering from a JSONL script. One record per line:
/// {"agent","round","text","completion_tokens"} plus optional
/// "prompt_digest". Lookup order: prompt digest, then ("scope/agent", round),
/// then (agent, round). Identical scripts yield byte-identical debates.
class ReplayBackend final : public Backend {
  public:
    static std::shared_ptr<ReplayBackend> load_script(const std::string& path);
    static std::shared_ptr<ReplayBackend> from_jsonl(const std::string& jsonl,
                                                     const std::string& origin = "<memory>");

    Completion complete(const CompletionRequest& request) override;
    size_t size() const { return by_agent_round_.size() + by_digest_.size(); }

  private:
    struct Record {
        std::string text;
        std::int64_t completion_tokens = 0;
    };

    std::map<std::pair<std::string, int>, Record> by_agent_round_;
    std::map<std::string, Record> by_digest_;
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// Pluggable transport: POST `body` to `url` with a bearer `api_key`.
/// Throws BackendError on network failure.
using HttpTransport =
    std::function<HttpResponse(const std::string& url, const std::string& api_key, const std::string& body)>;

/// Chat-completion client for any service speaking the de-facto wire schema:
/// request {"model","messages":[{"role","content"}],"temperature","max_tokens"},
/// response parsed from the first choice's message content plus usage counts.
class RemoteBackend final : public Backend {
  public:
    RemoteBackend(std::string base_url, std::string api_key, std::string model,
                  RetryPolicy retry = {}, int max_concurrency = 4, HttpTransport transport = nullptr);

    /// Reads DR_API_BASE and DR_API_KEY.
    static std::shared_ptr<RemoteBackend> from_env(const std::string& model, RetryPolicy retry = {});

    Completion complete(const CompletionRequest& request) override;

  private:
    std::string base_url_;
    std::string api_key_;
    std::string model_;
    RetryPolicy retry_;
    HttpTransport transport_;
    std::shared_ptr<class ConcurrencyLimiter> limiter_;
};

}  // namespace dr
