#include "dr/agent_backend.hpp"

#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "dr/errors.hpp"
#include "dr/json_util.hpp"

namespace dr {

std::int64_t approx_token_count(std::string_view text) {
    return static_cast<std::int64_t>((text.size() + 3) / 4);
}

TokenCounter default_token_counter() {
    return [](std::string_view s) { return approx_token_count(s); };
}

std::int64_t count_tokens(const TokenCounter& counter, std::string_view text) {
    return counter ? counter(text) : approx_token_count(text);
}

std::string prompt_digest(std::string_view prompt) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : prompt) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    static const char* hex = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = hex[h & 0xF];
        h >>= 4;
    }
    return out;
}

std::shared_ptr<ReplayBackend> ReplayBackend::load_script(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("replay script: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_jsonl(buf.str(), path);
}

std::shared_ptr<ReplayBackend> ReplayBackend::from_jsonl(const std::string& jsonl,
                                                         const std::string& origin) {
    auto backend = std::make_shared<ReplayBackend>();
    std::istringstream in(jsonl);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = origin + ":" + std::to_string(line_no);
        jsonu::json rec = jsonu::parse(line, where);
        jsonu::require_keys(rec, {"agent", "round", "text", "completion_tokens"}, {"prompt_digest"},
                            where);
        Record r;
        r.text = jsonu::get_string(rec, "text", where);
        r.completion_tokens = jsonu::get_int(rec, "completion_tokens", where);
        const std::string agent = jsonu::get_string(rec, "agent", where);
        const int round = static_cast<int>(jsonu::get_int(rec, "round", where));
        if (round < 1) throw ParseError(where + ": round must be >= 1");
        if (!backend->by_agent_round_.emplace(std::make_pair(agent, round), r).second) {
            throw ParseError(where + ": duplicate key (" + agent + ", " + std::to_string(round) + ")");
        }
        if (rec.contains("prompt_digest")) {
            const std::string digest = jsonu::get_string(rec, "prompt_digest", where);
            if (!backend->by_digest_.emplace(digest, r).second) {
                throw ParseError(where + ": duplicate prompt_digest " + digest);
            }
        }
    }
    if (backend->by_agent_round_.empty()) {
        throw ParseError(origin + ": empty replay script");
    }
    return backend;
}

Completion ReplayBackend::complete(const CompletionRequest& request) {
    const Record* rec = nullptr;
    if (!by_digest_.empty()) {
        auto it = by_digest_.find(prompt_digest(request.prompt));
        if (it != by_digest_.end()) rec = &it->second;
    }
    if (!rec && !request.scope.empty()) {
        auto it = by_agent_round_.find({request.scope + "/" + request.agent, request.round});
        if (it != by_agent_round_.end()) rec = &it->second;
    }
    if (!rec) {
        auto it = by_agent_round_.find({request.agent, request.round});
        if (it != by_agent_round_.end()) rec = &it->second;
    }
    if (!rec) {
        throw BackendError("missing_fixture: no replay record for (" + request.agent + ", round " +
                           std::to_string(request.round) + ", scope '" + request.scope + "')");
    }
    const std::int64_t prompt_tokens = approx_token_count(request.prompt);
    if (rec->text.empty()) {
        throw EmptyCompletionError("empty completion for (" + request.agent + ", round " +
                                       std::to_string(request.round) + ")",
                                   prompt_tokens, rec->completion_tokens);
    }
    return Completion{rec->text, prompt_tokens, rec->completion_tokens};
}

/// Bounds the number of concurrent remote calls.
class ConcurrencyLimiter {
  public:
    explicit ConcurrencyLimiter(int slots) : slots_(slots) {}

    void acquire() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [this] { return slots_ > 0; });
        --slots_;
    }

    void release() {
        {
            std::lock_guard lock(mu_);
            ++slots_;
        }
        cv_.notify_one();
    }

  private:
    std::mutex mu_;
    std::condition_variable cv_;
    int slots_;
};

namespace {

struct SlotGuard {
    explicit SlotGuard(ConcurrencyLimiter& l) : limiter(l) { limiter.acquire(); }
    ~SlotGuard() { limiter.release(); }
    ConcurrencyLimiter& limiter;
};

// Splits "http://host:port/prefix" into the httplib client target and the
// path prefix.
void split_base_url(const std::string& base, std::string& host, std::string& prefix) {
    size_t scheme = base.find("://");
    size_t path_start = scheme == std::string::npos ? base.find('/') : base.find('/', scheme + 3);
    if (path_start == std::string::npos) {
        host = base;
        prefix.clear();
    } else {
        host = base.substr(0, path_start);
        prefix = base.substr(path_start);
        while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    }
}

HttpTransport make_httplib_transport() {
    return [](const std::string& url, const std::string& api_key, const std::string& body) {
        std::string host;
        std::string path;
        split_base_url(url, host, path);
        httplib::Client client(host);
        client.set_connection_timeout(30);
        client.set_read_timeout(120);
        httplib::Headers headers;
        if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
        auto res = client.Post(path, headers, body, "application/json");
        if (!res) {
            throw BackendError("http transport failure: " + httplib::to_string(res.error()));
        }
        return HttpResponse{res->status, res->body};
    };
}

}  // namespace

RemoteBackend::RemoteBackend(std::string base_url, std::string api_key, std::string model,
                             RetryPolicy retry, int max_concurrency, HttpTransport transport)
    : base_url_(std::move(base_url)),
      api_key_(std::move(api_key)),
      model_(std::move(model)),
      retry_(std::move(retry)),
      transport_(transport ? std::move(transport) : make_httplib_transport()),
      limiter_(std::make_shared<ConcurrencyLimiter>(max_concurrency < 1 ? 1 : max_concurrency)) {
    if (retry_.max_attempts < 1) throw ConfigError("retry policy: max_attempts must be >= 1");
}

std::shared_ptr<RemoteBackend> RemoteBackend::from_env(const std::string& model, RetryPolicy retry) {
    const char* base = std::getenv("DR_API_BASE");
    if (!base || !*base) throw ConfigError("DR_API_BASE is not set");
    const char* key = std::getenv("DR_API_KEY");
    return std::make_shared<RemoteBackend>(base, key ? key : "", model, std::move(retry));
}

Completion RemoteBackend::complete(const CompletionRequest& request) {
    SlotGuard guard(*limiter_);

    jsonu::json body;
    body["model"] = model_;
    body["messages"] = jsonu::json::array({jsonu::json{{"role", "user"}, {"content", request.prompt}}});
    body["temperature"] = request.gen.temperature;
    body["max_tokens"] = request.gen.max_tokens;
    const std::string payload = body.dump();
    const std::string url = base_url_ + "/chat/completions";

    auto is_retryable = [this](int status) {
        return retry_.retryable.count(status) > 0 || retry_.retryable.count(status / 100) > 0;
    };

    std::string last_error;
    for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
        if (attempt > 1) {
            std::this_thread::sleep_for(retry_.base_backoff * (1LL << (attempt - 2)));
        }
        HttpResponse resp;
        try {
            resp = transport_(url, api_key_, payload);
        } catch (const BackendError& e) {
            last_error = e.what();
            continue;
        }
        if (resp.status == 200) {
            const std::string where = "chat completion response";
            jsonu::json doc = jsonu::parse(resp.body, where);
            const jsonu::json& choices = jsonu::get_member(doc, "choices", where);
            if (!choices.is_array() || choices.empty()) {
                throw BackendError(where + ": no choices");
            }
            const jsonu::json& message = jsonu::get_member(choices.at(0), "message", where);
            const std::string text = jsonu::get_string(message, "content", where);
            std::int64_t prompt_tokens = approx_token_count(request.prompt);
            std::int64_t completion_tokens = approx_token_count(text);
            if (doc.contains("usage") && doc["usage"].is_object()) {
                const jsonu::json& usage = doc["usage"];
                if (usage.contains("prompt_tokens")) {
                    prompt_tokens = usage["prompt_tokens"].get<std::int64_t>();
                }
                if (usage.contains("completion_tokens")) {
                    completion_tokens = usage["completion_tokens"].get<std::int64_t>();
                }
            }
            if (text.empty()) {
                throw EmptyCompletionError("empty completion from model " + model_, prompt_tokens,
                                           completion_tokens);
            }
            return Completion{text, prompt_tokens, completion_tokens};
        }
        last_error = "status " + std::to_string(resp.status);
        if (!is_retryable(resp.status)) {
            throw BackendError("chat completion failed with non-retryable " + last_error);
        }
    }
    throw BackendError("chat completion failed after " + std::to_string(retry_.max_attempts) +
                       " attempts: " + last_error);
}

}  // namespace dr
