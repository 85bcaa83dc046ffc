#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dr {

/// Base class for every error thrown by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed documents: MAG JSON, replay scripts, JSONL datasets.
struct ParseError : Error {
    using Error::Error;
};

/// Broken operation preconditions or graph invariants.
struct ValidationError : Error {
    using Error::Error;
};

/// Answer text that cannot be normalized for the given task kind.
struct NormalizeError : Error {
    using Error::Error;
};

/// Completion failures: network errors, exhausted retries, missing fixtures.
struct BackendError : Error {
    using Error::Error;
};

/// A completion with empty text. Debates record these as failed responses
/// instead of aborting, so the token counts travel with the error.
struct EmptyCompletionError : BackendError {
    EmptyCompletionError(const std::string& msg, std::int64_t prompt_tok, std::int64_t completion_tok)
        : BackendError(msg), prompt_tokens(prompt_tok), completion_tokens(completion_tok) {}

    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
};

/// Invalid pipeline or debate configuration.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace dr
