#pragma once

#include <stdexcept>
#include <string>

namespace policyprobe {

// Base class for all domain errors raised by the library. CLI maps these to
// exit code 1; anything else escaping is a bug.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class CorpusError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class PromptError : public Error {
public:
    using Error::Error;
};

class BudgetError : public Error {
public:
    using Error::Error;
};

// Transport/HTTP-level failure after retries, or a non-retryable status.
class ProviderError : public Error {
public:
    ProviderError(const std::string& what, int http_status = 0, std::string body = {})
        : Error(what), http_status(http_status), response_body(std::move(body)) {}

    int http_status;            // 0 when no HTTP response was received
    std::string response_body;  // surfaced verbatim for 4xx diagnostics
};

}  // namespace policyprobe
