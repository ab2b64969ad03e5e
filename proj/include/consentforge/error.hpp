#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace consentforge {

enum class ErrorCode {
    // corpus
    MalformedId,
    NotFound,
    Transport,
    EmptyText,
    DuplicateDocument,
    EmptyCorpus,
    // llm_gateway
    InvalidParams,
    InvalidTranscript,
    ProviderError,
    Exhausted,
    RateLimited,
    // extraction / summarizer / mcqa
    EmptyDocument,
    Unparseable,
    KeyOverlap,
    KeyGap,
    IncompleteExtraction,
    EmptyResponse,
    Degenerate,
    // evaluation
    NoReads,
    EmptyInput,
    UnmappedMcqa,
    UnknownMcqa,
    // verifier
    InvalidMcqa,
    NoVotes,
    // review
    DuplicateItem,
    UnknownItem,
    AlreadyDecided,
    // shared
    InvalidInput,
    Io,
};

std::string_view to_string(ErrorCode code);

/// Every domain failure in the pipeline is reported through this type; the
/// code is the stable, machine-readable part and `what()` carries context.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

    /// Transport failures and provider-side throttling may succeed on retry.
    bool retryable() const noexcept {
        return code_ == ErrorCode::Transport || code_ == ErrorCode::RateLimited;
    }

private:
    ErrorCode code_;
};

} // namespace consentforge
