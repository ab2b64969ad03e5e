#include "consentforge/error.hpp"

namespace consentforge {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::MalformedId: return "MalformedId";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::Transport: return "Transport";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::DuplicateDocument: return "DuplicateDocument";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::InvalidTranscript: return "InvalidTranscript";
    case ErrorCode::ProviderError: return "ProviderError";
    case ErrorCode::Exhausted: return "Exhausted";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::EmptyDocument: return "EmptyDocument";
    case ErrorCode::Unparseable: return "Unparseable";
    case ErrorCode::KeyOverlap: return "KeyOverlap";
    case ErrorCode::KeyGap: return "KeyGap";
    case ErrorCode::IncompleteExtraction: return "IncompleteExtraction";
    case ErrorCode::EmptyResponse: return "EmptyResponse";
    case ErrorCode::Degenerate: return "Degenerate";
    case ErrorCode::NoReads: return "NoReads";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::UnmappedMcqa: return "UnmappedMcqa";
    case ErrorCode::UnknownMcqa: return "UnknownMcqa";
    case ErrorCode::InvalidMcqa: return "InvalidMcqa";
    case ErrorCode::NoVotes: return "NoVotes";
    case ErrorCode::DuplicateItem: return "DuplicateItem";
    case ErrorCode::UnknownItem: return "UnknownItem";
    case ErrorCode::AlreadyDecided: return "AlreadyDecided";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

} // namespace consentforge
