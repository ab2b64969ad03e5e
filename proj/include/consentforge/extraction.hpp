#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "consentforge/llm_gateway.hpp"

namespace consentforge::extraction {

/// The 17 consent elements, in prompt order. The first eight belong to the
/// first extraction request, the remaining nine to the second.
enum class TopicKey {
    StudyResearch,
    Purpose,
    Duration,
    Procedures,
    ExperimentalProcedures,
    Risks,
    Benefits,
    Participants,
    AlternativeProcedures,
    Confidentiality,
    Compensation,
    ContactInfo,
    VoluntaryParticipation,
    DiscontinueCooperation,
    AdditionalCosts,
    WithdrawalEffects,
    NewFindings,
};

inline constexpr std::size_t kTopicCount = 17;

struct ConsentTopic {
    TopicKey key;
    std::string_view snake_key;
    std::string_view long_name;
    std::string_view question_text;
};

const std::array<ConsentTopic, kTopicCount>& consent_topics();
const ConsentTopic& topic(TopicKey key);
std::optional<TopicKey> topic_from_snake(std::string_view snake_key);

std::vector<TopicKey> request1_keys();
std::vector<TopicKey> request2_keys();
std::vector<TopicKey> all_keys();

/// nullopt encodes Missing ("na").
using ExtractedValue = std::optional<std::string>;

enum class WarningKind { MissingKey, UnknownKey, DuplicateKey, EmptyValue, UnterminatedValue, Unparseable };

std::string_view to_string(WarningKind k);

struct ParseWarning {
    WarningKind kind;
    std::string key;
    std::string detail;
};

struct ElementExtraction {
    std::string doc_id;
    std::map<TopicKey, ExtractedValue> entries;
    std::vector<ParseWarning> warnings;

    bool complete() const { return entries.size() == kTopicCount; }
};

/// 17 snake_case keys in topic order; Missing encoded as "na". Keys absent
/// from a partial extraction are omitted.
nlohmann::ordered_json to_json(const ElementExtraction& e, bool omit_missing = false);
/// Reads the `to_json` object form (plus optional "doc_id"/"warnings" wrapper).
ElementExtraction extraction_from_json(const nlohmann::json& j);

/// The two single-message extraction transcripts. Errors: EmptyDocument.
std::pair<llm::Transcript, llm::Transcript> build_extraction_transcripts(std::string_view icf_text);

/// Tolerant key/value scan of a pseudo-dictionary reply. The result always
/// maps exactly `expected_keys`. Errors: Unparseable when no key/value pair
/// is recognized at all.
ElementExtraction parse_extraction_response(std::string_view raw, const std::vector<TopicKey>& expected_keys);

/// Errors: KeyOverlap, KeyGap.
ElementExtraction merge(const ElementExtraction& first, const ElementExtraction& second);

enum class Verdict { Verbatim, NotFoundInSource, Missing };

std::string_view to_string(Verdict v);

struct FidelityEntry {
    Verdict verdict = Verdict::Missing;
    /// For NotFoundInSource: the normalized span and how much of its prefix
    /// does occur in the source.
    std::string detail;
};

struct FidelityReport {
    std::map<TopicKey, FidelityEntry> entries;

    std::size_t count(Verdict v) const;
};

/// Whitespace-collapsed, case-preserving substring check of every span.
/// Throws Error(IncompleteExtraction) unless all 17 keys are present.
FidelityReport verify_fidelity(const ElementExtraction& extraction, std::string_view icf_text);

nlohmann::ordered_json to_json(const FidelityReport& r);

/// Runs both extraction requests through the gateway, parses and merges them.
/// An Unparseable reply fills its request's keys with Missing and records an
/// Unparseable warning.
ElementExtraction run_extraction(std::string_view doc_id, std::string_view icf_text, llm::Gateway& gateway,
                                 llm::ChatProvider& provider, const llm::GenerationParams& params);

} // namespace consentforge::extraction
