#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "consentforge/corpus.hpp"
#include "consentforge/extraction.hpp"
#include "consentforge/llm_gateway.hpp"

namespace consentforge::summarizer {

enum class SummaryStrategy { Direct, Sequential };

std::string_view to_string(SummaryStrategy s);
SummaryStrategy strategy_from_string(std::string_view s);

enum class ReviewStatus { Draft, Approved, Edited, Rejected };

std::string_view to_string(ReviewStatus s);
ReviewStatus review_status_from_string(std::string_view s);

inline constexpr std::size_t kWordLimit = 150;
inline constexpr double kDefaultGradeMax = 9.0;

struct ConstraintThresholds {
    std::size_t word_limit = kWordLimit;
    double grade_max = kDefaultGradeMax;
};

struct ConstraintReport {
    bool word_limit_ok = true;
    /// Absent when the text has no sentence terminator.
    std::optional<double> readability_grade;
    bool grade_target_ok = true;
    std::vector<std::string> flags;
};

struct TrialSummary {
    std::string summary_id;
    std::string nct_id;
    SummaryStrategy strategy = SummaryStrategy::Direct;
    std::string text;
    std::size_t word_count = 0;
    std::optional<double> readability_grade;
    ConstraintReport constraints;
    ReviewStatus review_status = ReviewStatus::Draft;
};

nlohmann::ordered_json to_json(const TrialSummary& s);
TrialSummary summary_from_json(const nlohmann::json& j);

/// Maximal non-whitespace runs.
std::size_t word_count(std::string_view text) noexcept;

struct ReadabilityCounts {
    std::size_t words = 0;
    std::size_t sentences = 0;
    std::size_t syllables = 0;
};

/// Sentences end at '.', '!' or '?' followed by whitespace or end of text.
/// Syllables are vowel groups (a e i o u y), at least one per word.
ReadabilityCounts readability_counts(std::string_view text);

std::size_t syllables_in_word(std::string_view word) noexcept;

/// 0.39 * words/sentences + 11.8 * syllables/words - 15.59.
/// Throws Error(Degenerate) when there are no words or no sentence.
double flesch_kincaid_grade(std::string_view text);

/// Uses the summary's word_count and readability_grade fields.
ConstraintReport check_constraints(const TrialSummary& summary, const ConstraintThresholds& thresholds = {});

/// Errors: EmptyDocument.
llm::Transcript build_direct_prompt(std::string_view icf_text);

enum class MissingMode { RenderNa, Omit };

/// The extraction rendered as an indented JSON object in topic order.
std::string render_extracted_content(const extraction::ElementExtraction& e, MissingMode mode = MissingMode::RenderNa);

/// Errors: IncompleteExtraction.
llm::Transcript build_sequential_prompt(const extraction::ElementExtraction& e,
                                        MissingMode mode = MissingMode::RenderNa);

std::string make_summary_id(std::string_view nct_id, SummaryStrategy strategy, std::string_view text);

/// Builds the Draft record for a model reply and scores it.
/// Throws Error(EmptyResponse) on a blank reply.
TrialSummary make_summary(std::string_view nct_id, SummaryStrategy strategy, std::string_view reply,
                          const ConstraintThresholds& thresholds = {});

struct SequentialInput {
    std::string nct_id;
    extraction::ElementExtraction extraction;
};

using SummaryInput = std::variant<corpus::IcfDocument, SequentialInput>;

struct SummaryOptions {
    MissingMode missing_mode = MissingMode::RenderNa;
    ConstraintThresholds thresholds;
};

/// Direct needs a document. Sequential accepts a ready extraction, or a
/// document, in which case the extraction step runs first.
TrialSummary generate_summary(const SummaryInput& input, SummaryStrategy strategy, llm::Gateway& gateway,
                              llm::ChatProvider& provider, const llm::GenerationParams& params,
                              const SummaryOptions& options = {});

} // namespace consentforge::summarizer
