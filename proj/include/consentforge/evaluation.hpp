#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "consentforge/mcqa.hpp"

namespace consentforge::evaluation {

enum class ReaderBackground {
    MD,
    DO,
    NP,
    NPStudent,
    PA,
    PAStudent,
    Pharmacist,
    PharmacyStudent,
    OtherHealthcareStudents,
    Other,
    NotReported,
};

std::string_view to_string(ReaderBackground b);
ReaderBackground reader_background_from_string(std::string_view s);

struct AnnotationRead {
    std::string reader_id;
    std::string mcqa_id;
    char chosen_option = 'A';
    std::optional<ReaderBackground> reader_background;
};

nlohmann::ordered_json to_json(const AnnotationRead& r);
/// Errors: InvalidInput (missing field, option outside A-F).
AnnotationRead annotation_from_json(const nlohmann::json& j);
std::vector<AnnotationRead> load_annotations(const std::filesystem::path& path);

struct McqaStats {
    std::string mcqa_id;
    std::size_t qualified_reads = 0;
    double difficulty = 0.0;
    double agreement = 0.0;
    char majority_answer = 'A';
    bool tie = false;
    bool matches_assigned = false;
};

nlohmann::ordered_json to_json(const McqaStats& s);

/// Plurality majority; ties go to the alphabetically smallest tied label.
/// Errors: NoReads, InvalidInput (reads of several MCQAs).
McqaStats score_mcqa(const std::vector<AnnotationRead>& reads, char assigned_answer);

/// Groups reads by mcqa_id and scores each group against its assigned answer.
/// Output follows mcqa_id order. MCQAs without reads are skipped.
/// Errors: UnknownMcqa (a read for an id absent from `assigned`).
std::vector<McqaStats> score_corpus(const std::vector<AnnotationRead>& reads,
                                    const std::map<std::string, char>& assigned);

/// Errors: EmptyInput.
double corpus_accuracy(const std::vector<McqaStats>& stats);

struct QaThresholds {
    double difficulty_min = 0.6;
    double agreement_max = 0.5;
};

/// Inclusive on both bounds. Errors: InvalidInput (threshold outside [0, 1]).
std::vector<McqaStats> select_qa_set(const std::vector<McqaStats>& stats, const QaThresholds& thresholds = {});

enum class StdConvention { Sample, Population };

std::string_view to_string(StdConvention c);

struct DistStats {
    double mean = 0.0;
    double std = 0.0;
    double median = 0.0;
    double min = 0.0;
    double max = 0.0;
    double q05 = 0.0;
    double q10 = 0.0;
    double q90 = 0.0;
    double q95 = 0.0;
};

nlohmann::ordered_json to_json(const DistStats& d);

/// Linear interpolation between order statistics of an ascending vector:
/// position (n - 1) * p.
double quantile_sorted(const std::vector<double>& sorted, double p);

/// Errors: EmptyInput. The standard deviation of a single value is 0.
DistStats distribution(const std::vector<double>& values, StdConvention convention = StdConvention::Sample);

struct TopicMeans {
    mcqa::McqaTopicKey topic;
    std::size_t count = 0;
    double mean_difficulty = 0.0;
    double mean_agreement = 0.0;
};

/// Per-topic means in topic order; topics without items are omitted.
/// Errors: UnmappedMcqa.
std::vector<TopicMeans> topic_breakdown(const std::vector<McqaStats>& stats,
                                        const std::map<std::string, mcqa::McqaTopicKey>& topic_of);

enum class Likert { StronglyDisagree, Disagree, Neither, Agree, StronglyAgree };

inline constexpr std::size_t kLikertLevels = 5;

std::string_view to_string(Likert l);
/// Accepts the enum names, the survey wording ("Strongly disagree", "Neither
/// agree or disagree", ...) and the integers 1-5. Errors: InvalidInput.
Likert likert_from_string(std::string_view s);

struct LikertTally {
    /// Five levels in scale order, then Missing.
    std::array<std::size_t, kLikertLevels + 1> counts{};

    std::size_t count(Likert l) const { return counts[static_cast<std::size_t>(l)]; }
    std::size_t missing() const { return counts[kLikertLevels]; }
    std::size_t total() const;
    LikertTally& operator+=(const LikertTally& other);
};

nlohmann::ordered_json to_json(const LikertTally& t);

LikertTally tally_likert(const std::vector<std::optional<Likert>>& responses);

struct SurveyResponse {
    std::string trial_id;
    std::string item_id;
    std::optional<Likert> value;
    std::string respondent_id;
};

nlohmann::ordered_json to_json(const SurveyResponse& r);
SurveyResponse survey_response_from_json(const nlohmann::json& j);
std::vector<SurveyResponse> load_survey_responses(const std::filesystem::path& path);

/// Tallies keyed by (trial_id, item_id), plus a pooled tally per item_id.
struct SurveyTallies {
    std::map<std::pair<std::string, std::string>, LikertTally> per_trial;
    std::map<std::string, LikertTally> pooled;
};

SurveyTallies tally_surveys(const std::vector<SurveyResponse>& responses);
nlohmann::ordered_json to_json(const SurveyTallies& t);

struct ClinicianResponse {
    std::string evaluator_id;
    std::string summary_id;
    std::string item_id;
    std::string value;
};

ClinicianResponse clinician_response_from_json(const nlohmann::json& j);

struct ClinicianItemTally {
    std::string item_id;
    std::size_t responses = 0;
    std::map<std::string, std::size_t> value_counts;
};

struct PreferenceSplit {
    std::size_t total = 0;
    std::map<std::string, std::size_t> counts;
    std::map<std::string, double> fractions;
};

struct ClinicianTally {
    std::vector<ClinicianItemTally> items;
    std::optional<PreferenceSplit> preference;
};

inline constexpr std::string_view kPreferenceItem = "preference";

/// Per-item response counts across every (evaluator, summary) pair. Responses
/// to `preference_item` additionally yield the strategy-preference split.
ClinicianTally tally_clinician_eval(const std::vector<ClinicianResponse>& responses,
                                    std::string_view preference_item = kPreferenceItem);

nlohmann::ordered_json to_json(const ClinicianTally& t);

enum class ErrorModeKind { HumanError, MissingInformationInIcf, ErrorInGeneratedMcqa, AmbiguousDefinition, NotInEnglish };

inline constexpr std::size_t kErrorModeCount = 5;

std::string_view to_string(ErrorModeKind k);
ErrorModeKind error_mode_from_string(std::string_view s);

struct ErrorMode {
    ErrorModeKind kind = ErrorModeKind::HumanError;
    std::string note;
};

struct ErrorModeEvent {
    std::size_t seq = 0;
    std::string mcqa_id;
    ErrorMode mode;
    std::string actor;
    std::optional<ErrorModeKind> replaced;
};

nlohmann::ordered_json to_json(const ErrorModeEvent& e);

/// Audit log of error-mode tags. A re-tag replaces the current mode of the
/// item; every tag stays in the log. Optionally persisted as JSON lines and
/// replayed on construction.
class ErrorModeLog {
public:
    explicit ErrorModeLog(std::set<std::string> known_mcqas, std::optional<std::filesystem::path> path = std::nullopt);

    /// Errors: UnknownMcqa.
    ErrorModeEvent record(const std::string& mcqa_id, const ErrorMode& mode, const std::string& actor = {});

    std::map<std::string, ErrorMode> current() const;
    std::array<std::size_t, kErrorModeCount> counts() const;
    std::vector<ErrorModeEvent> events() const;

private:
    ErrorModeEvent apply(const std::string& mcqa_id, const ErrorMode& mode, const std::string& actor);

    std::set<std::string> known_;
    std::optional<std::filesystem::path> path_;
    mutable std::mutex mutex_;
    std::map<std::string, ErrorMode> current_;
    std::vector<ErrorModeEvent> events_;
};

struct ReportOptions {
    QaThresholds qa;
    StdConvention std_convention = StdConvention::Sample;
};

/// Accuracy, distribution tables, topic breakdown and QA set for a scored
/// corpus. `topic_of` may be empty, in which case the breakdown is omitted.
nlohmann::ordered_json evaluation_report(const std::vector<McqaStats>& stats,
                                         const std::map<std::string, mcqa::McqaTopicKey>& topic_of,
                                         const ReportOptions& options = {});

/// Plain-text rendering of `evaluation_report`.
std::string report_text(const nlohmann::ordered_json& report);

} // namespace consentforge::evaluation
