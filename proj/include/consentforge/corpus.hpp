#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace consentforge::corpus {

using Date = std::chrono::year_month_day;

/// Parses "YYYY-MM-DD" or "YYYY-MM" (day defaults to 1). Throws Error(InvalidInput).
Date parse_date(std::string_view s);
std::string format_date(Date d);

enum class StudyType { Interventional, Observational, Other };

std::string_view to_string(StudyType t);
StudyType study_type_from_string(std::string_view s);

/// "NCT" followed by exactly 8 decimal digits.
bool is_valid_nct_id(std::string_view id) noexcept;

struct StudyRecord {
    std::string nct_id;
    std::string title;
    Date registration_date{};
    StudyType study_type = StudyType::Other;
    std::vector<std::string> condition_tags;
};

nlohmann::json to_json(const StudyRecord& r);
StudyRecord study_record_from_json(const nlohmann::json& j);

/// Maps a ClinicalTrials.gov v2 study document onto a StudyRecord. Fields the
/// record does not model are ignored.
StudyRecord parse_registry_study(const nlohmann::json& study);

/// Environment variable overriding the registry base URL.
inline constexpr const char* kRegistryUrlEnv = "CONSENTFORGE_REGISTRY_URL";
inline constexpr const char* kDefaultRegistryUrl = "https://clinicaltrials.gov/api/v2";

struct RegistryConfig {
    std::string base_url = kDefaultRegistryUrl;
    std::chrono::seconds timeout{30};

    /// Default config with the environment override applied.
    static RegistryConfig from_env();
};

/// Thin client over the registry's JSON study endpoint (GET {base}/studies/{nct_id}).
/// Instances hold no mutable state and may be used from several threads.
class RegistryClient {
public:
    explicit RegistryClient(RegistryConfig config);

    /// Errors: MalformedId, NotFound (HTTP 404), Transport (anything else).
    StudyRecord fetch_study_record(std::string_view nct_id) const;

    const RegistryConfig& config() const { return config_; }

private:
    RegistryConfig config_;
};

struct FilterCriteria {
    Date from{};
    Date to{};
    StudyType study_type = StudyType::Interventional;
    /// A record qualifies when any condition tag contains any of these terms
    /// (ASCII case-insensitive).
    std::vector<std::string> condition_terms{"cancer"};
};

std::vector<std::string> default_cancer_terms();

/// Keeps records of the requested type, with a matching condition tag, and a
/// registration date inside [from, to]. Throws Error(InvalidInput) if from > to.
std::vector<StudyRecord> filter_studies(const std::vector<StudyRecord>& records,
                                        const FilterCriteria& criteria);

enum class DocumentSource { Registry, LocalFile };

std::string_view to_string(DocumentSource s);

struct IcfDocument {
    std::string doc_id;
    std::string nct_id;
    std::string text;
    std::int64_t page_count = 1;
    std::int64_t token_count = 0;
    DocumentSource source = DocumentSource::LocalFile;
};

nlohmann::json to_json(const IcfDocument& d);
IcfDocument document_from_json(const nlohmann::json& j);

/// Whitespace-run count; the default token rule.
std::size_t count_tokens(std::string_view text) noexcept;

using Tokenizer = std::function<std::size_t(std::string_view)>;

/// Document ids are derived from (nct_id, text), so a duplicate ingest is
/// detectable and ids are reproducible across runs.
std::string make_doc_id(std::string_view nct_id, std::string_view text);

/// ICF store persisted as one JSON-lines file. Ingests are serialized; lookups
/// may run concurrently with each other.
class DocumentStore {
public:
    /// In-memory store.
    DocumentStore();
    /// Loads existing records from `path` (if present) and appends new ones to it.
    explicit DocumentStore(std::filesystem::path path, Tokenizer tokenizer = {});

    /// Errors: EmptyText, InvalidInput (page_count < 1 or bad NCT id), DuplicateDocument.
    IcfDocument ingest(std::string_view nct_id, std::string_view text, std::int64_t page_count,
                       DocumentSource source = DocumentSource::LocalFile);

    std::optional<IcfDocument> find(std::string_view doc_id) const;
    std::vector<IcfDocument> by_nct(std::string_view nct_id) const;
    std::vector<IcfDocument> all() const;
    std::size_t size() const;

private:
    std::optional<std::filesystem::path> path_;
    Tokenizer tokenizer_;
    mutable std::shared_mutex mutex_;
    std::vector<IcfDocument> docs_;
};

/// Contiguous integer buckets: bucket i covers
/// [lower + i*width, lower + (i+1)*width - 1].
struct Histogram {
    std::int64_t lower = 0;
    std::int64_t width = 1;
    std::vector<std::size_t> counts;

    std::int64_t bucket_low(std::size_t i) const { return lower + static_cast<std::int64_t>(i) * width; }
    std::int64_t bucket_high(std::size_t i) const { return bucket_low(i) + width - 1; }
};

/// Buckets `values` (non-empty) into at most `max_buckets` equal-width buckets
/// spanning min..max.
Histogram make_histogram(const std::vector<std::int64_t>& values, std::size_t max_buckets = 10);

struct LengthStats {
    std::size_t document_count = 0;
    std::vector<std::int64_t> pages;
    std::vector<std::int64_t> tokens;
    Histogram page_histogram;
    Histogram token_histogram;
};

/// Errors: EmptyCorpus.
LengthStats corpus_stats(const std::vector<IcfDocument>& documents, std::size_t max_buckets = 10);

nlohmann::json to_json(const LengthStats& s);

} // namespace consentforge::corpus
