#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "consentforge/error.hpp"
#include "consentforge/evaluation.hpp"
#include "consentforge/extraction.hpp"
#include "consentforge/jsonl.hpp"
#include "consentforge/mcqa.hpp"
#include "consentforge/summarizer.hpp"
#include "consentforge/verifier.hpp"

namespace consentforge::review {

using Status = summarizer::ReviewStatus;

enum class ItemKind { Summary, Mcqa };

std::string_view to_string(ItemKind k);
ItemKind item_kind_from_string(std::string_view s);

enum class Action { Enqueued, Approved, Edited, Rejected, ErrorModeTagged };

std::string_view to_string(Action a);
Action action_from_string(std::string_view s);

struct AuditEvent {
    std::uint64_t seq = 0;
    std::string item_id;
    std::string timestamp;
    std::string actor;
    Action action = Action::Enqueued;
    /// Enqueued: the item definition. Edited: new_text. Rejected: reason and
    /// optional error_mode. ErrorModeTagged: mode and note.
    nlohmann::ordered_json data = nlohmann::ordered_json::object();
};

nlohmann::ordered_json to_json(const AuditEvent& e);
AuditEvent audit_event_from_json(const nlohmann::json& j);

struct ReviewItem {
    std::string item_id;
    ItemKind kind = ItemKind::Summary;
    std::string nct_id;
    /// The TrialSummary or Mcqa record as enqueued.
    nlohmann::ordered_json payload;
    /// Summaries: doc_id and extraction. MCQAs: doc_id and verifier report.
    nlohmann::ordered_json context = nlohmann::ordered_json::object();
    /// Summary text or serialized MCQA at enqueue time; never overwritten.
    std::string original_text;
    std::optional<std::string> edited_text;
    Status status = Status::Draft;
    std::string rejection_reason;
    std::optional<evaluation::ErrorMode> error_mode;
    std::vector<AuditEvent> history;

    const std::string& final_text() const { return edited_text ? *edited_text : original_text; }
};

/// `blind` drops the assigned answer and verifier votes of an MCQA.
nlohmann::ordered_json to_json(const ReviewItem& item, bool blind = false);

struct Decision {
    enum class Type { Approve, Edit, Reject };

    Type type = Type::Approve;
    std::string new_text;
    std::string reason;
    std::optional<evaluation::ErrorMode> error_mode;

    static Decision approve() { return {}; }
    static Decision edit(std::string text) { return {Type::Edit, std::move(text), {}, std::nullopt}; }
    static Decision reject(std::string why, std::optional<evaluation::ErrorMode> mode = std::nullopt) {
        return {Type::Reject, {}, std::move(why), std::move(mode)};
    }
};

/// Trials and the Likert items registered for each.
struct SurveyInstrument {
    std::map<std::string, std::set<std::string>> items;

    bool has(const std::string& trial_id, const std::string& item_id) const;

    /// The five-summary patient survey: two pooled items for every trial and
    /// one BROADBAND-only item.
    static SurveyInstrument patient_default();
    static SurveyInstrument from_json(const nlohmann::json& j);
    nlohmann::ordered_json to_json() const;
};

inline constexpr std::string_view kItemEasyToUnderstand = "easy_to_understand";
inline constexpr std::string_view kItemEnoughInformation = "enough_information";
inline constexpr std::string_view kItemImprovedUnderstanding = "improved_understanding";

/// Event-sourced review queue. Every mutation is appended to a JSON-lines
/// log by one serialized writer; the in-memory view is rebuilt by replay on
/// open. `decide` is atomic per item.
class ReviewStore {
public:
    using Clock = std::function<std::string()>;

    /// In-memory store.
    explicit ReviewStore(SurveyInstrument instrument = SurveyInstrument::patient_default(), Clock clock = {});
    /// Replays `log_path` (if present) and appends to it.
    explicit ReviewStore(std::filesystem::path log_path,
                         SurveyInstrument instrument = SurveyInstrument::patient_default(), Clock clock = {});

    /// Errors: DuplicateItem.
    ReviewItem enqueue_summary(const summarizer::TrialSummary& summary, const std::string& doc_id,
                               const std::optional<extraction::ElementExtraction>& extraction,
                               const std::string& actor = "system");
    /// Errors: DuplicateItem, InvalidMcqa.
    ReviewItem enqueue_mcqa(const mcqa::Mcqa& m, const std::optional<verifier::VerifierReport>& report,
                            const std::string& actor = "system");

    /// Errors: UnknownItem, AlreadyDecided, InvalidInput (empty edit text).
    ReviewItem decide(const std::string& item_id, const Decision& decision, const std::string& actor);

    /// Tags an MCQA with an error mode without changing its status; a re-tag
    /// replaces the previous mode. Errors: UnknownItem, InvalidInput (not an MCQA).
    ReviewItem tag_error_mode(const std::string& item_id, const evaluation::ErrorMode& mode, const std::string& actor);

    std::optional<ReviewItem> get(const std::string& item_id) const;
    std::vector<ReviewItem> list(std::optional<ItemKind> kind = std::nullopt,
                                 std::optional<Status> status = std::nullopt) const;

    /// Approved and Edited payloads of `kind`; "text" carries the final text.
    std::vector<nlohmann::ordered_json> export_approved(ItemKind kind) const;

    /// Errors: UnknownItem (trial/item pair not in the instrument).
    evaluation::SurveyResponse record_survey_response(const evaluation::SurveyResponse& response);
    std::vector<evaluation::SurveyResponse> survey_responses() const;
    evaluation::SurveyTallies survey_tallies() const;

    const SurveyInstrument& instrument() const { return instrument_; }

    /// Every log record in order: audit events and survey responses.
    std::vector<nlohmann::ordered_json> log_records() const;

    /// Canonical dump of the materialized view, for replay comparisons.
    nlohmann::ordered_json state() const;

    /// Rebuilds a store from log records alone.
    static std::unique_ptr<ReviewStore> replay(const std::vector<nlohmann::json>& records,
                                               SurveyInstrument instrument = SurveyInstrument::patient_default());

private:
    void apply(const nlohmann::json& record);
    void apply_event(const AuditEvent& e);
    void commit(nlohmann::ordered_json record);
    AuditEvent make_event(const std::string& item_id, Action action, const std::string& actor,
                          nlohmann::ordered_json data);
    ReviewItem enqueue_locked(ReviewItem item, const std::string& actor);
    std::string now();

    SurveyInstrument instrument_;
    Clock clock_;
    std::unique_ptr<jsonl::Appender> appender_;
    mutable std::mutex mutex_;
    std::map<std::string, ReviewItem> items_;
    std::vector<evaluation::SurveyResponse> surveys_;
    std::vector<nlohmann::ordered_json> records_;
    std::uint64_t next_seq_ = 1;
    std::string last_timestamp_;
};

struct ServerOptions {
    std::string host = "127.0.0.1";
    int port = 8080;
    /// Required bearer token; empty disables authentication.
    std::string token;
};

inline constexpr const char* kTokenEnv = "CONSENTFORGE_REVIEW_TOKEN";

/// JSON HTTP front end over a ReviewStore.
class ReviewServer {
public:
    ReviewServer(ReviewStore& store, ServerOptions options);
    ~ReviewServer();

    ReviewServer(const ReviewServer&) = delete;
    ReviewServer& operator=(const ReviewServer&) = delete;

    /// Binds (port 0 picks a free port) and returns the bound port.
    int bind();
    /// Serves until `stop`. Call `bind` first.
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// HTTP status for an error code: 404, 409, 400 or 500.
int http_status(ErrorCode code);

} // namespace consentforge::review
