#include "consentforge/review.hpp"

#include "consentforge/error.hpp"
#include "consentforge/text.hpp"

#include <httplib.h>

#include <chrono>
#include <cstdio>
#include <ctime>

namespace consentforge::review {

namespace {

constexpr std::string_view kBroadband = "BROADBAND";

std::string utc_now() {
    using namespace std::chrono;
    const auto now = system_clock::now();
    const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
    const std::time_t t = system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                  tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
    return buf;
}

nlohmann::ordered_json error_mode_json(const evaluation::ErrorMode& m) {
    return {{"mode", evaluation::to_string(m.kind)}, {"note", m.note}};
}

evaluation::ErrorMode error_mode_of(const nlohmann::json& j) {
    return {evaluation::error_mode_from_string(j.at("mode").get<std::string>()), j.value("note", "")};
}

std::string strip_answer_line(const std::string& s) {
    const auto pos = s.rfind("\nAnswer:");
    return pos == std::string::npos ? s : s.substr(0, pos);
}

} // namespace

std::string_view to_string(ItemKind k) { return k == ItemKind::Summary ? "Summary" : "Mcqa"; }

ItemKind item_kind_from_string(std::string_view s) {
    if (text::iequals(s, "summary")) return ItemKind::Summary;
    if (text::iequals(s, "mcqa")) return ItemKind::Mcqa;
    throw Error(ErrorCode::InvalidInput, "unknown item kind: " + std::string(s));
}

std::string_view to_string(Action a) {
    switch (a) {
    case Action::Enqueued: return "Enqueued";
    case Action::Approved: return "Approved";
    case Action::Edited: return "Edited";
    case Action::Rejected: return "Rejected";
    case Action::ErrorModeTagged: return "ErrorModeTagged";
    }
    return "Enqueued";
}

Action action_from_string(std::string_view s) {
    for (auto a : {Action::Enqueued, Action::Approved, Action::Edited, Action::Rejected, Action::ErrorModeTagged}) {
        if (s == to_string(a)) return a;
    }
    throw Error(ErrorCode::InvalidInput, "unknown audit action: " + std::string(s));
}

nlohmann::ordered_json to_json(const AuditEvent& e) {
    return {{"seq", e.seq},       {"item_id", e.item_id},           {"timestamp", e.timestamp},
            {"actor", e.actor},   {"action", to_string(e.action)}, {"data", e.data}};
}

AuditEvent audit_event_from_json(const nlohmann::json& j) {
    AuditEvent e;
    e.seq = j.at("seq").get<std::uint64_t>();
    e.item_id = j.at("item_id").get<std::string>();
    e.timestamp = j.at("timestamp").get<std::string>();
    e.actor = j.value("actor", "");
    e.action = action_from_string(j.at("action").get<std::string>());
    e.data = j.value("data", nlohmann::ordered_json::object());
    return e;
}

nlohmann::ordered_json to_json(const ReviewItem& item, bool blind) {
    const bool hide = blind && item.kind == ItemKind::Mcqa;
    nlohmann::ordered_json payload = item.payload;
    nlohmann::ordered_json context = item.context;
    if (hide) {
        payload.erase("assigned_answer");
        payload.erase("raw_text");
        payload.erase("violations");
        context.erase("verifier_report");
    }
    nlohmann::ordered_json j = {{"item_id", item.item_id},
                                {"kind", to_string(item.kind)},
                                {"nct_id", item.nct_id},
                                {"status", summarizer::to_string(item.status)},
                                {"payload", payload},
                                {"context", context},
                                {"original_text", hide ? strip_answer_line(item.original_text) : item.original_text}};
    j["edited_text"] = item.edited_text ? nlohmann::ordered_json(hide ? strip_answer_line(*item.edited_text)
                                                                      : *item.edited_text)
                                        : nlohmann::ordered_json(nullptr);
    j["rejection_reason"] = item.rejection_reason;
    j["error_mode"] = item.error_mode && !hide ? error_mode_json(*item.error_mode) : nlohmann::ordered_json(nullptr);
    auto history = nlohmann::ordered_json::array();
    for (const auto& e : item.history) {
        if (hide && e.action == Action::Enqueued) {
            history.push_back({{"seq", e.seq}, {"timestamp", e.timestamp}, {"actor", e.actor}, {"action", "Enqueued"}});
        } else {
            history.push_back(to_json(e));
        }
    }
    j["history"] = history;
    if (hide) j["blind"] = true;
    return j;
}

bool SurveyInstrument::has(const std::string& trial_id, const std::string& item_id) const {
    auto it = items.find(trial_id);
    return it != items.end() && it->second.count(item_id) > 0;
}

SurveyInstrument SurveyInstrument::patient_default() {
    SurveyInstrument s;
    const std::set<std::string> pooled{std::string(kItemEasyToUnderstand), std::string(kItemEnoughInformation)};
    for (const char* trial : {"BROADBAND", "trial-2", "trial-3", "trial-4", "trial-5"}) s.items[trial] = pooled;
    s.items[std::string(kBroadband)].insert(std::string(kItemImprovedUnderstanding));
    return s;
}

SurveyInstrument SurveyInstrument::from_json(const nlohmann::json& j) {
    SurveyInstrument s;
    for (const auto& [trial, items] : j.items()) {
        for (const auto& item : items) s.items[trial].insert(item.get<std::string>());
    }
    return s;
}

nlohmann::ordered_json SurveyInstrument::to_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [trial, set] : items) j[trial] = std::vector<std::string>(set.begin(), set.end());
    return j;
}

ReviewStore::ReviewStore(SurveyInstrument instrument, Clock clock)
    : instrument_(std::move(instrument)), clock_(clock ? std::move(clock) : Clock(utc_now)) {}

ReviewStore::ReviewStore(std::filesystem::path log_path, SurveyInstrument instrument, Clock clock)
    : ReviewStore(std::move(instrument), std::move(clock)) {
    for (const auto& record : jsonl::read_file(log_path)) apply(record);
    appender_ = std::make_unique<jsonl::Appender>(std::move(log_path));
}

std::unique_ptr<ReviewStore> ReviewStore::replay(const std::vector<nlohmann::json>& records, SurveyInstrument instrument) {
    auto store = std::make_unique<ReviewStore>(std::move(instrument));
    for (const auto& r : records) store->apply(r);
    return store;
}

std::string ReviewStore::now() {
    std::string t = clock_();
    if (t < last_timestamp_) t = last_timestamp_;
    last_timestamp_ = t;
    return t;
}

AuditEvent ReviewStore::make_event(const std::string& item_id, Action action, const std::string& actor,
                                   nlohmann::ordered_json data) {
    return {next_seq_, item_id, now(), actor, action, std::move(data)};
}

void ReviewStore::commit(nlohmann::ordered_json record) {
    if (appender_) appender_->append(record);
    apply(record);
}

void ReviewStore::apply(const nlohmann::json& record) {
    const auto type = record.at("type").get<std::string>();
    if (type == "survey") {
        surveys_.push_back(evaluation::survey_response_from_json(record.at("response")));
    } else if (type == "event") {
        apply_event(audit_event_from_json(record.at("event")));
    } else {
        throw Error(ErrorCode::InvalidInput, "unknown review log record type: " + type);
    }
    if (record.contains("seq")) next_seq_ = std::max(next_seq_, record.at("seq").get<std::uint64_t>() + 1);
    if (record.contains("timestamp")) last_timestamp_ = std::max(last_timestamp_, record.at("timestamp").get<std::string>());
    records_.push_back(record);
}

void ReviewStore::apply_event(const AuditEvent& e) {
    if (e.action == Action::Enqueued) {
        if (items_.count(e.item_id)) throw Error(ErrorCode::DuplicateItem, "item already enqueued: " + e.item_id);
        ReviewItem item;
        item.item_id = e.item_id;
        item.kind = item_kind_from_string(e.data.at("kind").get<std::string>());
        item.nct_id = e.data.value("nct_id", "");
        item.payload = e.data.at("payload");
        item.context = e.data.value("context", nlohmann::ordered_json::object());
        item.original_text = e.data.at("original_text").get<std::string>();
        item.history.push_back(e);
        items_.emplace(e.item_id, std::move(item));
        return;
    }
    auto it = items_.find(e.item_id);
    if (it == items_.end()) throw Error(ErrorCode::UnknownItem, "unknown item: " + e.item_id);
    auto& item = it->second;
    if (e.action != Action::ErrorModeTagged && item.status != Status::Draft) {
        throw Error(ErrorCode::AlreadyDecided, "item " + e.item_id + " is already " +
                                                   std::string(summarizer::to_string(item.status)));
    }
    switch (e.action) {
    case Action::Approved: item.status = Status::Approved; break;
    case Action::Edited:
        item.status = Status::Edited;
        item.edited_text = e.data.at("new_text").get<std::string>();
        break;
    case Action::Rejected:
        item.status = Status::Rejected;
        item.rejection_reason = e.data.value("reason", "");
        if (e.data.contains("error_mode") && !e.data["error_mode"].is_null()) item.error_mode = error_mode_of(e.data["error_mode"]);
        break;
    case Action::ErrorModeTagged: item.error_mode = error_mode_of(e.data); break;
    case Action::Enqueued: break;
    }
    item.history.push_back(e);
}

ReviewItem ReviewStore::enqueue_locked(ReviewItem item, const std::string& actor) {
    if (items_.count(item.item_id)) throw Error(ErrorCode::DuplicateItem, "item already enqueued: " + item.item_id);
    nlohmann::ordered_json data = {{"kind", to_string(item.kind)},
                                   {"nct_id", item.nct_id},
                                   {"payload", item.payload},
                                   {"context", item.context},
                                   {"original_text", item.original_text}};
    const auto e = make_event(item.item_id, Action::Enqueued, actor, std::move(data));
    commit({{"type", "event"}, {"seq", e.seq}, {"timestamp", e.timestamp}, {"event", to_json(e)}});
    return items_.at(item.item_id);
}

ReviewItem ReviewStore::enqueue_summary(const summarizer::TrialSummary& summary, const std::string& doc_id,
                                        const std::optional<extraction::ElementExtraction>& extraction,
                                        const std::string& actor) {
    ReviewItem item;
    item.item_id = summary.summary_id;
    item.kind = ItemKind::Summary;
    item.nct_id = summary.nct_id;
    item.payload = summarizer::to_json(summary);
    item.context = {{"doc_id", doc_id},
                    {"extraction", extraction ? extraction::to_json(*extraction) : nlohmann::ordered_json(nullptr)}};
    item.original_text = summary.text;
    std::lock_guard lock(mutex_);
    return enqueue_locked(std::move(item), actor);
}

ReviewItem ReviewStore::enqueue_mcqa(const mcqa::Mcqa& m, const std::optional<verifier::VerifierReport>& report,
                                     const std::string& actor) {
    if (!m.validity.valid) throw Error(ErrorCode::InvalidMcqa, "cannot enqueue invalid MCQA " + m.mcqa_id);
    ReviewItem item;
    item.item_id = m.mcqa_id;
    item.kind = ItemKind::Mcqa;
    item.nct_id = m.nct_id;
    item.payload = mcqa::to_json(m);
    item.context = {{"doc_id", m.doc_id},
                    {"verifier_report", report ? verifier::to_json(*report) : nlohmann::ordered_json(nullptr)}};
    item.original_text = mcqa::serialize(m);
    std::lock_guard lock(mutex_);
    return enqueue_locked(std::move(item), actor);
}

ReviewItem ReviewStore::decide(const std::string& item_id, const Decision& decision, const std::string& actor) {
    std::lock_guard lock(mutex_);
    auto it = items_.find(item_id);
    if (it == items_.end()) throw Error(ErrorCode::UnknownItem, "unknown item: " + item_id);
    if (it->second.status != Status::Draft) {
        throw Error(ErrorCode::AlreadyDecided,
                    "item " + item_id + " is already " + std::string(summarizer::to_string(it->second.status)));
    }
    Action action = Action::Approved;
    nlohmann::ordered_json data = nlohmann::ordered_json::object();
    switch (decision.type) {
    case Decision::Type::Approve: break;
    case Decision::Type::Edit:
        if (text::trim(decision.new_text).empty()) throw Error(ErrorCode::InvalidInput, "edited text is empty");
        action = Action::Edited;
        data["new_text"] = decision.new_text;
        break;
    case Decision::Type::Reject:
        action = Action::Rejected;
        data["reason"] = decision.reason;
        data["error_mode"] = decision.error_mode ? error_mode_json(*decision.error_mode) : nlohmann::ordered_json(nullptr);
        break;
    }
    const auto e = make_event(item_id, action, actor, std::move(data));
    commit({{"type", "event"}, {"seq", e.seq}, {"timestamp", e.timestamp}, {"event", to_json(e)}});
    return items_.at(item_id);
}

ReviewItem ReviewStore::tag_error_mode(const std::string& item_id, const evaluation::ErrorMode& mode,
                                       const std::string& actor) {
    std::lock_guard lock(mutex_);
    auto it = items_.find(item_id);
    if (it == items_.end()) throw Error(ErrorCode::UnknownItem, "unknown item: " + item_id);
    if (it->second.kind != ItemKind::Mcqa) throw Error(ErrorCode::InvalidInput, "error modes apply to MCQAs only");
    const auto e = make_event(item_id, Action::ErrorModeTagged, actor, error_mode_json(mode));
    commit({{"type", "event"}, {"seq", e.seq}, {"timestamp", e.timestamp}, {"event", to_json(e)}});
    return items_.at(item_id);
}

std::optional<ReviewItem> ReviewStore::get(const std::string& item_id) const {
    std::lock_guard lock(mutex_);
    auto it = items_.find(item_id);
    if (it == items_.end()) return std::nullopt;
    return it->second;
}

std::vector<ReviewItem> ReviewStore::list(std::optional<ItemKind> kind, std::optional<Status> status) const {
    std::lock_guard lock(mutex_);
    std::vector<ReviewItem> out;
    for (const auto& [id, item] : items_) {
        if (kind && item.kind != *kind) continue;
        if (status && item.status != *status) continue;
        out.push_back(item);
    }
    return out;
}

std::vector<nlohmann::ordered_json> ReviewStore::export_approved(ItemKind kind) const {
    std::vector<nlohmann::ordered_json> out;
    for (const auto& item : list(kind)) {
        if (item.status != Status::Approved && item.status != Status::Edited) continue;
        nlohmann::ordered_json p = item.payload;
        p["review_status"] = summarizer::to_string(item.status);
        p["text"] = item.final_text();
        if (item.edited_text) p["original_text"] = item.original_text;
        out.push_back(std::move(p));
    }
    return out;
}

evaluation::SurveyResponse ReviewStore::record_survey_response(const evaluation::SurveyResponse& response) {
    if (!instrument_.has(response.trial_id, response.item_id)) {
        throw Error(ErrorCode::UnknownItem,
                    "survey item " + response.item_id + " is not registered for trial " + response.trial_id);
    }
    std::lock_guard lock(mutex_);
    const auto seq = next_seq_;
    commit({{"type", "survey"}, {"seq", seq}, {"timestamp", now()}, {"response", evaluation::to_json(response)}});
    return response;
}

std::vector<evaluation::SurveyResponse> ReviewStore::survey_responses() const {
    std::lock_guard lock(mutex_);
    return surveys_;
}

evaluation::SurveyTallies ReviewStore::survey_tallies() const { return evaluation::tally_surveys(survey_responses()); }

std::vector<nlohmann::ordered_json> ReviewStore::log_records() const {
    std::lock_guard lock(mutex_);
    return records_;
}

nlohmann::ordered_json ReviewStore::state() const {
    std::lock_guard lock(mutex_);
    auto items = nlohmann::ordered_json::array();
    for (const auto& [id, item] : items_) items.push_back(to_json(item));
    auto surveys = nlohmann::ordered_json::array();
    for (const auto& s : surveys_) surveys.push_back(evaluation::to_json(s));
    return {{"items", items}, {"surveys", surveys}, {"next_seq", next_seq_}};
}

int http_status(ErrorCode code) {
    switch (code) {
    case ErrorCode::UnknownItem:
    case ErrorCode::NotFound:
    case ErrorCode::UnknownMcqa: return 404;
    case ErrorCode::AlreadyDecided:
    case ErrorCode::DuplicateItem: return 409;
    case ErrorCode::InvalidInput:
    case ErrorCode::InvalidMcqa: return 400;
    default: return 500;
    }
}

struct ReviewServer::Impl {
    ReviewStore& store;
    ServerOptions options;
    httplib::Server server;

    Impl(ReviewStore& s, ServerOptions o) : store(s), options(std::move(o)) { routes(); }

    static void send_json(httplib::Response& res, const nlohmann::ordered_json& body, int status = 200) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    static void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
        send_json(res, {{"code", code}, {"message", message}}, status);
    }

    static nlohmann::json body_of(const httplib::Request& req) {
        if (req.body.empty()) return nlohmann::json::object();
        try {
            auto j = nlohmann::json::parse(req.body);
            if (!j.is_object()) throw Error(ErrorCode::InvalidInput, "request body must be a JSON object");
            return j;
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorCode::InvalidInput, std::string("malformed JSON body: ") + e.what());
        }
    }

    static std::string actor_of(const httplib::Request& req, const nlohmann::json& body) {
        if (body.contains("actor") && body["actor"].is_string()) return body["actor"].get<std::string>();
        if (req.has_header("X-Actor")) return req.get_header_value("X-Actor");
        return "reviewer";
    }

    template <typename F>
    httplib::Server::Handler guarded(F f) {
        return [f](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const Error& e) {
                send_error(res, http_status(e.code()), to_string(e.code()), e.what());
            } catch (const nlohmann::json::exception& e) {
                send_error(res, 400, "InvalidInput", e.what());
            }
        };
    }

    void routes() {
        server.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
            if (options.token.empty()) return httplib::Server::HandlerResponse::Unhandled;
            if (req.get_header_value("Authorization") == "Bearer " + options.token) {
                return httplib::Server::HandlerResponse::Unhandled;
            }
            send_error(res, 401, "Unauthorized", "missing or wrong bearer token");
            return httplib::Server::HandlerResponse::Handled;
        });

        server.Get("/queue", guarded([this](const httplib::Request& req, httplib::Response& res) {
            std::optional<ItemKind> kind;
            std::optional<Status> status;
            if (auto k = req.get_param_value("kind"); !k.empty()) kind = item_kind_from_string(k);
            if (auto s = req.get_param_value("status"); !s.empty()) status = summarizer::review_status_from_string(s);
            auto items = nlohmann::ordered_json::array();
            for (const auto& item : store.list(kind, status)) items.push_back(to_json(item, true));
            send_json(res, {{"items", items}});
        }));

        server.Get(R"(/items/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1];
            auto item = store.get(id);
            if (!item) throw Error(ErrorCode::UnknownItem, "unknown item: " + id);
            const auto blind = req.get_param_value("blind");
            send_json(res, to_json(*item, blind == "1" || blind == "true"));
        }));

        server.Post(R"(/items/([^/]+)/decision)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1];
            const auto body = body_of(req);
            const auto type = body.value("decision", "");
            Decision d;
            if (text::iequals(type, "approve")) {
                d = Decision::approve();
            } else if (text::iequals(type, "edit")) {
                if (!body.contains("new_text")) throw Error(ErrorCode::InvalidInput, "edit requires new_text");
                d = Decision::edit(body.at("new_text").get<std::string>());
            } else if (text::iequals(type, "reject")) {
                std::optional<evaluation::ErrorMode> mode;
                if (body.contains("error_mode") && !body["error_mode"].is_null()) {
                    mode = evaluation::ErrorMode{evaluation::error_mode_from_string(body["error_mode"].get<std::string>()),
                                                 body.value("note", "")};
                }
                d = Decision::reject(body.value("reason", ""), mode);
            } else {
                throw Error(ErrorCode::InvalidInput, "decision must be approve, edit or reject");
            }
            send_json(res, to_json(store.decide(id, d, actor_of(req, body))));
        }));

        server.Post(R"(/items/([^/]+)/error-mode)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1];
            const auto body = body_of(req);
            if (!body.contains("mode")) throw Error(ErrorCode::InvalidInput, "mode is required");
            evaluation::ErrorMode mode{evaluation::error_mode_from_string(body.at("mode").get<std::string>()),
                                       body.value("note", "")};
            send_json(res, to_json(store.tag_error_mode(id, mode, actor_of(req, body))));
        }));

        server.Get("/export", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto k = req.get_param_value("kind");
            if (k.empty()) throw Error(ErrorCode::InvalidInput, "kind is required");
            auto items = nlohmann::ordered_json::array();
            for (auto& p : store.export_approved(item_kind_from_string(k))) items.push_back(std::move(p));
            send_json(res, {{"items", items}});
        }));

        server.Post("/surveys", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto body = body_of(req);
            auto stored = store.record_survey_response(evaluation::survey_response_from_json(body));
            send_json(res, evaluation::to_json(stored), 201);
        }));

        server.Get("/surveys/tallies", guarded([this](const httplib::Request&, httplib::Response& res) {
            send_json(res, evaluation::to_json(store.survey_tallies()));
        }));

        server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (res.body.empty()) send_error(res, res.status, res.status == 404 ? "NotFound" : "HttpError", "no such route");
        });
    }
};

ReviewServer::ReviewServer(ReviewStore& store, ServerOptions options)
    : impl_(std::make_unique<Impl>(store, std::move(options))) {}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::bind() {
    auto& o = impl_->options;
    if (o.port == 0) {
        o.port = impl_->server.bind_to_any_port(o.host);
    } else if (!impl_->server.bind_to_port(o.host, o.port)) {
        o.port = -1;
    }
    if (o.port < 0) throw Error(ErrorCode::Io, "cannot bind review server on " + o.host);
    return o.port;
}

void ReviewServer::listen() { impl_->server.listen_after_bind(); }

void ReviewServer::stop() {
    if (impl_) impl_->server.stop();
}

} // namespace consentforge::review
