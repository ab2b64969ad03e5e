#include "consentforge/corpus.hpp"

#include "consentforge/error.hpp"
#include "consentforge/hash.hpp"
#include "consentforge/jsonl.hpp"
#include "consentforge/text.hpp"
#include "http_util.hpp"

#include <httplib.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <mutex>

namespace consentforge::corpus {

namespace {

int parse_int(std::string_view s, std::string_view whole) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
        throw Error(ErrorCode::InvalidInput, "bad date: " + std::string(whole));
    }
    return v;
}

} // namespace

Date parse_date(std::string_view s) {
    std::string_view t = text::trim(s);
    if (t.size() != 7 && t.size() != 10) throw Error(ErrorCode::InvalidInput, "bad date: " + std::string(s));
    if (t[4] != '-' || (t.size() == 10 && t[7] != '-')) {
        throw Error(ErrorCode::InvalidInput, "bad date: " + std::string(s));
    }
    int y = parse_int(t.substr(0, 4), s);
    int m = parse_int(t.substr(5, 2), s);
    int d = t.size() == 10 ? parse_int(t.substr(8, 2), s) : 1;
    Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
              std::chrono::day{static_cast<unsigned>(d)}};
    if (!date.ok()) throw Error(ErrorCode::InvalidInput, "bad date: " + std::string(s));
    return date;
}

std::string format_date(Date d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                  static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
    return buf;
}

std::string_view to_string(StudyType t) {
    switch (t) {
    case StudyType::Interventional: return "Interventional";
    case StudyType::Observational: return "Observational";
    case StudyType::Other: return "Other";
    }
    return "Other";
}

StudyType study_type_from_string(std::string_view s) {
    if (text::iequals(s, "interventional")) return StudyType::Interventional;
    if (text::iequals(s, "observational")) return StudyType::Observational;
    return StudyType::Other;
}

bool is_valid_nct_id(std::string_view id) noexcept {
    if (id.size() != 11 || id.substr(0, 3) != "NCT") return false;
    return std::all_of(id.begin() + 3, id.end(), [](char c) { return c >= '0' && c <= '9'; });
}

nlohmann::json to_json(const StudyRecord& r) {
    return {{"nct_id", r.nct_id},
            {"title", r.title},
            {"registration_date", format_date(r.registration_date)},
            {"study_type", to_string(r.study_type)},
            {"condition_tags", r.condition_tags}};
}

StudyRecord study_record_from_json(const nlohmann::json& j) {
    StudyRecord r;
    r.nct_id = j.at("nct_id").get<std::string>();
    r.title = j.value("title", "");
    r.registration_date = parse_date(j.at("registration_date").get<std::string>());
    r.study_type = study_type_from_string(j.value("study_type", "Other"));
    r.condition_tags = j.value("condition_tags", std::vector<std::string>{});
    return r;
}

StudyRecord parse_registry_study(const nlohmann::json& study) {
    const auto& proto = study.at("protocolSection");
    const auto& ident = proto.at("identificationModule");
    StudyRecord r;
    r.nct_id = ident.at("nctId").get<std::string>();
    r.title = ident.value("briefTitle", ident.value("officialTitle", ""));

    const auto status = proto.value("statusModule", nlohmann::json::object());
    std::string date;
    if (status.contains("studyFirstSubmitDate")) {
        date = status["studyFirstSubmitDate"].get<std::string>();
    } else if (status.contains("studyFirstPostDateStruct")) {
        date = status["studyFirstPostDateStruct"].value("date", "");
    }
    if (date.empty()) throw Error(ErrorCode::InvalidInput, r.nct_id + ": registry record has no registration date");
    r.registration_date = parse_date(date);

    const auto design = proto.value("designModule", nlohmann::json::object());
    r.study_type = study_type_from_string(design.value("studyType", ""));

    const auto conditions = proto.value("conditionsModule", nlohmann::json::object());
    r.condition_tags = conditions.value("conditions", std::vector<std::string>{});
    return r;
}

RegistryConfig RegistryConfig::from_env() {
    RegistryConfig cfg;
    if (const char* url = std::getenv(kRegistryUrlEnv); url != nullptr && *url != '\0') cfg.base_url = url;
    return cfg;
}

RegistryClient::RegistryClient(RegistryConfig config) : config_(std::move(config)) {}

StudyRecord RegistryClient::fetch_study_record(std::string_view nct_id) const {
    if (!is_valid_nct_id(nct_id)) {
        throw Error(ErrorCode::MalformedId, "not an NCT identifier: " + std::string(nct_id));
    }
    auto url = detail::split_url(config_.base_url);
    httplib::Client client(url.origin);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_follow_location(true);

    const std::string path = url.path + "/studies/" + std::string(nct_id);
    auto res = client.Get(path, {{"Accept", "application/json"}});
    if (!res) {
        throw Error(ErrorCode::Transport,
                    "registry request failed: " + httplib::to_string(res.error()));
    }
    if (res->status == 404) throw Error(ErrorCode::NotFound, "registry has no study " + std::string(nct_id));
    if (res->status != 200) {
        throw Error(ErrorCode::Transport, "registry returned HTTP " + std::to_string(res->status));
    }
    try {
        return parse_registry_study(nlohmann::json::parse(res->body));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Transport, std::string("malformed registry response: ") + e.what());
    }
}

std::vector<std::string> default_cancer_terms() {
    return {"cancer", "neoplasm", "carcinoma", "tumor", "lymphoma", "leukemia",
            "melanoma", "sarcoma", "myeloma", "glioma", "oncology"};
}

std::vector<StudyRecord> filter_studies(const std::vector<StudyRecord>& records,
                                        const FilterCriteria& criteria) {
    if (criteria.to < criteria.from) {
        throw Error(ErrorCode::InvalidInput, "filter date range is reversed");
    }
    std::vector<StudyRecord> out;
    for (const auto& r : records) {
        if (r.study_type != criteria.study_type) continue;
        if (r.registration_date < criteria.from || criteria.to < r.registration_date) continue;
        bool tagged = std::any_of(r.condition_tags.begin(), r.condition_tags.end(), [&](const std::string& tag) {
            return std::any_of(criteria.condition_terms.begin(), criteria.condition_terms.end(),
                               [&](const std::string& term) { return text::icontains(tag, term); });
        });
        if (tagged) out.push_back(r);
    }
    return out;
}

std::string_view to_string(DocumentSource s) {
    return s == DocumentSource::Registry ? "Registry" : "LocalFile";
}

nlohmann::json to_json(const IcfDocument& d) {
    return {{"doc_id", d.doc_id},         {"nct_id", d.nct_id},
            {"text", d.text},             {"page_count", d.page_count},
            {"token_count", d.token_count}, {"source", to_string(d.source)}};
}

IcfDocument document_from_json(const nlohmann::json& j) {
    IcfDocument d;
    d.doc_id = j.at("doc_id").get<std::string>();
    d.nct_id = j.at("nct_id").get<std::string>();
    d.text = j.at("text").get<std::string>();
    d.page_count = j.at("page_count").get<std::int64_t>();
    d.token_count = j.at("token_count").get<std::int64_t>();
    d.source = j.value("source", "LocalFile") == "Registry" ? DocumentSource::Registry : DocumentSource::LocalFile;
    return d;
}

std::size_t count_tokens(std::string_view text) noexcept { return text::count_runs(text); }

std::string make_doc_id(std::string_view nct_id, std::string_view text) {
    std::string key(nct_id);
    key.push_back('\x1f');
    key.append(text);
    return stable_id("icf-", key, 12);
}

DocumentStore::DocumentStore() : tokenizer_(count_tokens) {}

DocumentStore::DocumentStore(std::filesystem::path path, Tokenizer tokenizer)
    : path_(std::move(path)), tokenizer_(tokenizer ? std::move(tokenizer) : Tokenizer(count_tokens)) {
    for (const auto& j : jsonl::read_file(*path_)) docs_.push_back(document_from_json(j));
}

IcfDocument DocumentStore::ingest(std::string_view nct_id, std::string_view text, std::int64_t page_count,
                                  DocumentSource source) {
    if (text.empty()) throw Error(ErrorCode::EmptyText, "ICF text is empty for " + std::string(nct_id));
    if (page_count < 1) throw Error(ErrorCode::InvalidInput, "page_count must be >= 1");
    if (!is_valid_nct_id(nct_id)) throw Error(ErrorCode::MalformedId, "not an NCT identifier: " + std::string(nct_id));

    IcfDocument doc;
    doc.doc_id = make_doc_id(nct_id, text);
    doc.nct_id = std::string(nct_id);
    doc.text = std::string(text);
    doc.page_count = page_count;
    doc.token_count = static_cast<std::int64_t>(tokenizer_(text));
    doc.source = source;
    if (doc.token_count < 1) throw Error(ErrorCode::EmptyText, "ICF text has no tokens for " + doc.nct_id);

    std::unique_lock lock(mutex_);
    auto dup = std::find_if(docs_.begin(), docs_.end(), [&](const IcfDocument& d) { return d.doc_id == doc.doc_id; });
    if (dup != docs_.end()) {
        throw Error(ErrorCode::DuplicateDocument, "document already ingested: " + dup->doc_id);
    }
    if (path_) jsonl::Appender(*path_).append(to_json(doc));
    docs_.push_back(doc);
    return doc;
}

std::optional<IcfDocument> DocumentStore::find(std::string_view doc_id) const {
    std::shared_lock lock(mutex_);
    for (const auto& d : docs_) {
        if (d.doc_id == doc_id) return d;
    }
    return std::nullopt;
}

std::vector<IcfDocument> DocumentStore::by_nct(std::string_view nct_id) const {
    std::shared_lock lock(mutex_);
    std::vector<IcfDocument> out;
    for (const auto& d : docs_) {
        if (d.nct_id == nct_id) out.push_back(d);
    }
    return out;
}

std::vector<IcfDocument> DocumentStore::all() const {
    std::shared_lock lock(mutex_);
    return docs_;
}

std::size_t DocumentStore::size() const {
    std::shared_lock lock(mutex_);
    return docs_.size();
}

Histogram make_histogram(const std::vector<std::int64_t>& values, std::size_t max_buckets) {
    if (values.empty()) throw Error(ErrorCode::EmptyInput, "histogram of no values");
    if (max_buckets == 0) max_buckets = 1;
    auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const std::int64_t lo = *lo_it;
    const std::int64_t span = *hi_it - lo + 1;
    const auto buckets_max = static_cast<std::int64_t>(max_buckets);

    Histogram h;
    h.lower = lo;
    h.width = std::max<std::int64_t>(1, (span + buckets_max - 1) / buckets_max);
    h.counts.assign(static_cast<std::size_t>((span + h.width - 1) / h.width), 0);
    for (auto v : values) ++h.counts[static_cast<std::size_t>((v - lo) / h.width)];
    return h;
}

LengthStats corpus_stats(const std::vector<IcfDocument>& documents, std::size_t max_buckets) {
    if (documents.empty()) throw Error(ErrorCode::EmptyCorpus, "corpus has no documents");
    LengthStats s;
    s.document_count = documents.size();
    for (const auto& d : documents) {
        s.pages.push_back(d.page_count);
        s.tokens.push_back(d.token_count);
    }
    s.page_histogram = make_histogram(s.pages, max_buckets);
    s.token_histogram = make_histogram(s.tokens, max_buckets);
    return s;
}

namespace {

nlohmann::json histogram_json(const Histogram& h) {
    auto buckets = nlohmann::json::array();
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        buckets.push_back({{"low", h.bucket_low(i)}, {"high", h.bucket_high(i)}, {"count", h.counts[i]}});
    }
    return buckets;
}

} // namespace

nlohmann::json to_json(const LengthStats& s) {
    return {{"document_count", s.document_count},
            {"pages", s.pages},
            {"tokens", s.tokens},
            {"page_histogram", histogram_json(s.page_histogram)},
            {"token_histogram", histogram_json(s.token_histogram)}};
}

} // namespace consentforge::corpus
