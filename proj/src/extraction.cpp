#include "consentforge/extraction.hpp"

#include "consentforge/error.hpp"
#include "consentforge/prompts.hpp"
#include "consentforge/text.hpp"

#include <algorithm>
#include <set>

namespace consentforge::extraction {

namespace {

constexpr std::array<ConsentTopic, kTopicCount> kTopics{{
    {TopicKey::StudyResearch, "study_research", "A statement that the study involves research",
     "Does the study involve medical research?"},
    {TopicKey::Purpose, "purpose", "An explanation of the purposes of the research",
     "What is the purpose of this research study?"},
    {TopicKey::Duration, "duration", "The expected duration of the subject's participation",
     "How long will the participant be involved in the study?"},
    {TopicKey::Procedures, "procedures", "A description of the procedures to be followed",
     "What procedures will the participant need to follow?"},
    {TopicKey::ExperimentalProcedures, "experimental_procedures",
     "Identification of any procedures which are experimental", "Are any of the procedures experimental?"},
    {TopicKey::Risks, "risks", "A description of any reasonably foreseeable risks or discomforts to the subject",
     "What are the risks or discomforts of participating?"},
    {TopicKey::Benefits, "benefits",
     "A description of any benefits to the subject or to others which may reasonably be expected from the research",
     "What are the benefits of participating?"},
    {TopicKey::Participants, "participants", "The approximate number of subjects involved in the study",
     "How many people will be participating in the study?"},
    {TopicKey::AlternativeProcedures, "alternative_procedures",
     "A disclosure of appropriate alternative procedures or courses of treatment, if any, that might be "
     "advantageous to the subject",
     "What other treatment options may help the participant besides this research study?"},
    {TopicKey::Confidentiality, "confidentiality",
     "A statement describing the extent, if any, to which confidentiality of records identifying the subject "
     "will be maintained",
     "How will the researchers keep the participant's records private?"},
    {TopicKey::Compensation, "compensation",
     "For research involving more than minimal risk, an explanation as to whether any compensation, and an "
     "explanation as to whether any medical treatments are available, if injury occurs and, if so, what they "
     "consist of, or where further information may be obtained",
     "What are details on compensation, medical treatments, injuries, and where individuals can find more "
     "information?"},
    {TopicKey::ContactInfo, "contact_info",
     "Research, Rights or Injury: An explanation of whom to contact for answers to pertinent questions about the "
     "research and research subjects' rights, and whom to contact in the event of a research-related injury to "
     "the subject",
     "Who can the participant contact if they have questions or get hurt in the research?"},
    {TopicKey::VoluntaryParticipation, "voluntary_participation",
     "A statement that participation is voluntary, refusal to participate will involve no penalty or loss of "
     "benefits to which the subject is otherwise entitled, and the subject may discontinue participation at any "
     "time without penalty or loss of benefits, to which the subject is otherwise entitled",
     "Can the participant drop out of the study anytime without consequences?"},
    {TopicKey::DiscontinueCooperation, "discontinue_cooperation",
     "Anticipated circumstances under which the subject's participation may be terminated by the investigator "
     "without regard to the subject's or the legally authorized representative's consent",
     "For what reasons could the researchers remove the participant from the study?"},
    {TopicKey::AdditionalCosts, "additional_costs",
     "Any additional costs to the subject that may result from participation in the research",
     "Will participating cost the participant anything?"},
    {TopicKey::WithdrawalEffects, "withdrawal_effects",
     "The consequences of a subject's decision to withdraw from the research and procedures for orderly "
     "termination of participation by the subject",
     "If the participant wants to stop the study, what should they do and what happens next?"},
    {TopicKey::NewFindings, "new_findings",
     "A statement that significant new findings developed during the course of the research that may relate to "
     "the subject's willingness to continue participation will be provided to the subject",
     "Will the researchers let the participant know if they find anything important that could change their "
     "decision to stay in the study?"},
}};

bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

struct KeyMatch {
    std::string key;
    std::size_t value_start = 0;
};

// A key is `"ident":` / `'ident':` anywhere, or a bare known topic key at the
// start of a line (after list/brace punctuation). `=` is accepted for `:`.
std::optional<KeyMatch> match_key_at(std::string_view raw, std::size_t i, bool at_line_start) {
    auto after_ident = [&](std::size_t j) -> std::optional<std::size_t> {
        while (j < raw.size() && (raw[j] == ' ' || raw[j] == '\t')) ++j;
        if (j < raw.size() && (raw[j] == ':' || raw[j] == '=')) return j + 1;
        return std::nullopt;
    };

    const char c = raw[i];
    if (c == '"' || c == '\'') {
        std::size_t j = i + 1;
        if (j >= raw.size() || !is_ident_start(raw[j])) return std::nullopt;
        while (j < raw.size() && is_ident_char(raw[j])) ++j;
        if (j >= raw.size() || raw[j] != c) return std::nullopt;
        auto colon = after_ident(j + 1);
        if (!colon) return std::nullopt;
        return KeyMatch{std::string(raw.substr(i + 1, j - i - 1)), *colon};
    }
    if (at_line_start && is_ident_start(c)) {
        std::size_t j = i;
        while (j < raw.size() && is_ident_char(raw[j])) ++j;
        std::string ident(raw.substr(i, j - i));
        if (!topic_from_snake(ident)) return std::nullopt;
        auto colon = after_ident(j);
        if (!colon) return std::nullopt;
        return KeyMatch{std::move(ident), *colon};
    }
    return std::nullopt;
}

std::string unescape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size()) {
            const char n = s[i + 1];
            switch (n) {
            case 'n': out.push_back('\n'); ++i; continue;
            case 't': out.push_back('\t'); ++i; continue;
            case '"': case '\'': case '\\': case '/': out.push_back(n); ++i; continue;
            default: break;
            }
        }
        out.push_back(s[i]);
    }
    return out;
}

// A closing quote is one followed, after optional blanks, by `,`, `}`, `]`,
// a newline or the end of input; this lets apostrophes live inside values.
std::optional<std::size_t> find_closing_quote(std::string_view raw, std::size_t from, char quote) {
    for (std::size_t j = from; j < raw.size(); ++j) {
        if (raw[j] == '\\') {
            ++j;
            continue;
        }
        if (raw[j] != quote) continue;
        std::size_t k = j + 1;
        while (k < raw.size() && (raw[k] == ' ' || raw[k] == '\t' || raw[k] == '\r')) ++k;
        if (k >= raw.size() || raw[k] == ',' || raw[k] == '}' || raw[k] == ']' || raw[k] == '\n') return j;
    }
    return std::nullopt;
}

struct ValueMatch {
    std::string text;
    bool quoted = false;
    bool unterminated = false;
    std::size_t end = 0;
};

ValueMatch read_value(std::string_view raw, std::size_t i) {
    while (i < raw.size() && text::is_space(raw[i])) ++i;
    ValueMatch v;
    if (i >= raw.size()) {
        v.end = i;
        return v;
    }
    const char c = raw[i];
    if (c == '"' || c == '\'') {
        v.quoted = true;
        if (auto close = find_closing_quote(raw, i + 1, c)) {
            v.text = unescape(raw.substr(i + 1, *close - i - 1));
            v.end = *close + 1;
            return v;
        }
        std::size_t eol = raw.find('\n', i);
        if (eol == std::string_view::npos) eol = raw.size();
        v.text = unescape(text::trim(raw.substr(i + 1, eol - i - 1)));
        v.unterminated = true;
        v.end = eol;
        return v;
    }
    if (c == '[') {
        // List value: join the quoted items with a space.
        std::size_t j = i + 1;
        std::vector<std::string> items;
        while (j < raw.size() && raw[j] != ']') {
            if (raw[j] == '"' || raw[j] == '\'') {
                const char q = raw[j];
                std::size_t k = j + 1;
                while (k < raw.size() && raw[k] != q) {
                    if (raw[k] == '\\') ++k;
                    ++k;
                }
                items.push_back(unescape(raw.substr(j + 1, std::min(k, raw.size()) - j - 1)));
                j = k + 1;
            } else {
                ++j;
            }
        }
        std::string joined;
        for (const auto& it : items) {
            if (!joined.empty()) joined.push_back(' ');
            joined += it;
        }
        if (items.empty()) joined = std::string(text::trim(raw.substr(i + 1, std::min(j, raw.size()) - i - 1)));
        v.quoted = !items.empty();
        v.text = std::move(joined);
        v.end = std::min(j + 1, raw.size());
        return v;
    }
    std::size_t eol = raw.find('\n', i);
    if (eol == std::string_view::npos) eol = raw.size();
    std::string_view line = text::trim(raw.substr(i, eol - i));
    while (!line.empty() && (line.back() == ',' || line.back() == '}' || text::is_space(line.back()))) {
        line.remove_suffix(1);
    }
    v.text = std::string(line);
    v.end = eol;
    return v;
}

bool is_missing_literal(std::string_view value, bool quoted) {
    auto t = text::trim(value);
    if (text::iequals(t, "na")) return true;
    return !quoted && (t == "null" || t == "None");
}

} // namespace

const std::array<ConsentTopic, kTopicCount>& consent_topics() { return kTopics; }

const ConsentTopic& topic(TopicKey key) { return kTopics[static_cast<std::size_t>(key)]; }

std::optional<TopicKey> topic_from_snake(std::string_view snake_key) {
    for (const auto& t : kTopics) {
        if (t.snake_key == snake_key) return t.key;
    }
    return std::nullopt;
}

std::vector<TopicKey> request1_keys() {
    std::vector<TopicKey> out;
    for (std::size_t i = 0; i < 8; ++i) out.push_back(kTopics[i].key);
    return out;
}

std::vector<TopicKey> request2_keys() {
    std::vector<TopicKey> out;
    for (std::size_t i = 8; i < kTopicCount; ++i) out.push_back(kTopics[i].key);
    return out;
}

std::vector<TopicKey> all_keys() {
    std::vector<TopicKey> out;
    for (const auto& t : kTopics) out.push_back(t.key);
    return out;
}

std::string_view to_string(WarningKind k) {
    switch (k) {
    case WarningKind::MissingKey: return "MissingKey";
    case WarningKind::UnknownKey: return "UnknownKey";
    case WarningKind::DuplicateKey: return "DuplicateKey";
    case WarningKind::EmptyValue: return "EmptyValue";
    case WarningKind::UnterminatedValue: return "UnterminatedValue";
    case WarningKind::Unparseable: return "Unparseable";
    }
    return "Unknown";
}

nlohmann::ordered_json to_json(const ElementExtraction& e, bool omit_missing) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& t : kTopics) {
        auto it = e.entries.find(t.key);
        if (it == e.entries.end()) continue;
        if (it->second) {
            j[std::string(t.snake_key)] = *it->second;
        } else if (!omit_missing) {
            j[std::string(t.snake_key)] = "na";
        }
    }
    return j;
}

ElementExtraction extraction_from_json(const nlohmann::json& j) {
    ElementExtraction e;
    const nlohmann::json* entries = &j;
    if (j.contains("entries")) {
        e.doc_id = j.value("doc_id", "");
        entries = &j.at("entries");
        for (const auto& w : j.value("warnings", nlohmann::json::array())) {
            ParseWarning pw{WarningKind::MissingKey, w.value("key", ""), w.value("detail", "")};
            const std::string kind = w.value("kind", "");
            for (auto k : {WarningKind::MissingKey, WarningKind::UnknownKey, WarningKind::DuplicateKey,
                           WarningKind::EmptyValue, WarningKind::UnterminatedValue, WarningKind::Unparseable}) {
                if (to_string(k) == kind) pw.kind = k;
            }
            e.warnings.push_back(std::move(pw));
        }
    }
    for (auto it = entries->begin(); it != entries->end(); ++it) {
        auto key = topic_from_snake(it.key());
        if (!key) throw Error(ErrorCode::InvalidInput, "unknown consent topic key: " + it.key());
        const auto value = it.value().get<std::string>();
        e.entries[*key] = value == "na" ? ExtractedValue{} : ExtractedValue{value};
    }
    return e;
}

std::pair<llm::Transcript, llm::Transcript> build_extraction_transcripts(std::string_view icf_text) {
    if (icf_text.empty()) throw Error(ErrorCode::EmptyDocument, "ICF text is empty");
    auto one = prompts::render(prompts::extraction_request1(), {{prompts::kFormText, icf_text}});
    auto two = prompts::render(prompts::extraction_request2(), {{prompts::kFormText, icf_text}});
    return {llm::Transcript{{{llm::Role::User, std::move(one)}}},
            llm::Transcript{{{llm::Role::User, std::move(two)}}}};
}

ElementExtraction parse_extraction_response(std::string_view raw, const std::vector<TopicKey>& expected_keys) {
    ElementExtraction out;
    const std::set<TopicKey> expected(expected_keys.begin(), expected_keys.end());
    std::set<TopicKey> seen;
    std::size_t pairs = 0;

    bool at_line_start = true;
    std::size_t i = 0;
    while (i < raw.size()) {
        const char c = raw[i];
        if (auto km = match_key_at(raw, i, at_line_start)) {
            ValueMatch v = read_value(raw, km->value_start);
            ++pairs;
            i = std::max(v.end, i + 1);
            at_line_start = false;

            auto key = topic_from_snake(km->key);
            if (!key || expected.count(*key) == 0) {
                out.warnings.push_back({WarningKind::UnknownKey, km->key, "dropped"});
                continue;
            }
            if (seen.count(*key) != 0) {
                out.warnings.push_back({WarningKind::DuplicateKey, km->key, "first occurrence kept"});
                continue;
            }
            seen.insert(*key);
            if (v.unterminated) out.warnings.push_back({WarningKind::UnterminatedValue, km->key, "read to end of line"});
            if (is_missing_literal(v.text, v.quoted)) {
                out.entries[*key] = std::nullopt;
            } else if (text::trim(v.text).empty()) {
                out.warnings.push_back({WarningKind::EmptyValue, km->key, "treated as missing"});
                out.entries[*key] = std::nullopt;
            } else {
                out.entries[*key] = std::string(text::trim(v.text));
            }
            continue;
        }
        if (c == '\n') {
            at_line_start = true;
        } else if (!(text::is_space(c) || c == '{' || c == ',' || c == '-' || c == '*' || c == '`')) {
            at_line_start = false;
        }
        ++i;
    }

    if (pairs == 0) throw Error(ErrorCode::Unparseable, "no key/value structure recognized in extraction response");

    for (auto key : expected_keys) {
        if (seen.count(key) == 0) {
            out.entries[key] = std::nullopt;
            out.warnings.push_back({WarningKind::MissingKey, std::string(topic(key).snake_key), "absent from response"});
        }
    }
    return out;
}

ElementExtraction merge(const ElementExtraction& first, const ElementExtraction& second) {
    ElementExtraction out;
    out.doc_id = !first.doc_id.empty() ? first.doc_id : second.doc_id;
    out.entries = first.entries;
    for (const auto& [key, value] : second.entries) {
        if (!out.entries.emplace(key, value).second) {
            throw Error(ErrorCode::KeyOverlap, "both extractions contain " + std::string(topic(key).snake_key));
        }
    }
    for (const auto& t : kTopics) {
        if (out.entries.count(t.key) == 0) {
            throw Error(ErrorCode::KeyGap, "merged extraction lacks " + std::string(t.snake_key));
        }
    }
    out.warnings = first.warnings;
    out.warnings.insert(out.warnings.end(), second.warnings.begin(), second.warnings.end());
    return out;
}

std::string_view to_string(Verdict v) {
    switch (v) {
    case Verdict::Verbatim: return "Verbatim";
    case Verdict::NotFoundInSource: return "NotFoundInSource";
    case Verdict::Missing: return "Missing";
    }
    return "Missing";
}

std::size_t FidelityReport::count(Verdict v) const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [v](const auto& kv) { return kv.second.verdict == v; }));
}

FidelityReport verify_fidelity(const ElementExtraction& extraction, std::string_view icf_text) {
    if (!extraction.complete()) {
        throw Error(ErrorCode::IncompleteExtraction, "fidelity check needs all 17 consent topics");
    }
    const std::string source = text::normalize_whitespace(icf_text);
    FidelityReport report;
    for (const auto& [key, value] : extraction.entries) {
        FidelityEntry entry;
        if (!value) {
            entry.verdict = Verdict::Missing;
        } else {
            const std::string span = text::normalize_whitespace(*value);
            if (source.find(span) != std::string::npos) {
                entry.verdict = Verdict::Verbatim;
            } else {
                entry.verdict = Verdict::NotFoundInSource;
                std::size_t lo = 0, hi = span.size();
                while (lo < hi) {
                    std::size_t mid = (lo + hi + 1) / 2;
                    if (source.find(std::string_view(span).substr(0, mid)) != std::string::npos) {
                        lo = mid;
                    } else {
                        hi = mid - 1;
                    }
                }
                entry.detail = "normalized span \"" + span + "\"; longest prefix found in source: " +
                               std::to_string(lo) + " of " + std::to_string(span.size()) + " chars";
            }
        }
        report.entries.emplace(key, std::move(entry));
    }
    return report;
}

nlohmann::ordered_json to_json(const FidelityReport& r) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [key, entry] : r.entries) {
        nlohmann::ordered_json e = {{"verdict", to_string(entry.verdict)}};
        if (!entry.detail.empty()) e["detail"] = entry.detail;
        j[std::string(topic(key).snake_key)] = std::move(e);
    }
    return j;
}

ElementExtraction run_extraction(std::string_view doc_id, std::string_view icf_text, llm::Gateway& gateway,
                                 llm::ChatProvider& provider, const llm::GenerationParams& params) {
    auto [t1, t2] = build_extraction_transcripts(icf_text);
    auto parse_or_fill = [](const std::string& raw, const std::vector<TopicKey>& keys, std::string_view label) {
        try {
            return parse_extraction_response(raw, keys);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::Unparseable) throw;
            ElementExtraction filled;
            for (auto k : keys) filled.entries[k] = std::nullopt;
            filled.warnings.push_back({WarningKind::Unparseable, std::string(label), e.what()});
            return filled;
        }
    };
    auto first = parse_or_fill(gateway.complete(provider, t1, params).text, request1_keys(), "response1");
    auto second = parse_or_fill(gateway.complete(provider, t2, params).text, request2_keys(), "response2");
    auto merged = merge(first, second);
    merged.doc_id = std::string(doc_id);
    return merged;
}

} // namespace consentforge::extraction
