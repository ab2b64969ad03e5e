#include "consentforge/error.hpp"
#include "consentforge/extraction.hpp"
#include "consentforge/text.hpp"

#include "test_support.hpp"

#include <doctest.h>

using namespace consentforge;
using namespace consentforge::extraction;
using testsupport::fast_gateway;
using testsupport::FnProvider;

namespace {

std::string reply_for(const std::vector<TopicKey>& keys, const std::map<TopicKey, std::string>& overrides = {}) {
    std::string raw = "{\n";
    for (auto k : keys) {
        const auto it = overrides.find(k);
        raw += "  \"" + std::string(topic(k).snake_key) + "\": \"" +
               (it != overrides.end() ? it->second : "value of " + std::string(topic(k).snake_key)) + "\",\n";
    }
    return raw + "}";
}

} // namespace

TEST_CASE("topic table shape") {
    CHECK(consent_topics().size() == 17);
    CHECK(request1_keys().size() == 8);
    CHECK(request2_keys().size() == 9);
    CHECK(request1_keys().front() == TopicKey::StudyResearch);
    CHECK(request2_keys().back() == TopicKey::NewFindings);
    CHECK(topic_from_snake("purpose") == TopicKey::Purpose);
    CHECK_FALSE(topic_from_snake("nope").has_value());

    // The question texts match the golden topic table.
    std::size_t row = 0;
    for (const auto& line : consentforge::text::split_lines(testsupport::golden("consent_elements.tsv"))) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        REQUIRE(row < consent_topics().size());
        CHECK(std::string(consent_topics()[row].long_name) == line.substr(0, tab));
        CHECK(std::string(consent_topics()[row].question_text) == line.substr(tab + 1));
        ++row;
    }
    CHECK(row == 17);
}

TEST_CASE("extraction transcripts") {
    const std::string icf = "This consent form describes a study of STOP.";
    const auto [t1, t2] = build_extraction_transcripts(icf);
    REQUIRE(t1.messages.size() == 1);
    CHECK(t1.messages[0].role == llm::Role::User);
    CHECK(t1.messages[0].content.find("Does the study involve medical research?") != std::string::npos);
    CHECK(t1.messages[0].content.find(icf) != std::string::npos);
    CHECK(t2.messages[0].content.find(icf) != std::string::npos);
    CHECK_CODE(build_extraction_transcripts(""), ErrorCode::EmptyDocument);

    const std::string other = "A different form entirely.";
    const auto [u1, u2] = build_extraction_transcripts(other);
    auto strip = [](std::string s, const std::string& payload) { return s.replace(s.find(payload), payload.size(), "@"); };
    CHECK(strip(t1.messages[0].content, icf) == strip(u1.messages[0].content, other));
    CHECK(strip(t2.messages[0].content, icf) == strip(u2.messages[0].content, other));
}

TEST_CASE("parse well-formed and na values") {
    const auto keys = request1_keys();
    const auto raw = reply_for(keys, {{TopicKey::Purpose, "To test the STOP program"}, {TopicKey::Risks, "na"}});
    const auto e = parse_extraction_response(raw, keys);
    CHECK(e.entries.size() == 8);
    CHECK(e.entries.at(TopicKey::Purpose) == "To test the STOP program");
    CHECK_FALSE(e.entries.at(TopicKey::Risks).has_value());
    CHECK(e.warnings.empty());
}

TEST_CASE("parse tolerates fences, quoting styles and junk") {
    const auto keys = request2_keys();
    std::string raw = "Here you go:\n```python\n{'alternative_procedures': 'Standard care.',\n"
                      "confidentiality: \"Records are coded\",\n"
                      "\"compensation\": \"NA\", \"contact_info\": \"Call 555-0100\"}\n```\nHope this helps!";
    const auto e = parse_extraction_response(raw, keys);
    CHECK(e.entries.size() == 9);
    CHECK(e.entries.at(TopicKey::AlternativeProcedures) == "Standard care.");
    CHECK(e.entries.at(TopicKey::Confidentiality) == "Records are coded");
    CHECK_FALSE(e.entries.at(TopicKey::Compensation).has_value());
    CHECK(e.entries.at(TopicKey::ContactInfo) == "Call 555-0100");
    CHECK_FALSE(e.entries.at(TopicKey::NewFindings).has_value());
    std::size_t missing = 0;
    for (const auto& w : e.warnings) missing += w.kind == WarningKind::MissingKey;
    CHECK(missing == 5);
}

TEST_CASE("parse warnings for unknown, duplicate and unterminated keys") {
    const auto keys = request1_keys();
    std::string raw = reply_for(keys);
    raw.insert(2, "\"favourite_colour\": \"blue\",\n\"purpose\": \"first purpose\",\n");
    raw += "\n\"risks\": \"cut off mid";
    const auto e = parse_extraction_response(raw, keys);
    CHECK(e.entries.size() == 8);
    std::map<WarningKind, int> kinds;
    for (const auto& w : e.warnings) ++kinds[w.kind];
    CHECK(kinds[WarningKind::UnknownKey] == 1);
    CHECK(kinds[WarningKind::DuplicateKey] >= 1);
    CHECK(e.entries.at(TopicKey::Purpose) == "first purpose");
}

TEST_CASE("structure-free reply is Unparseable") {
    CHECK_CODE(parse_extraction_response("I cannot help with that.", request1_keys()), ErrorCode::Unparseable);
    CHECK_CODE(parse_extraction_response("", request1_keys()), ErrorCode::Unparseable);
}

TEST_CASE("merge rules") {
    const auto a = parse_extraction_response(reply_for(request1_keys()), request1_keys());
    const auto b = parse_extraction_response(reply_for(request2_keys()), request2_keys());
    const auto m = merge(a, b);
    CHECK(m.entries.size() == 17);
    CHECK(m.complete());
    CHECK_CODE(merge(a, a), ErrorCode::KeyOverlap);

    auto short_b = b;
    short_b.entries.erase(TopicKey::NewFindings);
    CHECK_CODE(merge(a, short_b), ErrorCode::KeyGap);
}

TEST_CASE("fidelity verdicts") {
    const std::string icf = "The study evaluates a mobile application.\nIt   lasts six\nmonths.";
    ElementExtraction e;
    for (auto k : all_keys()) e.entries[k] = std::nullopt;
    e.entries[TopicKey::Purpose] = "The study  evaluates a mobile\napplication.";
    e.entries[TopicKey::Duration] = "It lasts six months.";
    e.entries[TopicKey::Procedures] = "The study tests a phone app";
    e.entries[TopicKey::Risks] = "the study evaluates";  // case-preserving: lower-case "the" is not in the source
    const auto r = verify_fidelity(e, icf);
    CHECK(r.entries.at(TopicKey::Purpose).verdict == Verdict::Verbatim);
    CHECK(r.entries.at(TopicKey::Duration).verdict == Verdict::Verbatim);
    CHECK(r.entries.at(TopicKey::Procedures).verdict == Verdict::NotFoundInSource);
    CHECK(r.entries.at(TopicKey::Risks).verdict == Verdict::NotFoundInSource);
    CHECK(r.count(Verdict::Missing) == 13);

    ElementExtraction none;
    for (auto k : all_keys()) none.entries[k] = std::nullopt;
    CHECK(verify_fidelity(none, icf).count(Verdict::Missing) == 17);

    none.entries.erase(TopicKey::Purpose);
    CHECK_CODE(verify_fidelity(none, icf), ErrorCode::IncompleteExtraction);
}

TEST_CASE("json round trip keeps na and order") {
    auto e = merge(parse_extraction_response(reply_for(request1_keys(), {{TopicKey::Risks, "na"}}), request1_keys()),
                   parse_extraction_response(reply_for(request2_keys()), request2_keys()));
    e.doc_id = "icf-1";
    const auto j = to_json(e);
    CHECK(j.begin().key() == "study_research");
    CHECK(j["risks"] == "na");
    CHECK_FALSE(to_json(e, true).contains("risks"));
    const auto back = extraction_from_json(j);
    CHECK(back.entries == e.entries);
}

TEST_CASE("run_extraction issues both requests and survives an unparseable half") {
    int calls = 0;
    FnProvider p([&](const llm::Transcript& t, const llm::GenerationParams&) {
        ++calls;
        const bool first = t.messages[0].content.find("Does the study involve medical research?") != std::string::npos;
        return first ? reply_for(request1_keys()) : std::string("Sorry, no.");
    });
    auto gw = fast_gateway();
    const auto e = run_extraction("icf-x", "Some consent text.", gw, p, llm::generation_defaults());
    CHECK(calls == 2);
    CHECK(e.doc_id == "icf-x");
    CHECK(e.complete());
    CHECK(e.entries.at(TopicKey::Purpose).has_value());
    CHECK_FALSE(e.entries.at(TopicKey::NewFindings).has_value());
    bool unparseable = false;
    for (const auto& w : e.warnings) unparseable |= w.kind == WarningKind::Unparseable;
    CHECK(unparseable);
}
