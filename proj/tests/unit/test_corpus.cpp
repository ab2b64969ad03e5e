#include "consentforge/corpus.hpp"
#include "consentforge/error.hpp"

#include "test_support.hpp"

#include <doctest.h>
#include <httplib.h>

#include <thread>

using namespace consentforge;
using namespace consentforge::corpus;
using testsupport::TempDir;

namespace {

nlohmann::json registry_study(const std::string& nct, const std::string& title, const std::string& date,
                              const std::string& type, std::vector<std::string> conditions) {
    return {{"protocolSection",
             {{"identificationModule", {{"nctId", nct}, {"briefTitle", title}}},
              {"statusModule", {{"studyFirstSubmitDate", date}}},
              {"designModule", {{"studyType", type}}},
              {"conditionsModule", {{"conditions", conditions}}}}}};
}

StudyRecord record(const std::string& nct, const std::string& date, StudyType type = StudyType::Interventional,
                   std::vector<std::string> tags = {"Breast Cancer"}) {
    return {nct, "t", parse_date(date), type, std::move(tags)};
}

} // namespace

TEST_CASE("NCT ids and dates") {
    CHECK(is_valid_nct_id("NCT03923790"));
    CHECK_FALSE(is_valid_nct_id("NCT12"));
    CHECK_FALSE(is_valid_nct_id("nct03923790"));
    CHECK_FALSE(is_valid_nct_id("NCT0392379O"));
    CHECK(format_date(parse_date("2024-04-15")) == "2024-04-15");
    CHECK(format_date(parse_date("2021-03")) == "2021-03-01");
    CHECK_CODE(parse_date("2021-13-01"), ErrorCode::InvalidInput);
    CHECK_CODE(parse_date("yesterday"), ErrorCode::InvalidInput);
}

TEST_CASE("registry client against a fixture server") {
    httplib::Server server;
    server.Get(R"(/api/v2/studies/(NCT\d{8}))", [](const httplib::Request& req, httplib::Response& res) {
        if (req.matches[1] == "NCT03923790") {
            res.set_content(registry_study("NCT03923790",
                                           "Stroke Telemedicine Outpatient Prevention Program for Blood Pressure "
                                           "Reduction (STOP-Stroke)",
                                           "2019-04-17", "INTERVENTIONAL", {"Stroke", "Hypertension"})
                                .dump(),
                            "application/json");
        } else if (req.matches[1] == "NCT55555555") {
            res.set_content("{not json", "application/json");
        } else {
            res.status = 404;
        }
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    RegistryClient client({"http://127.0.0.1:" + std::to_string(port) + "/api/v2", std::chrono::seconds(5)});
    const auto r = client.fetch_study_record("NCT03923790");
    CHECK(r.title == "Stroke Telemedicine Outpatient Prevention Program for Blood Pressure Reduction (STOP-Stroke)");
    CHECK(r.study_type == StudyType::Interventional);
    CHECK(format_date(r.registration_date) == "2019-04-17");
    CHECK(r.condition_tags.size() == 2);
    CHECK_CODE(client.fetch_study_record("NCT12"), ErrorCode::MalformedId);
    CHECK_CODE(client.fetch_study_record("NCT00000001"), ErrorCode::NotFound);
    CHECK_CODE(client.fetch_study_record("NCT55555555"), ErrorCode::Transport);

    server.stop();
    t.join();
    CHECK_CODE(client.fetch_study_record("NCT03923790"), ErrorCode::Transport);
}

TEST_CASE("registry config honours the environment override") {
    ::setenv(kRegistryUrlEnv, "http://registry.test/api", 1);
    CHECK(RegistryConfig::from_env().base_url == "http://registry.test/api");
    ::unsetenv(kRegistryUrlEnv);
    CHECK(RegistryConfig::from_env().base_url == kDefaultRegistryUrl);
}

TEST_CASE("filter_studies applies type, condition and inclusive date range") {
    FilterCriteria c;
    c.from = parse_date("2021-01-01");
    c.to = parse_date("2024-04-15");
    c.condition_terms = default_cancer_terms();
    const std::vector<StudyRecord> in = {
        record("NCT00000001", "2022-06-01"),
        record("NCT00000002", "2020-12-31"),
        record("NCT00000003", "2021-01-01"),
        record("NCT00000004", "2024-04-15"),
        record("NCT00000005", "2024-04-16"),
        record("NCT00000006", "2022-06-01", StudyType::Observational),
        record("NCT00000007", "2022-06-01", StudyType::Interventional, {"Stroke"}),
        record("NCT00000008", "2022-06-01", StudyType::Interventional, {"Non-Hodgkin LYMPHOMA"}),
    };
    const auto out = filter_studies(in, c);
    std::vector<std::string> ids;
    for (const auto& r : out) ids.push_back(r.nct_id);
    CHECK(ids == std::vector<std::string>{"NCT00000001", "NCT00000003", "NCT00000004", "NCT00000008"});

    std::swap(c.from, c.to);
    CHECK_CODE(filter_studies(in, c), ErrorCode::InvalidInput);
}

TEST_CASE("document store ingest rules") {
    DocumentStore store;
    const auto d = store.ingest("NCT03041090", "hello world", 1);
    CHECK(d.token_count == 2);
    CHECK(d.doc_id == make_doc_id("NCT03041090", "hello world"));
    CHECK(d.doc_id.rfind("icf-", 0) == 0);
    CHECK_CODE(store.ingest("NCT03041090", "", 1), ErrorCode::EmptyText);
    CHECK_CODE(store.ingest("NCT03041090", "  \n\t ", 1), ErrorCode::EmptyText);
    CHECK_CODE(store.ingest("NCT03041090", "text", 0), ErrorCode::InvalidInput);
    CHECK_CODE(store.ingest("NCT1", "text", 1), ErrorCode::MalformedId);
    CHECK_CODE(store.ingest("NCT03041090", "hello world", 1), ErrorCode::DuplicateDocument);
    // Same trial, new text: a distinct document.
    store.ingest("NCT03041090", "hello  brave\nworld", 2);
    CHECK(store.by_nct("NCT03041090").size() == 2);
    CHECK(store.find(d.doc_id).has_value());
    CHECK_FALSE(store.find("icf-000000000000").has_value());
}

TEST_CASE("fixture ICF token counts match the independent recount") {
    const auto expected = nlohmann::json::parse(testsupport::fixture("expected_pipeline.json"))["documents"];
    for (const auto& nct : {"NCT90000001", "NCT90000002"}) {
        const auto text = testsupport::fixture(std::string("icf/") + nct + ".txt");
        CHECK(static_cast<std::int64_t>(count_tokens(text)) == expected[nct]["tokens"].get<std::int64_t>());
        CHECK(make_doc_id(nct, text) == expected[nct]["doc_id"].get<std::string>());
    }
}

TEST_CASE("document store persists and reloads") {
    TempDir dir("docs");
    const auto path = dir / "documents.jsonl";
    {
        DocumentStore store(path);
        store.ingest("NCT00000001", "one two three", 3, DocumentSource::Registry);
        store.ingest("NCT00000002", "four five", 1);
    }
    DocumentStore reopened(path);
    CHECK(reopened.size() == 2);
    const auto docs = reopened.all();
    CHECK(docs[0].source == DocumentSource::Registry);
    CHECK(docs[0].page_count == 3);
    CHECK_CODE(reopened.ingest("NCT00000002", "four five", 1), ErrorCode::DuplicateDocument);

    DocumentStore custom(dir / "other.jsonl", [](std::string_view s) { return s.size(); });
    CHECK(custom.ingest("NCT00000003", "abcd", 1).token_count == 4);
}

TEST_CASE("concurrent ingests are serialized") {
    DocumentStore store;
    std::vector<std::thread> threads;
    std::atomic<int> dup{0};
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&, t] {
            for (int i = 0; i < 20; ++i) {
                try {
                    store.ingest("NCT00000001", "text " + std::to_string(i), 1);
                } catch (const Error& e) {
                    if (e.code() == ErrorCode::DuplicateDocument) ++dup;
                }
                (void)store.all();
            }
            (void)t;
        });
    }
    for (auto& t : threads) t.join();
    CHECK(store.size() == 20);
    CHECK(dup == 8 * 20 - 20);
}

TEST_CASE("histograms and corpus stats") {
    const auto one = corpus_stats({{"d1", "NCT00000001", "x", 3, 100, DocumentSource::LocalFile}});
    CHECK(one.document_count == 1);
    CHECK(one.pages == std::vector<std::int64_t>{3});
    CHECK(one.tokens == std::vector<std::int64_t>{100});
    CHECK(one.token_histogram.counts == std::vector<std::size_t>{1});

    const auto twins = make_histogram({7, 7});
    CHECK(twins.counts == std::vector<std::size_t>{2});

    // Tallied by hand: span 29 over at most 10 buckets gives width 3 from 2, so
    // [2,4] holds 2 and 4, [8,10] holds 9, [11,13] holds 11, [29,31] holds 30.
    const auto h = make_histogram({2, 4, 9, 11, 30}, 10);
    CHECK(h.lower == 2);
    CHECK(h.width == 3);
    CHECK(h.counts == std::vector<std::size_t>{2, 0, 1, 1, 0, 0, 0, 0, 0, 1});
    std::size_t total = 0;
    for (auto c : h.counts) total += c;
    CHECK(total == 5);
    CHECK(h.bucket_high(h.counts.size() - 1) >= 30);

    CHECK_CODE(corpus_stats({}), ErrorCode::EmptyCorpus);
    CHECK_CODE(make_histogram({}), ErrorCode::EmptyInput);
}

TEST_CASE("study record json round trip") {
    const auto r = record("NCT00000009", "2023-02-03");
    const auto back = study_record_from_json(to_json(r));
    CHECK(back.nct_id == r.nct_id);
    CHECK(back.registration_date == r.registration_date);
    CHECK(back.condition_tags == r.condition_tags);
}
