#include "consentforge/error.hpp"
#include "consentforge/mcqa.hpp"
#include "consentforge/text.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <set>

using namespace consentforge;
using namespace consentforge::mcqa;
using testsupport::fast_gateway;
using testsupport::FnProvider;

namespace {

Mcqa make(std::vector<Option> options, std::vector<char> answers) {
    Mcqa m;
    m.mcqa_id = "mcqa-t";
    m.stem = "Which is right?";
    m.options = std::move(options);
    m.assigned_answers = std::move(answers);
    return m;
}

std::vector<Violation> violations(const Mcqa& m, std::string_view icf = "Unrelated text.") { return validate_mcqa(m, icf); }

} // namespace

TEST_CASE("seed bank content") {
    const auto& seeds = seed_bank();
    CHECK(seeds.size() == 15);
    const auto subjects = std::find_if(seeds.begin(), seeds.end(),
                                       [](const SeedMcqa& s) { return s.topic == McqaTopicKey::NumberOfSubjects; });
    REQUIRE(subjects != seeds.end());
    CHECK(topic(subjects->topic).long_name == "The approximate number of subjects involved in the study");
    CHECK(subjects->stem == "About how many patients will be enrolled in the study?");
    CHECK(subjects->answers == std::vector<char>{'D'});
    const auto benefits = std::find_if(seeds.begin(), seeds.end(),
                                       [](const SeedMcqa& s) { return s.topic == McqaTopicKey::Benefits; });
    CHECK(benefits->answers == std::vector<char>{'A', 'D'});
    // The additional-cost seed is reproduced with its duplicated option label; the anomaly is reported.
    for (const auto& s : seeds) {
        const auto anomalies = validate_seed(s);
        if (s.topic == McqaTopicKey::AdditionalCost) {
            REQUIRE(anomalies.size() == 1);
            CHECK(anomalies[0] == "option 4 labelled C, expected D");
        } else {
            CHECK(anomalies.empty());
        }
    }
}

TEST_CASE("topic lookups match the mapping table") {
    std::size_t row = 0;
    for (const auto& line : consentforge::text::split_lines(testsupport::golden("topic_mapping.tsv"))) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        const auto key = topic_from_long_name(line.substr(0, tab));
        REQUIRE(key.has_value());
        CHECK(topic_from_short_term(line.substr(tab + 1)) == key);
        CHECK(static_cast<std::size_t>(*key) == row);
        ++row;
    }
    CHECK(row == kMcqaTopicCount);
    CHECK_FALSE(topic_from_short_term("Nonsense").has_value());
}

TEST_CASE("seed bank parsing rejects malformed data and reports anomalies") {
    CHECK_CODE(parse_seed_bank(nlohmann::json::object()), ErrorCode::InvalidInput);
    CHECK_CODE(parse_seed_bank(nlohmann::json::array({{{"topic", "Nope"}}})), ErrorCode::InvalidInput);
    SeedMcqa odd{McqaTopicKey::Purpose, "Q?", {{'A', "x"}, {'C', "y"}}, {'B'}};
    CHECK(validate_seed(odd).size() == 2);
}

TEST_CASE("one-shot transcript structure") {
    const auto& seed = seed_bank()[3];
    const auto t = build_mcqa_transcript("Example consent form.", seed, "Target consent form.");
    REQUIRE(t.messages.size() == 4);
    CHECK(t.messages[0].role == llm::Role::System);
    CHECK(t.messages[1].role == llm::Role::User);
    CHECK(t.messages[2].role == llm::Role::Assistant);
    CHECK(t.messages[3].role == llm::Role::User);
    CHECK(t.messages[2].content.rfind("===Example question===", 0) == 0);
    CHECK(t.messages[2].content.find(serialize(seed)) != std::string::npos);
    CHECK(t.messages[3].content.find("should not be the original sentences from the consent form") != std::string::npos);
    CHECK(t.messages[3].content.find(std::string(topic(seed.topic).long_name)) != std::string::npos);
    CHECK_CODE(build_mcqa_transcript("Example.", seed, ""), ErrorCode::EmptyDocument);
    CHECK_CODE(build_mcqa_transcript("", seed, "Target."), ErrorCode::EmptyDocument);
}

TEST_CASE("parse_mcqa grammar") {
    auto p = parse_mcqa("Which arm is experimental?\nA) Arm 1\nB) Arm 2\nAnswer: B");
    CHECK(p.validity.valid);
    CHECK(p.stem == "Which arm is experimental?");
    CHECK(p.options.size() == 2);
    CHECK(p.answers == std::vector<char>{'B'});

    CHECK(parse_mcqa("I'm sorry, I can't produce that.").validity.reason == "no options found");
    CHECK(parse_mcqa("Q?\nA) a\nB) b\nC) c\nD) d").validity.reason == "no answer line");
    CHECK(parse_mcqa("A) a\nB) b\nAnswer: A").validity.reason == "empty stem");
    CHECK(parse_mcqa("Q?\nA) a\nC) c\nAnswer: A").validity.reason == "non-consecutive option labels");
    CHECK(parse_mcqa("Q?\nA) a\nAnswer: A").validity.reason == "too few options");
    CHECK(parse_mcqa("Q?\nA) a\nB) b\nAnswer: A, B").validity.reason == "multiple answers");
    CHECK(parse_mcqa("Q?\nA) a\nB) b\nAnswer: E").validity.reason == "answer not in options");
    CHECK(parse_mcqa("").validity.reason == "no options found");

    // Tolerated decorations.
    p = parse_mcqa("===Question===\n**Question:** What is tested?\n(A) a pill\n- B. a shot\n*C:* a patch\n\n**Answer:** "
                   "The answer is option C");
    CHECK(p.validity.valid);
    CHECK(p.stem == "What is tested?");
    CHECK(p.options.size() == 3);
    CHECK(p.answers == std::vector<char>{'C'});
    // A multi-line stem is joined.
    p = parse_mcqa("First line\nsecond line?\nA) x\nB) y\nAnswer: A");
    CHECK(p.validity.valid);
    CHECK(p.stem.find("second line?") != std::string::npos);
}

TEST_CASE("validate_mcqa rules") {
    CHECK(violations(make({{'A', "one"}, {'B', "two"}, {'C', "three"}, {'D', "four"}}, {'B'})).empty());
    CHECK(violations(make({{'A', "one"}, {'B', "two"}}, {'E'})) == std::vector<Violation>{Violation::AnswerNotInOptions});
    CHECK(violations(make({{'A', "one"}, {'B', "two"}}, {'A', 'B'})) == std::vector<Violation>{Violation::MultipleAnswers});
    CHECK(violations(make({{'A', "one"}}, {'A'})) == std::vector<Violation>{Violation::TooFewOptions});

    const std::string icf = "Background.\nYou will receive radiation therapy to the\nbreast once a day for three weeks. Done.";
    const auto verbatim = make({{'A', "radiation therapy to the breast once a day for three weeks"}, {'B', "x"}}, {'A'});
    CHECK(violations(verbatim, icf) == std::vector<Violation>{Violation::VerbatimCorrectOption});
    const auto short_copy = make({{'A', "radiation therapy"}, {'B', "x"}}, {'A'});
    CHECK(violations(short_copy, icf).empty());
    const auto wrong_option_copied = make({{'A', "x"}, {'B', "radiation therapy to the breast once a day"}}, {'A'});
    CHECK(violations(wrong_option_copied, icf).empty());
}

TEST_CASE("serialization, ids and json") {
    auto m = make({{'A', "one"}, {'B', "two"}}, {'B'});
    CHECK(question_block(m) == "Which is right?\nA) one\nB) two");
    CHECK(serialize(m) == "Which is right?\nA) one\nB) two\nAnswer: B");
    CHECK(make_mcqa_id("icf-1", McqaTopicKey::Risks) == make_mcqa_id("icf-1", McqaTopicKey::Risks));
    CHECK(make_mcqa_id("icf-1", McqaTopicKey::Risks) != make_mcqa_id("icf-1", McqaTopicKey::Benefits));
    CHECK(make_mcqa_id("icf-1", McqaTopicKey::Risks).size() == 5 + 12);
    m.topic = McqaTopicKey::Withdraw;
    m.violations = {"VerbatimCorrectOption"};
    const auto j = to_json(m);
    CHECK(j["topic"] == "Withdraw");
    CHECK(j["assigned_answer"] == "B");
    const auto back = mcqa_from_json(j);
    CHECK(back.topic == m.topic);
    CHECK(back.options == m.options);
    CHECK(back.assigned_answers == m.assigned_answers);
    CHECK(back.violations == m.violations);
    CHECK(back.validity.valid);
}

TEST_CASE("corpus generation at full scale: 91 documents, 30 unparseable replies") {
    std::vector<corpus::IcfDocument> docs;
    for (int i = 0; i < 91; ++i) {
        char nct[16];
        std::snprintf(nct, sizeof nct, "NCT%08d", i + 1);
        docs.push_back({"icf-" + std::to_string(i), nct, "Consent form number " + std::to_string(i) + ".", 1, 4,
                        corpus::DocumentSource::LocalFile});
    }
    // Unparseable replies for the Withdraw topic of the first 30 documents.
    FnProvider p([](const llm::Transcript& t, const llm::GenerationParams&) {
        const auto& last = t.messages.back().content;
        const bool withdraw = last.find(std::string(topic(McqaTopicKey::Withdraw).long_name)) != std::string::npos;
        for (int i = 0; i < 30 && withdraw; ++i) {
            if (last.find("Consent form number " + std::to_string(i) + ".") != std::string::npos) {
                return std::string("I am unable to write a question for this form.");
            }
        }
        return std::string("What happens?\nA) Something\nB) Nothing\nC) Everything\nD) Anything\nAnswer: A");
    });
    auto gw = fast_gateway();
    CorpusGenerationOptions options;
    options.parallelism = 8;
    const auto out = generate_corpus_mcqas(docs, "Example form.", gw, p, llm::generation_defaults(), options);
    CHECK(out.attempts == 1365);
    CHECK(out.mcqas.size() == 1335);
    CHECK(out.invalid_count == 30);
    CHECK(out.mcqas.size() + out.invalid_count == out.attempts);
    for (const auto& m : out.invalid) CHECK(m.validity.reason == "no options found");

    const auto serial = generate_corpus_mcqas(docs, "Example form.", gw, p, llm::generation_defaults());
    REQUIRE(serial.mcqas.size() == out.mcqas.size());
    for (std::size_t i = 0; i < serial.mcqas.size(); ++i) CHECK(serial.mcqas[i].mcqa_id == out.mcqas[i].mcqa_id);
}

TEST_CASE("corpus generation edge cases") {
    FnProvider failing([](const llm::Transcript&, const llm::GenerationParams&) -> std::string {
        throw Error(ErrorCode::ProviderError, "down");
    });
    auto gw = fast_gateway();
    const auto none = generate_corpus_mcqas({}, "Example.", gw, failing, llm::generation_defaults());
    CHECK(none.attempts == 0);
    CHECK(none.mcqas.empty());

    const std::vector<corpus::IcfDocument> docs = {{"icf-1", "NCT00000001", "Text.", 1, 1, corpus::DocumentSource::LocalFile},
                                                   {"icf-2", "NCT00000002", "", 1, 0, corpus::DocumentSource::LocalFile}};
    CorpusGenerationOptions options;
    options.parallelism = 4;
    const auto out = generate_corpus_mcqas(docs, "Example.", gw, failing, llm::generation_defaults(), options);
    CHECK(out.attempts == 30);
    CHECK(out.invalid_count == 30);
    CHECK(out.invalid.front().validity.reason == "provider_error");
    CHECK(out.invalid.back().validity.reason == "empty_document");
    CHECK_CODE(generate_corpus_mcqas(docs, "", gw, failing, llm::generation_defaults()), ErrorCode::EmptyDocument);
}

TEST_CASE("fixture mock script reproduces the expected split") {
    auto mock = llm::MockProvider::from_file(testsupport::kFixtures / "mock_script.json");
    auto gw = fast_gateway();
    std::vector<corpus::IcfDocument> docs;
    for (const auto* nct : {"NCT90000001", "NCT90000002"}) {
        const auto text = testsupport::fixture(std::string("icf/") + nct + ".txt");
        docs.push_back({corpus::make_doc_id(nct, text), nct, text, 1, 1, corpus::DocumentSource::LocalFile});
    }
    const auto out = generate_corpus_mcqas(docs, testsupport::fixture("icf/exemplar_icf.txt"), gw, mock,
                                           llm::generation_defaults("mock-gen"));
    const auto expected = nlohmann::json::parse(testsupport::fixture("expected_pipeline.json"))["mcqa"];
    CHECK(out.mcqas.size() == expected["valid"].get<std::size_t>());
    CHECK(out.invalid_count == expected["invalid"].get<std::size_t>());
    for (const auto& m : out.invalid) CHECK(expected["invalid_reasons"][m.mcqa_id] == m.validity.reason);
    std::set<std::string> verbatim;
    for (const auto& m : out.mcqas) {
        if (!m.violations.empty()) verbatim.insert(m.mcqa_id);
    }
    CHECK(verbatim == expected["verbatim_violations"].get<std::set<std::string>>());
}
