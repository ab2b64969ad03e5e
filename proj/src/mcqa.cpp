#include "consentforge/mcqa.hpp"

#include "consentforge/error.hpp"
#include "consentforge/hash.hpp"
#include "consentforge/prompts.hpp"
#include "consentforge/text.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <thread>

namespace consentforge::mcqa {

std::string_view bundled_seed_bank_json();

namespace {

constexpr std::array<McqaTopic, kMcqaTopicCount> kTopics{{
    {McqaTopicKey::ResearchStatement, "A statement that the study involves research", "Research Statement"},
    {McqaTopicKey::Purpose, "An explanation of the purposes of the research", "Purpose"},
    {McqaTopicKey::ExpectedDuration, "The expected duration of the subject's participation", "Expected Duration"},
    {McqaTopicKey::Procedures, "A description of the procedures to be followed", "Procedures"},
    {McqaTopicKey::NumberOfSubjects, "The approximate number of subjects involved in the study", "Number of Subjects"},
    {McqaTopicKey::ExperimentalProcedures, "Identification of any procedures which are experimental",
     "Experimental Procedures"},
    {McqaTopicKey::Risks, "A description of any reasonably foreseeable risks or discomforts to the subject", "Risks"},
    {McqaTopicKey::Benefits,
     "A description of any benefits to the subject or to others which may reasonably be expected from the research",
     "Benefits"},
    {McqaTopicKey::AlternativeProcedures,
     "A disclosure of appropriate alternative procedures or courses of treatment, if any, that might be "
     "advantageous to the subject",
     "Alternative Procedures"},
    {McqaTopicKey::Confidentiality,
     "A statement describing the extent, if any, to which confidentiality of records identifying the subject will "
     "be maintained",
     "Confidentiality"},
    {McqaTopicKey::CompensationAndInjuryTreatment,
     "For research involving more than minimal risk, an explanation as to whether any compensation, and an "
     "explanation as to whether any medical treatments are available, if injury occurs and, if so, what they "
     "consist of, or where further information may be obtained",
     "Compensation and Injury Treatment"},
    {McqaTopicKey::ContactInformation,
     "Research, Rights or Injury: An explanation of whom to contact for answers to pertinent questions about the "
     "research and research subjects' rights, and whom to contact in the event of a research-related injury to the "
     "subject",
     "Contact Information"},
    {McqaTopicKey::VoluntaryParticipation,
     "A statement that participation is voluntary, refusal to participate will involve no penalty or loss of "
     "benefits to which the subject is otherwise entitled, and the subject may discontinue participation at any "
     "time without penalty or loss of benefits, to which the subject is otherwise entitled",
     "Voluntary Participation"},
    {McqaTopicKey::AdditionalCost, "Any additional costs to the subject that may result from participation in the research",
     "Additional Cost"},
    {McqaTopicKey::Withdraw,
     "The consequences of a subject's decision to withdraw from the research and procedures for orderly "
     "termination of participation by the subject",
     "Withdraw"},
}};

bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::string labels_text(const std::vector<char>& labels) {
    std::string out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i > 0) out += ", ";
        out.push_back(labels[i]);
    }
    return out;
}

std::string render_question(std::string_view stem, const std::vector<Option>& options) {
    std::string out(stem);
    for (const auto& o : options) {
        out.push_back('\n');
        out.push_back(o.label);
        out += ") ";
        out += o.text;
    }
    return out;
}

struct OptionLine {
    char label;
    std::string text;
};

// letter + one of ") . :" + whitespace + text; leading "(", "*" and "-"
// bullets and bold markers are tolerated.
std::optional<OptionLine> match_option_line(std::string_view line) {
    std::string_view s = text::trim(line);
    while (!s.empty() && (s.front() == '*' || s.front() == '-' || s.front() == ' ')) s.remove_prefix(1);
    if (!s.empty() && s.front() == '(') s.remove_prefix(1);
    if (s.size() < 3 || !is_upper(s[0])) return std::nullopt;
    if (s[1] != ')' && s[1] != '.' && s[1] != ':') return std::nullopt;
    std::size_t i = 2;
    while (i < s.size() && s[i] == '*') ++i;
    if (i >= s.size() || !text::is_space(s[i])) return std::nullopt;
    std::string_view body = text::trim(s.substr(i));
    while (!body.empty() && body.back() == '*') body.remove_suffix(1);
    if (body.empty()) return std::nullopt;
    return OptionLine{s[0], std::string(text::trim(body))};
}

bool consume_word(std::string_view& s, std::string_view word) {
    if (s.size() >= word.size() && text::iequals(s.substr(0, word.size()), word) &&
        (s.size() == word.size() || !is_alnum(s[word.size()]))) {
        s.remove_prefix(word.size());
        return true;
    }
    return false;
}

void skip_chars(std::string_view& s, std::string_view set) {
    while (!s.empty() && set.find(s.front()) != std::string_view::npos) s.remove_prefix(1);
}

std::optional<char> take_label(std::string_view& s) {
    skip_chars(s, " (*");
    if (s.empty() || !is_upper(s.front())) return std::nullopt;
    if (s.size() > 1 && is_alnum(s[1])) return std::nullopt;
    char label = s.front();
    s.remove_prefix(1);
    return label;
}

// Labels named on an answer line: "Answer: B", "Correct answer is (C)",
// "Answers: A, D", "**Answer:** Option B) ...".
std::optional<std::vector<char>> answer_labels_at(std::string_view line, std::size_t pos) {
    std::string_view rest = line.substr(pos + 6);
    if (!rest.empty() && (rest.front() == 's' || rest.front() == 'S')) rest.remove_prefix(1);
    skip_chars(rest, " :*-=\t");
    consume_word(rest, "is");
    skip_chars(rest, " :\t");
    consume_word(rest, "option");
    auto first = take_label(rest);
    if (!first) return std::nullopt;
    std::vector<char> labels{*first};
    for (;;) {
        skip_chars(rest, ").* \t");
        if (!rest.empty() && (rest.front() == ',' || rest.front() == '&' || rest.front() == '/')) {
            rest.remove_prefix(1);
        } else if (!consume_word(rest, "and")) {
            break;
        }
        skip_chars(rest, " ");
        consume_word(rest, "option");
        auto next = take_label(rest);
        if (!next) break;
        labels.push_back(*next);
    }
    return labels;
}

// Each "answer" on the line is tried in turn, so "**Answer:** The answer is C" resolves.
std::optional<std::vector<char>> answer_labels(std::string_view line) {
    const std::string lower = text::to_lower(line);
    for (auto pos = lower.find("answer"); pos != std::string::npos; pos = lower.find("answer", pos + 1)) {
        if (auto labels = answer_labels_at(line, pos)) return labels;
    }
    return std::nullopt;
}

bool is_header_line(std::string_view line) {
    auto t = text::trim(line);
    return t.size() >= 6 && t.substr(0, 3) == "===" && t.find("===", 3) != std::string_view::npos &&
           text::trim(t.substr(t.find("===", 3) + 3)).find_first_not_of(":") == std::string_view::npos;
}

std::string clean_stem_line(std::string_view line) {
    std::string_view t = text::trim(line);
    // "===New question===: Which ..." keeps the text after the header.
    if (t.substr(0, 3) == "===") {
        auto close = t.find("===", 3);
        if (close != std::string_view::npos) {
            t.remove_prefix(close + 3);
            skip_chars(t, ": ");
        }
    }
    skip_chars(t, "*");
    if (consume_word(t, "question")) skip_chars(t, " :*");
    while (!t.empty() && t.back() == '*') t.remove_suffix(1);
    return std::string(text::trim(t));
}

} // namespace

const std::array<McqaTopic, kMcqaTopicCount>& mcqa_topics() { return kTopics; }

const McqaTopic& topic(McqaTopicKey key) { return kTopics[static_cast<std::size_t>(key)]; }

std::optional<McqaTopicKey> topic_from_short_term(std::string_view short_term) {
    for (const auto& t : kTopics) {
        if (t.short_term == short_term) return t.key;
    }
    return std::nullopt;
}

std::optional<McqaTopicKey> topic_from_long_name(std::string_view long_name) {
    for (const auto& t : kTopics) {
        if (t.long_name == long_name) return t.key;
    }
    return std::nullopt;
}

std::vector<SeedMcqa> parse_seed_bank(const nlohmann::json& j) {
    if (!j.is_array()) throw Error(ErrorCode::InvalidInput, "seed bank must be a JSON array");
    std::vector<SeedMcqa> seeds;
    try {
        for (const auto& s : j) {
            const std::string long_name = s.at("topic").get<std::string>();
            auto key = topic_from_long_name(long_name);
            if (!key) throw Error(ErrorCode::InvalidInput, "seed bank: unknown topic " + long_name);
            SeedMcqa seed{*key, s.at("stem").get<std::string>(), {}, {}};
            for (const auto& o : s.at("options")) {
                seed.options.push_back({o.at("label").get<std::string>().at(0), o.at("text").get<std::string>()});
            }
            for (const auto& a : s.at("answers")) seed.answers.push_back(a.get<std::string>().at(0));
            seeds.push_back(std::move(seed));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidInput, std::string("seed bank: ") + e.what());
    } catch (const std::out_of_range&) {
        throw Error(ErrorCode::InvalidInput, "seed bank: empty label");
    }
    return seeds;
}

std::string_view seed_bank_json() { return bundled_seed_bank_json(); }

const std::vector<SeedMcqa>& seed_bank() {
    static const std::vector<SeedMcqa> seeds = parse_seed_bank(nlohmann::json::parse(bundled_seed_bank_json()));
    return seeds;
}

std::vector<std::string> validate_seed(const SeedMcqa& seed) {
    std::vector<std::string> anomalies;
    for (std::size_t i = 0; i < seed.options.size(); ++i) {
        const char expected = static_cast<char>('A' + i);
        if (seed.options[i].label != expected) {
            anomalies.push_back(std::string("option ") + std::to_string(i + 1) + " labelled " + seed.options[i].label +
                                ", expected " + expected);
        }
    }
    if (seed.answers.empty()) anomalies.emplace_back("no answer");
    for (char a : seed.answers) {
        bool present = std::any_of(seed.options.begin(), seed.options.end(), [a](const Option& o) { return o.label == a; });
        if (!present) anomalies.push_back(std::string("answer ") + a + " is not an option label");
    }
    return anomalies;
}

std::string serialize(const SeedMcqa& seed) {
    return render_question(seed.stem, seed.options) + "\nAnswer: " + labels_text(seed.answers);
}

std::string question_block(const Mcqa& m) { return render_question(m.stem, m.options); }

std::string serialize(const Mcqa& m) { return question_block(m) + "\nAnswer: " + labels_text(m.assigned_answers); }

nlohmann::ordered_json to_json(const Mcqa& m) {
    auto options = nlohmann::ordered_json::array();
    for (const auto& o : m.options) options.push_back({{"label", std::string(1, o.label)}, {"text", o.text}});
    nlohmann::ordered_json validity = {{"valid", m.validity.valid}};
    if (!m.validity.valid) validity["reason"] = m.validity.reason;
    return {{"mcqa_id", m.mcqa_id},
            {"nct_id", m.nct_id},
            {"doc_id", m.doc_id},
            {"topic", topic(m.topic).short_term},
            {"stem", m.stem},
            {"options", options},
            {"assigned_answer", labels_text(m.assigned_answers)},
            {"raw_text", m.raw_text},
            {"validity", validity},
            {"violations", m.violations}};
}

Mcqa mcqa_from_json(const nlohmann::json& j) {
    Mcqa m;
    m.mcqa_id = j.at("mcqa_id").get<std::string>();
    m.nct_id = j.value("nct_id", "");
    m.doc_id = j.value("doc_id", "");
    const std::string topic_name = j.at("topic").get<std::string>();
    auto key = topic_from_short_term(topic_name);
    if (!key) key = topic_from_long_name(topic_name);
    if (!key) throw Error(ErrorCode::InvalidInput, "unknown MCQA topic: " + topic_name);
    m.topic = *key;
    m.stem = j.value("stem", "");
    for (const auto& o : j.value("options", nlohmann::json::array())) {
        m.options.push_back({o.at("label").get<std::string>().at(0), o.at("text").get<std::string>()});
    }
    for (char c : j.value("assigned_answer", std::string{})) {
        if (is_upper(c)) m.assigned_answers.push_back(c);
    }
    m.raw_text = j.value("raw_text", "");
    const auto validity = j.value("validity", nlohmann::json::object());
    m.validity.valid = validity.value("valid", true);
    m.validity.reason = validity.value("reason", "");
    m.violations = j.value("violations", std::vector<std::string>{});
    return m;
}

llm::Transcript build_mcqa_transcript(std::string_view example_icf, const SeedMcqa& seed, std::string_view target_icf) {
    if (example_icf.empty()) throw Error(ErrorCode::EmptyDocument, "example ICF text is empty");
    if (target_icf.empty()) throw Error(ErrorCode::EmptyDocument, "target ICF text is empty");
    const std::string_view topic_text = topic(seed.topic).long_name;
    const std::string seed_text = serialize(seed);
    using llm::Role;
    return llm::Transcript{{
        {Role::System, std::string(prompts::mcqa_system())},
        {Role::User, prompts::render(prompts::mcqa_user1(),
                                     {{prompts::kExampleIcf, example_icf}, {prompts::kTargetTopic, topic_text}})},
        {Role::Assistant, prompts::render(prompts::mcqa_assistant(), {{prompts::kSeedMcqa, seed_text}})},
        {Role::User, prompts::render(prompts::mcqa_user2(),
                                     {{prompts::kTargetIcf, target_icf}, {prompts::kTargetTopic, topic_text}})},
    }};
}

ParsedMcqa parse_mcqa(std::string_view raw) {
    ParsedMcqa out;
    const auto lines = text::split_lines(raw);

    std::optional<std::size_t> first_option;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (match_option_line(lines[i])) {
            first_option = i;
            break;
        }
    }
    if (!first_option) {
        out.validity = Validity::invalid("no options found");
        return out;
    }

    std::optional<std::size_t> answer_line;
    for (std::size_t i = lines.size(); i-- > *first_option + 1;) {
        if (match_option_line(lines[i])) continue;
        if (auto labels = answer_labels(lines[i])) {
            answer_line = i;
            out.answers = *labels;
            break;
        }
    }

    std::vector<std::string> stem_lines;
    for (std::size_t i = 0; i < *first_option; ++i) {
        if (is_header_line(lines[i])) continue;
        std::string cleaned = clean_stem_line(lines[i]);
        if (!cleaned.empty()) stem_lines.push_back(std::move(cleaned));
    }
    for (std::size_t i = 0; i < stem_lines.size(); ++i) {
        if (i > 0) out.stem.push_back('\n');
        out.stem += stem_lines[i];
    }

    const std::size_t options_end = answer_line ? *answer_line : lines.size();
    for (std::size_t i = *first_option; i < options_end; ++i) {
        if (auto opt = match_option_line(lines[i])) {
            out.options.push_back({opt->label, std::move(opt->text)});
        } else if (auto t = text::trim(lines[i]); !t.empty() && !out.options.empty()) {
            out.options.back().text += ' ';
            out.options.back().text += t;
        }
    }

    if (!answer_line) {
        out.validity = Validity::invalid("no answer line");
        return out;
    }
    if (out.stem.empty()) {
        out.validity = Validity::invalid("empty stem");
        return out;
    }
    if (std::any_of(out.options.begin(), out.options.end(), [](const Option& o) { return o.label > kMaxLabel; }) ||
        out.options.size() > static_cast<std::size_t>(kMaxLabel - 'A' + 1)) {
        out.validity = Validity::invalid("too many options");
        return out;
    }
    for (std::size_t i = 0; i < out.options.size(); ++i) {
        if (out.options[i].label != static_cast<char>('A' + i)) {
            out.validity = Validity::invalid("non-consecutive option labels");
            return out;
        }
    }
    if (out.options.size() < 2) {
        out.validity = Validity::invalid("too few options");
        return out;
    }
    std::vector<char> distinct = out.answers;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() > 1) {
        out.validity = Validity::invalid("multiple answers");
        return out;
    }
    out.answers = distinct;
    if (out.answers.front() < 'A' || static_cast<std::size_t>(out.answers.front() - 'A') >= out.options.size()) {
        out.validity = Validity::invalid("answer not in options");
        return out;
    }
    out.validity = Validity::ok();
    return out;
}

std::string_view to_string(Violation v) {
    switch (v) {
    case Violation::MultipleAnswers: return "MultipleAnswers";
    case Violation::AnswerNotInOptions: return "AnswerNotInOptions";
    case Violation::TooFewOptions: return "TooFewOptions";
    case Violation::VerbatimCorrectOption: return "VerbatimCorrectOption";
    }
    return "Unknown";
}

std::vector<Violation> validate_mcqa(const Mcqa& m, std::string_view icf_text) {
    std::vector<Violation> out;
    if (m.assigned_answers.size() > 1) out.push_back(Violation::MultipleAnswers);
    const Option* correct = nullptr;
    for (char a : m.assigned_answers) {
        auto it = std::find_if(m.options.begin(), m.options.end(), [a](const Option& o) { return o.label == a; });
        if (it == m.options.end()) {
            out.push_back(Violation::AnswerNotInOptions);
            break;
        }
        if (correct == nullptr) correct = &*it;
    }
    if (m.options.size() < 2) out.push_back(Violation::TooFewOptions);
    if (correct != nullptr && m.assigned_answers.size() == 1 && text::count_runs(correct->text) >= kVerbatimMinWords) {
        const std::string source = text::normalize_whitespace(icf_text);
        if (source.find(text::normalize_whitespace(correct->text)) != std::string::npos) {
            out.push_back(Violation::VerbatimCorrectOption);
        }
    }
    return out;
}

std::string make_mcqa_id(std::string_view doc_id, McqaTopicKey key) {
    std::string k(doc_id);
    k.push_back('\x1f');
    k.append(topic(key).short_term);
    return stable_id("mcqa-", k, 12);
}

CorpusGeneration generate_corpus_mcqas(const std::vector<corpus::IcfDocument>& documents,
                                       std::string_view exemplar_icf, llm::Gateway& gateway,
                                       llm::ChatProvider& provider, const llm::GenerationParams& params,
                                       const CorpusGenerationOptions& options) {
    params.validate();
    if (exemplar_icf.empty()) throw Error(ErrorCode::EmptyDocument, "exemplar ICF text is empty");
    const auto& seeds = seed_bank();
    const std::size_t attempts = documents.size() * seeds.size();
    std::vector<Mcqa> results(attempts);

    auto run_attempt = [&](std::size_t idx) {
        const auto& doc = documents[idx / seeds.size()];
        const auto& seed = seeds[idx % seeds.size()];
        Mcqa m;
        m.mcqa_id = make_mcqa_id(doc.doc_id, seed.topic);
        m.nct_id = doc.nct_id;
        m.doc_id = doc.doc_id;
        m.topic = seed.topic;
        try {
            m.raw_text = gateway.complete(provider, build_mcqa_transcript(exemplar_icf, seed, doc.text), params).text;
        } catch (const Error& e) {
            m.validity = Validity::invalid(e.code() == ErrorCode::EmptyDocument ? "empty_document" : "provider_error");
            results[idx] = std::move(m);
            return;
        }
        auto parsed = parse_mcqa(m.raw_text);
        m.stem = std::move(parsed.stem);
        m.options = std::move(parsed.options);
        m.assigned_answers = std::move(parsed.answers);
        m.validity = std::move(parsed.validity);
        if (m.validity.valid) {
            for (auto v : validate_mcqa(m, doc.text)) m.violations.emplace_back(to_string(v));
        }
        results[idx] = std::move(m);
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(options.parallelism, attempts));
    if (workers <= 1) {
        for (std::size_t i = 0; i < attempts; ++i) run_attempt(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < attempts; i = next++) run_attempt(i);
            });
        }
    }

    std::sort(results.begin(), results.end(), [](const Mcqa& a, const Mcqa& b) {
        return std::tie(a.nct_id, a.topic, a.doc_id) < std::tie(b.nct_id, b.topic, b.doc_id);
    });
    CorpusGeneration out;
    out.attempts = attempts;
    for (auto& m : results) {
        (m.validity.valid ? out.mcqas : out.invalid).push_back(std::move(m));
    }
    out.invalid_count = out.invalid.size();
    return out;
}

} // namespace consentforge::mcqa
