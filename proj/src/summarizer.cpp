#include "consentforge/summarizer.hpp"

#include "consentforge/error.hpp"
#include "consentforge/hash.hpp"
#include "consentforge/prompts.hpp"
#include "consentforge/text.hpp"

#include <cctype>

namespace consentforge::summarizer {

std::string_view to_string(SummaryStrategy s) { return s == SummaryStrategy::Direct ? "direct" : "sequential"; }

SummaryStrategy strategy_from_string(std::string_view s) {
    if (text::iequals(s, "direct")) return SummaryStrategy::Direct;
    if (text::iequals(s, "sequential")) return SummaryStrategy::Sequential;
    throw Error(ErrorCode::InvalidInput, "unknown summary strategy: " + std::string(s));
}

std::string_view to_string(ReviewStatus s) {
    switch (s) {
    case ReviewStatus::Draft: return "Draft";
    case ReviewStatus::Approved: return "Approved";
    case ReviewStatus::Edited: return "Edited";
    case ReviewStatus::Rejected: return "Rejected";
    }
    return "Draft";
}

ReviewStatus review_status_from_string(std::string_view s) {
    for (auto st : {ReviewStatus::Draft, ReviewStatus::Approved, ReviewStatus::Edited, ReviewStatus::Rejected}) {
        if (text::iequals(s, to_string(st))) return st;
    }
    throw Error(ErrorCode::InvalidInput, "unknown review status: " + std::string(s));
}

namespace {

nlohmann::ordered_json optional_number(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::optional<double> number_or_null(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

} // namespace

nlohmann::ordered_json to_json(const TrialSummary& s) {
    return {{"summary_id", s.summary_id},
            {"nct_id", s.nct_id},
            {"strategy", to_string(s.strategy)},
            {"text", s.text},
            {"word_count", s.word_count},
            {"readability_grade", optional_number(s.readability_grade)},
            {"constraints",
             {{"word_limit_ok", s.constraints.word_limit_ok},
              {"readability_grade", optional_number(s.constraints.readability_grade)},
              {"grade_target_ok", s.constraints.grade_target_ok},
              {"flags", s.constraints.flags}}},
            {"review_status", to_string(s.review_status)}};
}

TrialSummary summary_from_json(const nlohmann::json& j) {
    TrialSummary s;
    s.summary_id = j.at("summary_id").get<std::string>();
    s.nct_id = j.at("nct_id").get<std::string>();
    s.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    s.text = j.at("text").get<std::string>();
    s.word_count = j.at("word_count").get<std::size_t>();
    s.readability_grade = number_or_null(j, "readability_grade");
    const auto& c = j.at("constraints");
    s.constraints.word_limit_ok = c.at("word_limit_ok").get<bool>();
    s.constraints.readability_grade = number_or_null(c, "readability_grade");
    s.constraints.grade_target_ok = c.at("grade_target_ok").get<bool>();
    s.constraints.flags = c.value("flags", std::vector<std::string>{});
    s.review_status = review_status_from_string(j.value("review_status", "Draft"));
    return s;
}

std::size_t word_count(std::string_view text) noexcept { return text::count_runs(text); }

std::size_t syllables_in_word(std::string_view word) noexcept {
    std::size_t groups = 0;
    bool in_group = false;
    for (char c : word) {
        const char l = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        const bool vowel = l == 'a' || l == 'e' || l == 'i' || l == 'o' || l == 'u' || l == 'y';
        if (vowel && !in_group) ++groups;
        in_group = vowel;
    }
    return groups == 0 ? 1 : groups;
}

ReadabilityCounts readability_counts(std::string_view text) {
    ReadabilityCounts counts;
    for (auto word : text::split_runs(text)) {
        ++counts.words;
        counts.syllables += syllables_in_word(word);
    }
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if ((c == '.' || c == '!' || c == '?') && (i + 1 == text.size() || text::is_space(text[i + 1]))) {
            ++counts.sentences;
        }
    }
    return counts;
}

double flesch_kincaid_grade(std::string_view text) {
    const auto c = readability_counts(text);
    if (c.words == 0) throw Error(ErrorCode::Degenerate, "readability needs at least one word");
    if (c.sentences == 0) throw Error(ErrorCode::Degenerate, "readability needs at least one sentence terminator");
    const auto words = static_cast<double>(c.words);
    return 0.39 * (words / static_cast<double>(c.sentences)) + 11.8 * (static_cast<double>(c.syllables) / words) -
           15.59;
}

ConstraintReport check_constraints(const TrialSummary& summary, const ConstraintThresholds& thresholds) {
    ConstraintReport r;
    r.word_limit_ok = summary.word_count <= thresholds.word_limit;
    r.readability_grade = summary.readability_grade;
    r.grade_target_ok = summary.readability_grade && *summary.readability_grade <= thresholds.grade_max;
    if (!r.word_limit_ok) r.flags.emplace_back("word_limit_exceeded");
    if (!summary.readability_grade) {
        r.flags.emplace_back("readability_undefined");
    } else if (!r.grade_target_ok) {
        r.flags.emplace_back("reading_level");
    }
    return r;
}

llm::Transcript build_direct_prompt(std::string_view icf_text) {
    if (icf_text.empty()) throw Error(ErrorCode::EmptyDocument, "ICF text is empty");
    return llm::Transcript{{{llm::Role::User, prompts::render(prompts::direct_summary(), {{prompts::kFormText, icf_text}})}}};
}

std::string render_extracted_content(const extraction::ElementExtraction& e, MissingMode mode) {
    return extraction::to_json(e, mode == MissingMode::Omit).dump(4);
}

llm::Transcript build_sequential_prompt(const extraction::ElementExtraction& e, MissingMode mode) {
    if (!e.complete()) throw Error(ErrorCode::IncompleteExtraction, "sequential summary needs all 17 consent topics");
    const std::string content = render_extracted_content(e, mode);
    return llm::Transcript{
        {{llm::Role::User, prompts::render(prompts::sequential_summary(), {{prompts::kExtractedContent, content}})}}};
}

std::string make_summary_id(std::string_view nct_id, SummaryStrategy strategy, std::string_view text) {
    std::string key(nct_id);
    key.push_back('\x1f');
    key.append(to_string(strategy));
    key.push_back('\x1f');
    key.append(text);
    return stable_id("sum-", key, 12);
}

TrialSummary make_summary(std::string_view nct_id, SummaryStrategy strategy, std::string_view reply,
                          const ConstraintThresholds& thresholds) {
    const std::string_view text = text::trim(reply);
    if (text.empty()) throw Error(ErrorCode::EmptyResponse, "model returned an empty summary");
    TrialSummary s;
    s.nct_id = std::string(nct_id);
    s.strategy = strategy;
    s.text = std::string(text);
    s.summary_id = make_summary_id(nct_id, strategy, s.text);
    s.word_count = word_count(s.text);
    try {
        s.readability_grade = flesch_kincaid_grade(s.text);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::Degenerate) throw;
    }
    s.constraints = check_constraints(s, thresholds);
    return s;
}

TrialSummary generate_summary(const SummaryInput& input, SummaryStrategy strategy, llm::Gateway& gateway,
                              llm::ChatProvider& provider, const llm::GenerationParams& params,
                              const SummaryOptions& options) {
    llm::Transcript transcript;
    std::string nct_id;
    if (strategy == SummaryStrategy::Direct) {
        const auto* doc = std::get_if<corpus::IcfDocument>(&input);
        if (doc == nullptr) throw Error(ErrorCode::InvalidInput, "direct summarization needs the ICF document");
        nct_id = doc->nct_id;
        transcript = build_direct_prompt(doc->text);
    } else if (const auto* seq = std::get_if<SequentialInput>(&input)) {
        nct_id = seq->nct_id;
        transcript = build_sequential_prompt(seq->extraction, options.missing_mode);
    } else {
        const auto& doc = std::get<corpus::IcfDocument>(input);
        nct_id = doc.nct_id;
        auto extracted = extraction::run_extraction(doc.doc_id, doc.text, gateway, provider, params);
        transcript = build_sequential_prompt(extracted, options.missing_mode);
    }
    auto result = gateway.complete(provider, transcript, params);
    return make_summary(nct_id, strategy, result.text, options.thresholds);
}

} // namespace consentforge::summarizer
