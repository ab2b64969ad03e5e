#include "consentforge/verifier.hpp"

#include "consentforge/error.hpp"
#include "consentforge/prompts.hpp"
#include "consentforge/text.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <set>
#include <thread>

namespace consentforge::verifier {

namespace {

bool is_label(char c) { return c >= 'A' && c <= mcqa::kMaxLabel; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }

char require_assigned(const mcqa::Mcqa& m) {
    if (!m.validity.valid) throw Error(ErrorCode::InvalidMcqa, "MCQA " + m.mcqa_id + " is invalid: " + m.validity.reason);
    auto a = m.assigned_answer();
    if (!a) throw Error(ErrorCode::InvalidMcqa, "MCQA " + m.mcqa_id + " has no single assigned answer");
    return *a;
}

bool preceded_by_word(std::string_view line, std::size_t pos, std::string_view word) {
    std::size_t end = pos;
    while (end > 0 && line[end - 1] == ' ') --end;
    if (end < word.size()) return false;
    const std::size_t start = end - word.size();
    return text::iequals(line.substr(start, word.size()), word) && (start == 0 || !is_alnum(line[start - 1]));
}

} // namespace

nlohmann::ordered_json to_json(const VerifierVote& v) {
    return {{"mcqa_id", v.mcqa_id},
            {"model_id", v.model_id},
            {"parsed_option",
             v.parsed_option ? nlohmann::ordered_json(std::string(1, *v.parsed_option)) : nlohmann::ordered_json(nullptr)},
            {"raw_text", v.raw_text}};
}

VerifierVote vote_from_json(const nlohmann::json& j) {
    VerifierVote v;
    v.mcqa_id = j.at("mcqa_id").get<std::string>();
    v.model_id = j.at("model_id").get<std::string>();
    if (j.contains("parsed_option") && j["parsed_option"].is_string()) {
        const auto s = j["parsed_option"].get<std::string>();
        if (s.size() != 1 || !is_label(s[0])) throw Error(ErrorCode::InvalidInput, "vote label outside A-F: " + s);
        v.parsed_option = s[0];
    }
    v.raw_text = j.value("raw_text", "");
    return v;
}

llm::Transcript build_verifier_transcript(std::string_view icf_text, const mcqa::Mcqa& m) {
    require_assigned(m);
    if (text::trim(icf_text).empty()) throw Error(ErrorCode::EmptyDocument, "ICF text is empty");
    const std::string question = mcqa::question_block(m);
    return llm::Transcript{{
        {llm::Role::System, std::string(prompts::verifier_system())},
        {llm::Role::User,
         prompts::render(prompts::verifier_user(), {{prompts::kTargetIcf, icf_text}, {prompts::kMcqa, question}})},
    }};
}

std::optional<char> parse_vote(std::string_view raw) {
    std::string first;
    for (auto& l : text::split_lines(raw)) {
        if (!text::trim(l).empty()) {
            first = std::move(l);
            break;
        }
    }
    const std::string_view line = text::trim(first);
    if (line.empty()) return std::nullopt;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (!is_label(c)) continue;
        if (i > 0 && is_alnum(line[i - 1])) continue;
        if (i + 1 < line.size() && is_alnum(line[i + 1])) continue;
        const char next = i + 1 < line.size() ? line[i + 1] : '\0';
        const bool wrapped = next == ')' || next == '.' || next == ':' || next == ']' ||
                             (i > 0 && (line[i - 1] == '(' || line[i - 1] == '[')) ||
                             preceded_by_word(line, i, "option") || preceded_by_word(line, i, "answer") ||
                             preceded_by_word(line, i, "answer:") || preceded_by_word(line, i, "is");
        if (!wrapped && c == 'A' && next == ' ') {
            // "A patient ..." is the article.
            std::size_t j = i + 1;
            while (j < line.size() && line[j] == ' ') ++j;
            if (j < line.size() && is_lower(line[j])) continue;
        }
        return c;
    }
    return std::nullopt;
}

nlohmann::ordered_json to_json(const VerifierReport& r) {
    auto votes = nlohmann::ordered_json::array();
    for (const auto& v : r.votes) votes.push_back(to_json(v));
    return {{"mcqa_id", r.mcqa_id},
            {"assigned_answer", std::string(1, r.assigned_answer)},
            {"votes", votes},
            {"agree_count", r.agree_count},
            {"consensus", r.consensus ? nlohmann::ordered_json(std::string(1, *r.consensus)) : nlohmann::ordered_json(nullptr)},
            {"flag_for_review", r.flag_for_review}};
}

VerifierReport report_from_json(const nlohmann::json& j) {
    VerifierReport r;
    r.mcqa_id = j.at("mcqa_id").get<std::string>();
    r.assigned_answer = j.at("assigned_answer").get<std::string>().at(0);
    for (const auto& v : j.at("votes")) r.votes.push_back(vote_from_json(v));
    r.agree_count = j.at("agree_count").get<std::size_t>();
    if (j.contains("consensus") && j["consensus"].is_string()) r.consensus = j["consensus"].get<std::string>().at(0);
    r.flag_for_review = j.at("flag_for_review").get<bool>();
    return r;
}

VerifierReport cross_check(const mcqa::Mcqa& m, const std::vector<VerifierVote>& votes, const FlagPolicy& policy) {
    if (votes.empty()) throw Error(ErrorCode::NoVotes, "no verifier votes for " + m.mcqa_id);
    VerifierReport r;
    r.mcqa_id = m.mcqa_id;
    r.assigned_answer = require_assigned(m);
    r.votes = votes;

    std::map<char, std::size_t> counts;
    std::size_t parsed = 0;
    for (const auto& v : votes) {
        if (!v.parsed_option) continue;
        ++parsed;
        ++counts[*v.parsed_option];
    }
    r.agree_count = counts.count(r.assigned_answer) ? counts[r.assigned_answer] : 0;
    for (const auto& [label, n] : counts) {
        if (2 * n > parsed) r.consensus = label;
    }
    const std::size_t dissent = votes.size() - r.agree_count;
    r.flag_for_review = dissent > policy.max_dissent ||
                        (policy.flag_adverse_consensus && r.consensus && *r.consensus != r.assigned_answer) ||
                        (policy.flag_no_agreement && r.agree_count == 0);
    return r;
}

std::vector<VerifierReport> verify_mcqas(const std::vector<mcqa::Mcqa>& mcqas,
                                         const std::map<std::string, std::string>& icf_text_of,
                                         const std::vector<PanelMember>& panel, llm::Gateway& gateway,
                                         const VerifyOptions& options) {
    if (panel.empty()) throw Error(ErrorCode::NoVotes, "verifier panel is empty");
    std::vector<llm::Transcript> transcripts;
    transcripts.reserve(mcqas.size());
    for (const auto& m : mcqas) {
        auto it = icf_text_of.find(m.doc_id);
        if (it == icf_text_of.end()) throw Error(ErrorCode::NotFound, "no ICF text for document " + m.doc_id);
        transcripts.push_back(build_verifier_transcript(it->second, m));
    }

    const std::size_t jobs = mcqas.size() * panel.size();
    std::vector<VerifierVote> votes(jobs);
    auto run_job = [&](std::size_t idx) {
        const std::size_t mi = idx / panel.size();
        const auto& member = panel[idx % panel.size()];
        VerifierVote v;
        v.mcqa_id = mcqas[mi].mcqa_id;
        v.model_id = member.params.model_id;
        try {
            v.raw_text = gateway.complete(*member.provider, transcripts[mi], member.params).text;
            v.parsed_option = parse_vote(v.raw_text);
        } catch (const Error& e) {
            v.raw_text = std::string("error: ") + e.what();
        }
        votes[idx] = std::move(v);
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(options.parallelism, jobs));
    if (workers <= 1) {
        for (std::size_t i = 0; i < jobs; ++i) run_job(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < jobs; i = next++) run_job(i);
            });
        }
    }

    std::vector<VerifierReport> reports;
    reports.reserve(mcqas.size());
    for (std::size_t mi = 0; mi < mcqas.size(); ++mi) {
        std::vector<VerifierVote> mine(votes.begin() + static_cast<std::ptrdiff_t>(mi * panel.size()),
                                       votes.begin() + static_cast<std::ptrdiff_t>((mi + 1) * panel.size()));
        reports.push_back(cross_check(mcqas[mi], mine, options.policy));
    }
    return reports;
}

nlohmann::ordered_json cross_tab(const std::vector<VerifierReport>& reports,
                                 const std::map<std::string, evaluation::ErrorModeKind>& modes,
                                 const std::map<std::string, evaluation::McqaStats>& reader_stats) {
    struct Cell {
        std::size_t items = 0;
        std::size_t agree = 0;
    };
    std::map<evaluation::ErrorModeKind, std::map<std::string, Cell>> models;
    std::map<evaluation::ErrorModeKind, std::size_t> items;
    std::map<evaluation::ErrorModeKind, std::pair<double, std::size_t>> readers;
    for (const auto& r : reports) {
        auto mode = modes.find(r.mcqa_id);
        if (mode == modes.end()) continue;
        ++items[mode->second];
        for (const auto& v : r.votes) {
            auto& cell = models[mode->second][v.model_id];
            ++cell.items;
            if (v.parsed_option == r.assigned_answer) ++cell.agree;
        }
        if (auto s = reader_stats.find(r.mcqa_id); s != reader_stats.end()) {
            auto& acc = readers[mode->second];
            acc.first += 1.0 - s->second.difficulty;
            ++acc.second;
        }
    }
    auto rows = nlohmann::ordered_json::array();
    for (const auto& [mode, n] : items) {
        nlohmann::ordered_json per_model = nlohmann::ordered_json::object();
        for (const auto& [model, cell] : models[mode]) {
            per_model[model] = {{"items", cell.items},
                                {"agree", cell.agree},
                                {"agreement", static_cast<double>(cell.agree) / static_cast<double>(cell.items)}};
        }
        nlohmann::ordered_json row = {{"error_mode", evaluation::to_string(mode)}, {"mcqas", n}, {"models", per_model}};
        if (auto it = readers.find(mode); it != readers.end() && it->second.second > 0) {
            row["readers_agreement"] = it->second.first / static_cast<double>(it->second.second);
        }
        rows.push_back(row);
    }
    return {{"rows", rows}};
}

} // namespace consentforge::verifier
