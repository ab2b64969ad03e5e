#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "consentforge/evaluation.hpp"
#include "consentforge/llm_gateway.hpp"
#include "consentforge/mcqa.hpp"

namespace consentforge::verifier {

struct VerifierVote {
    std::string mcqa_id;
    std::string model_id;
    /// nullopt is Unparseable.
    std::optional<char> parsed_option;
    std::string raw_text;
};

nlohmann::ordered_json to_json(const VerifierVote& v);
VerifierVote vote_from_json(const nlohmann::json& j);

/// System and user messages with the ICF and the question block substituted.
/// Errors: EmptyDocument, InvalidMcqa.
llm::Transcript build_verifier_transcript(std::string_view icf_text, const mcqa::Mcqa& mcqa);

/// First standalone A-F label on the first non-blank line ("B) ...", "(C",
/// "A.", "Option D", "Answer: E"). A bare capital "A" starting an ordinary
/// word sequence ("A patient ...") is read as the article, not a label.
std::optional<char> parse_vote(std::string_view raw);

struct FlagPolicy {
    /// Flag when more than this many votes differ from the assigned answer.
    std::size_t max_dissent = 1;
    /// Flag when a strict-majority consensus names another label.
    bool flag_adverse_consensus = true;
    /// Flag when no vote matches the assigned answer.
    bool flag_no_agreement = true;
};

struct VerifierReport {
    std::string mcqa_id;
    char assigned_answer = 'A';
    std::vector<VerifierVote> votes;
    std::size_t agree_count = 0;
    std::optional<char> consensus;
    bool flag_for_review = false;
};

nlohmann::ordered_json to_json(const VerifierReport& r);
VerifierReport report_from_json(const nlohmann::json& j);

/// Unparseable votes count as disagreement. Consensus is a label chosen by
/// more than half of the parsed votes. Errors: NoVotes, InvalidMcqa.
VerifierReport cross_check(const mcqa::Mcqa& mcqa, const std::vector<VerifierVote>& votes,
                           const FlagPolicy& policy = {});

struct PanelMember {
    llm::ChatProvider* provider = nullptr;
    llm::GenerationParams params = llm::verifier_defaults();
};

struct VerifyOptions {
    FlagPolicy policy;
    std::size_t parallelism = 1;
};

/// One job per (MCQA, panel member). A job whose call fails records an
/// Unparseable vote with the error in raw_text. Reports follow input order.
/// `icf_text_of` maps doc_id to ICF text. Errors: NotFound (unmapped doc_id),
/// InvalidMcqa, NoVotes (empty panel).
std::vector<VerifierReport> verify_mcqas(const std::vector<mcqa::Mcqa>& mcqas,
                                         const std::map<std::string, std::string>& icf_text_of,
                                         const std::vector<PanelMember>& panel, llm::Gateway& gateway,
                                         const VerifyOptions& options = {});

/// Agreement with the assigned answer per error mode and per model, with the
/// human readers' agreement alongside when stats are given.
nlohmann::ordered_json cross_tab(const std::vector<VerifierReport>& reports,
                                 const std::map<std::string, evaluation::ErrorModeKind>& modes,
                                 const std::map<std::string, evaluation::McqaStats>& reader_stats = {});

} // namespace consentforge::verifier
