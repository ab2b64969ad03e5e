#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "consentforge/corpus.hpp"
#include "consentforge/llm_gateway.hpp"

namespace consentforge::mcqa {

/// The 15 question topics, in seed-bank order.
enum class McqaTopicKey {
    ResearchStatement,
    Purpose,
    ExpectedDuration,
    Procedures,
    NumberOfSubjects,
    ExperimentalProcedures,
    Risks,
    Benefits,
    AlternativeProcedures,
    Confidentiality,
    CompensationAndInjuryTreatment,
    ContactInformation,
    VoluntaryParticipation,
    AdditionalCost,
    Withdraw,
};

inline constexpr std::size_t kMcqaTopicCount = 15;
inline constexpr char kMaxLabel = 'F';
inline constexpr std::size_t kVerbatimMinWords = 5;

struct McqaTopic {
    McqaTopicKey key;
    std::string_view long_name;
    std::string_view short_term;
};

const std::array<McqaTopic, kMcqaTopicCount>& mcqa_topics();
const McqaTopic& topic(McqaTopicKey key);
std::optional<McqaTopicKey> topic_from_short_term(std::string_view short_term);
std::optional<McqaTopicKey> topic_from_long_name(std::string_view long_name);

struct Option {
    char label = 'A';
    std::string text;

    bool operator==(const Option&) const = default;
};

struct SeedMcqa {
    McqaTopicKey topic;
    std::string stem;
    std::vector<Option> options;
    std::vector<char> answers;
};

/// The 15 oncologist-written seeds, loaded from the bundled data file.
const std::vector<SeedMcqa>& seed_bank();
/// The bundled data file, byte for byte.
std::string_view seed_bank_json();
std::vector<SeedMcqa> parse_seed_bank(const nlohmann::json& j);

/// Invariant anomalies of a seed (non-consecutive labels, answers outside the
/// labels). Seeds are reproduced as printed, so anomalies are reported, not fixed.
std::vector<std::string> validate_seed(const SeedMcqa& seed);

/// Stem, one "X) text" line per option, and "Answer: X[, Y]".
std::string serialize(const SeedMcqa& seed);

struct Validity {
    bool valid = true;
    std::string reason;

    static Validity ok() { return {}; }
    static Validity invalid(std::string why) { return {false, std::move(why)}; }
};

struct Mcqa {
    std::string mcqa_id;
    std::string nct_id;
    std::string doc_id;
    McqaTopicKey topic = McqaTopicKey::ResearchStatement;
    std::string stem;
    std::vector<Option> options;
    /// Exactly one label for a Valid item.
    std::vector<char> assigned_answers;
    std::string raw_text;
    Validity validity;
    std::vector<std::string> violations;

    std::optional<char> assigned_answer() const {
        return assigned_answers.size() == 1 ? std::optional<char>(assigned_answers.front()) : std::nullopt;
    }
};

nlohmann::ordered_json to_json(const Mcqa& m);
Mcqa mcqa_from_json(const nlohmann::json& j);

/// Stem and option lines, without the answer (the question block shown to
/// readers and verifiers).
std::string question_block(const Mcqa& m);
/// `question_block` plus the "Answer: X" line.
std::string serialize(const Mcqa& m);

/// Errors: EmptyDocument.
llm::Transcript build_mcqa_transcript(std::string_view example_icf, const SeedMcqa& seed, std::string_view target_icf);

struct ParsedMcqa {
    std::string stem;
    std::vector<Option> options;
    std::vector<char> answers;
    Validity validity;
};

/// Never throws for malformed input; problems come back as Invalid(reason).
ParsedMcqa parse_mcqa(std::string_view raw);

enum class Violation { MultipleAnswers, AnswerNotInOptions, TooFewOptions, VerbatimCorrectOption };

std::string_view to_string(Violation v);

std::vector<Violation> validate_mcqa(const Mcqa& m, std::string_view icf_text);

std::string make_mcqa_id(std::string_view doc_id, McqaTopicKey topic);

struct CorpusGenerationOptions {
    /// Worker threads issuing attempts; results are order-independent.
    std::size_t parallelism = 1;
};

struct CorpusGeneration {
    std::vector<Mcqa> mcqas;
    std::vector<Mcqa> invalid;
    std::size_t attempts = 0;
    std::size_t invalid_count = 0;
};

/// One attempt per (document, seed topic). Provider failures become
/// Invalid("provider_error") and the run continues. Output sorted by
/// (nct_id, topic).
CorpusGeneration generate_corpus_mcqas(const std::vector<corpus::IcfDocument>& documents,
                                       std::string_view exemplar_icf, llm::Gateway& gateway,
                                       llm::ChatProvider& provider, const llm::GenerationParams& params,
                                       const CorpusGenerationOptions& options = {});

} // namespace consentforge::mcqa
