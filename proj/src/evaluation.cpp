#include "consentforge/evaluation.hpp"

#include "consentforge/error.hpp"
#include "consentforge/jsonl.hpp"
#include "consentforge/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace consentforge::evaluation {

namespace {

constexpr std::array<std::string_view, 11> kBackgroundNames{
    "MD", "DO", "NP", "NP Student", "PA", "PA Student", "Pharmacist", "Pharmacy Student",
    "Other Healthcare Students", "Other", "Not reported"};

constexpr std::array<std::string_view, kLikertLevels> kLikertNames{"StronglyDisagree", "Disagree", "Neither", "Agree",
                                                                   "StronglyAgree"};
constexpr std::array<std::string_view, kLikertLevels> kLikertWording{
    "Strongly disagree", "Disagree", "Neither agree or disagree", "Agree", "Strongly agree"};

constexpr std::array<std::string_view, kErrorModeCount> kErrorModeNames{
    "HumanError", "MissingInformationInIcf", "ErrorInGeneratedMcqa", "AmbiguousDefinition", "NotInEnglish"};

bool valid_label(char c) { return c >= 'A' && c <= mcqa::kMaxLabel; }

std::string fixed(double v, int places = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", places, v);
    return buf;
}

std::string compact(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c != ' ' && c != '_' && c != '-') out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

} // namespace

std::string_view to_string(ReaderBackground b) { return kBackgroundNames[static_cast<std::size_t>(b)]; }

ReaderBackground reader_background_from_string(std::string_view s) {
    const std::string key = compact(s);
    for (std::size_t i = 0; i < kBackgroundNames.size(); ++i) {
        if (compact(kBackgroundNames[i]) == key) return static_cast<ReaderBackground>(i);
    }
    throw Error(ErrorCode::InvalidInput, "unknown reader background: " + std::string(s));
}

nlohmann::ordered_json to_json(const AnnotationRead& r) {
    nlohmann::ordered_json j = {
        {"reader_id", r.reader_id}, {"mcqa_id", r.mcqa_id}, {"chosen_option", std::string(1, r.chosen_option)}};
    if (r.reader_background) j["reader_background"] = to_string(*r.reader_background);
    return j;
}

AnnotationRead annotation_from_json(const nlohmann::json& j) {
    try {
        AnnotationRead r;
        r.reader_id = j.at("reader_id").get<std::string>();
        r.mcqa_id = j.at("mcqa_id").get<std::string>();
        const auto option = std::string(text::trim(j.at("chosen_option").get<std::string>()));
        if (option.size() != 1 || !valid_label(option[0])) {
            throw Error(ErrorCode::InvalidInput, "chosen_option must be one of A-F, got '" + option + "'");
        }
        r.chosen_option = option[0];
        if (j.contains("reader_background") && !j["reader_background"].is_null()) {
            r.reader_background = reader_background_from_string(j["reader_background"].get<std::string>());
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidInput, std::string("annotation read: ") + e.what());
    }
}

std::vector<AnnotationRead> load_annotations(const std::filesystem::path& path) {
    std::vector<AnnotationRead> reads;
    for (const auto& j : jsonl::read_file(path)) reads.push_back(annotation_from_json(j));
    return reads;
}

nlohmann::ordered_json to_json(const McqaStats& s) {
    return {{"mcqa_id", s.mcqa_id},
            {"qualified_reads", s.qualified_reads},
            {"difficulty", s.difficulty},
            {"agreement", s.agreement},
            {"majority_answer", std::string(1, s.majority_answer)},
            {"tie", s.tie},
            {"matches_assigned", s.matches_assigned}};
}

McqaStats score_mcqa(const std::vector<AnnotationRead>& reads, char assigned_answer) {
    if (reads.empty()) throw Error(ErrorCode::NoReads, "no reads to score");
    std::array<std::size_t, 26> counts{};
    std::size_t disagreeing = 0;
    for (const auto& r : reads) {
        if (r.mcqa_id != reads.front().mcqa_id) {
            throw Error(ErrorCode::InvalidInput, "reads reference several MCQAs: " + reads.front().mcqa_id + ", " + r.mcqa_id);
        }
        if (!valid_label(r.chosen_option)) throw Error(ErrorCode::InvalidInput, "read option outside A-F");
        ++counts[static_cast<std::size_t>(r.chosen_option - 'A')];
        if (r.chosen_option != assigned_answer) ++disagreeing;
    }
    const std::size_t top = *std::max_element(counts.begin(), counts.end());
    const auto first = std::find(counts.begin(), counts.end(), top);
    const auto tied = std::count(counts.begin(), counts.end(), top);

    McqaStats s;
    s.mcqa_id = reads.front().mcqa_id;
    s.qualified_reads = reads.size();
    const double n = static_cast<double>(reads.size());
    s.difficulty = static_cast<double>(disagreeing) / n;
    s.agreement = static_cast<double>(top) / n;
    s.majority_answer = static_cast<char>('A' + (first - counts.begin()));
    s.tie = tied > 1;
    s.matches_assigned = s.majority_answer == assigned_answer;
    return s;
}

std::vector<McqaStats> score_corpus(const std::vector<AnnotationRead>& reads,
                                    const std::map<std::string, char>& assigned) {
    std::map<std::string, std::vector<AnnotationRead>> grouped;
    for (const auto& r : reads) {
        if (!assigned.count(r.mcqa_id)) throw Error(ErrorCode::UnknownMcqa, "read for unknown MCQA " + r.mcqa_id);
        grouped[r.mcqa_id].push_back(r);
    }
    std::vector<McqaStats> out;
    out.reserve(grouped.size());
    for (const auto& [id, group] : grouped) out.push_back(score_mcqa(group, assigned.at(id)));
    return out;
}

double corpus_accuracy(const std::vector<McqaStats>& stats) {
    if (stats.empty()) throw Error(ErrorCode::EmptyInput, "no scored MCQAs");
    const auto matching = std::count_if(stats.begin(), stats.end(), [](const McqaStats& s) { return s.matches_assigned; });
    return static_cast<double>(matching) / static_cast<double>(stats.size());
}

std::vector<McqaStats> select_qa_set(const std::vector<McqaStats>& stats, const QaThresholds& t) {
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in_unit(t.difficulty_min) || !in_unit(t.agreement_max)) {
        throw Error(ErrorCode::InvalidInput, "QA-set thresholds must lie in [0, 1]");
    }
    std::vector<McqaStats> out;
    std::copy_if(stats.begin(), stats.end(), std::back_inserter(out), [&](const McqaStats& s) {
        return s.difficulty >= t.difficulty_min && s.agreement <= t.agreement_max;
    });
    return out;
}

std::string_view to_string(StdConvention c) { return c == StdConvention::Sample ? "sample" : "population"; }

nlohmann::ordered_json to_json(const DistStats& d) {
    return {{"mean", d.mean}, {"std", d.std}, {"median", d.median}, {"min", d.min}, {"max", d.max},
            {"q05", d.q05},   {"q10", d.q10}, {"q90", d.q90},       {"q95", d.q95}};
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw Error(ErrorCode::EmptyInput, "quantile of an empty list");
    const double h = static_cast<double>(sorted.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

DistStats distribution(const std::vector<double>& values, StdConvention convention) {
    if (values.empty()) throw Error(ErrorCode::EmptyInput, "distribution of an empty list");
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    DistStats d;
    d.min = sorted.front();
    d.max = sorted.back();
    const double n = static_cast<double>(sorted.size());
    if (d.min == d.max) {
        d.mean = d.min;
    } else {
        double sum = 0.0;
        for (double v : values) sum += v;
        d.mean = sum / n;
        double ss = 0.0;
        for (double v : values) ss += (v - d.mean) * (v - d.mean);
        const double denom = convention == StdConvention::Sample ? n - 1.0 : n;
        d.std = denom > 0.0 ? std::sqrt(ss / denom) : 0.0;
    }
    d.median = quantile_sorted(sorted, 0.5);
    d.q05 = quantile_sorted(sorted, 0.05);
    d.q10 = quantile_sorted(sorted, 0.10);
    d.q90 = quantile_sorted(sorted, 0.90);
    d.q95 = quantile_sorted(sorted, 0.95);
    return d;
}

std::vector<TopicMeans> topic_breakdown(const std::vector<McqaStats>& stats,
                                        const std::map<std::string, mcqa::McqaTopicKey>& topic_of) {
    struct Acc {
        std::size_t n = 0;
        double difficulty = 0.0;
        double agreement = 0.0;
    };
    std::map<mcqa::McqaTopicKey, Acc> acc;
    for (const auto& s : stats) {
        auto it = topic_of.find(s.mcqa_id);
        if (it == topic_of.end()) throw Error(ErrorCode::UnmappedMcqa, "no topic for MCQA " + s.mcqa_id);
        auto& a = acc[it->second];
        ++a.n;
        a.difficulty += s.difficulty;
        a.agreement += s.agreement;
    }
    std::vector<TopicMeans> out;
    for (const auto& [topic, a] : acc) {
        const double n = static_cast<double>(a.n);
        out.push_back({topic, a.n, a.difficulty / n, a.agreement / n});
    }
    return out;
}

std::string_view to_string(Likert l) { return kLikertNames[static_cast<std::size_t>(l)]; }

Likert likert_from_string(std::string_view s) {
    const std::string key = compact(s);
    for (std::size_t i = 0; i < kLikertLevels; ++i) {
        if (compact(kLikertNames[i]) == key || compact(kLikertWording[i]) == key) return static_cast<Likert>(i);
    }
    if (key == "neitheragreenordisagree") return Likert::Neither;
    if (key.size() == 1 && key[0] >= '1' && key[0] <= '5') return static_cast<Likert>(key[0] - '1');
    throw Error(ErrorCode::InvalidInput, "unknown Likert level: " + std::string(s));
}

std::size_t LikertTally::total() const {
    std::size_t t = 0;
    for (auto c : counts) t += c;
    return t;
}

LikertTally& LikertTally::operator+=(const LikertTally& other) {
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
    return *this;
}

nlohmann::ordered_json to_json(const LikertTally& t) {
    nlohmann::ordered_json j;
    for (std::size_t i = 0; i < kLikertLevels; ++i) j[std::string(kLikertNames[i])] = t.counts[i];
    j["Missing"] = t.missing();
    j["total"] = t.total();
    return j;
}

LikertTally tally_likert(const std::vector<std::optional<Likert>>& responses) {
    LikertTally t;
    for (const auto& r : responses) ++t.counts[r ? static_cast<std::size_t>(*r) : kLikertLevels];
    return t;
}

nlohmann::ordered_json to_json(const SurveyResponse& r) {
    return {{"trial_id", r.trial_id},
            {"item_id", r.item_id},
            {"value", r.value ? nlohmann::ordered_json(to_string(*r.value)) : nlohmann::ordered_json(nullptr)},
            {"respondent_id", r.respondent_id}};
}

SurveyResponse survey_response_from_json(const nlohmann::json& j) {
    try {
        SurveyResponse r;
        r.trial_id = j.at("trial_id").get<std::string>();
        r.item_id = j.at("item_id").get<std::string>();
        if (j.contains("value") && !j["value"].is_null()) {
            const auto& v = j["value"];
            r.value = v.is_number_integer() ? likert_from_string(std::to_string(v.get<int>()))
                                            : likert_from_string(v.get<std::string>());
        }
        r.respondent_id = j.value("respondent_id", "");
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidInput, std::string("survey response: ") + e.what());
    }
}

std::vector<SurveyResponse> load_survey_responses(const std::filesystem::path& path) {
    std::vector<SurveyResponse> out;
    for (const auto& j : jsonl::read_file(path)) out.push_back(survey_response_from_json(j));
    return out;
}

SurveyTallies tally_surveys(const std::vector<SurveyResponse>& responses) {
    std::map<std::pair<std::string, std::string>, std::vector<std::optional<Likert>>> grouped;
    for (const auto& r : responses) grouped[{r.trial_id, r.item_id}].push_back(r.value);
    SurveyTallies t;
    for (const auto& [key, values] : grouped) {
        auto tally = tally_likert(values);
        t.per_trial[key] = tally;
        t.pooled[key.second] += tally;
    }
    return t;
}

nlohmann::ordered_json to_json(const SurveyTallies& t) {
    auto per_trial = nlohmann::ordered_json::array();
    for (const auto& [key, tally] : t.per_trial) {
        per_trial.push_back({{"trial_id", key.first}, {"item_id", key.second}, {"tally", to_json(tally)}});
    }
    auto pooled = nlohmann::ordered_json::array();
    for (const auto& [item, tally] : t.pooled) pooled.push_back({{"item_id", item}, {"tally", to_json(tally)}});
    return {{"per_trial", per_trial}, {"pooled", pooled}};
}

ClinicianResponse clinician_response_from_json(const nlohmann::json& j) {
    try {
        return {j.at("evaluator_id").get<std::string>(), j.at("summary_id").get<std::string>(),
                j.at("item_id").get<std::string>(), j.at("value").get<std::string>()};
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidInput, std::string("clinician response: ") + e.what());
    }
}

ClinicianTally tally_clinician_eval(const std::vector<ClinicianResponse>& responses, std::string_view preference_item) {
    std::map<std::string, ClinicianItemTally> items;
    for (const auto& r : responses) {
        auto& item = items[r.item_id];
        item.item_id = r.item_id;
        ++item.responses;
        ++item.value_counts[r.value];
    }
    ClinicianTally t;
    for (auto& [id, item] : items) {
        if (id == preference_item) {
            PreferenceSplit p;
            p.total = item.responses;
            p.counts = item.value_counts;
            for (const auto& [value, count] : p.counts) {
                p.fractions[value] = static_cast<double>(count) / static_cast<double>(p.total);
            }
            t.preference = std::move(p);
        }
        t.items.push_back(std::move(item));
    }
    return t;
}

nlohmann::ordered_json to_json(const ClinicianTally& t) {
    auto items = nlohmann::ordered_json::array();
    for (const auto& i : t.items) {
        items.push_back({{"item_id", i.item_id}, {"responses", i.responses}, {"value_counts", i.value_counts}});
    }
    nlohmann::ordered_json j = {{"items", items}};
    if (t.preference) {
        j["preference"] = {{"total", t.preference->total},
                           {"counts", t.preference->counts},
                           {"fractions", t.preference->fractions}};
    }
    return j;
}

std::string_view to_string(ErrorModeKind k) { return kErrorModeNames[static_cast<std::size_t>(k)]; }

ErrorModeKind error_mode_from_string(std::string_view s) {
    const std::string key = compact(s);
    for (std::size_t i = 0; i < kErrorModeNames.size(); ++i) {
        if (compact(kErrorModeNames[i]) == key) return static_cast<ErrorModeKind>(i);
    }
    throw Error(ErrorCode::InvalidInput, "unknown error mode: " + std::string(s));
}

nlohmann::ordered_json to_json(const ErrorModeEvent& e) {
    nlohmann::ordered_json j = {{"seq", e.seq},
                                {"mcqa_id", e.mcqa_id},
                                {"mode", to_string(e.mode.kind)},
                                {"note", e.mode.note},
                                {"actor", e.actor}};
    j["replaced"] = e.replaced ? nlohmann::ordered_json(to_string(*e.replaced)) : nlohmann::ordered_json(nullptr);
    return j;
}

ErrorModeLog::ErrorModeLog(std::set<std::string> known_mcqas, std::optional<std::filesystem::path> path)
    : known_(std::move(known_mcqas)), path_(std::move(path)) {
    if (!path_) return;
    for (const auto& j : jsonl::read_file(*path_)) {
        const auto id = j.at("mcqa_id").get<std::string>();
        if (!known_.count(id)) throw Error(ErrorCode::UnknownMcqa, "error-mode log names unknown MCQA " + id);
        apply(id, {error_mode_from_string(j.at("mode").get<std::string>()), j.value("note", "")}, j.value("actor", ""));
    }
}

ErrorModeEvent ErrorModeLog::apply(const std::string& mcqa_id, const ErrorMode& mode, const std::string& actor) {
    ErrorModeEvent e{events_.size() + 1, mcqa_id, mode, actor, std::nullopt};
    if (auto it = current_.find(mcqa_id); it != current_.end()) e.replaced = it->second.kind;
    current_[mcqa_id] = mode;
    events_.push_back(e);
    return e;
}

ErrorModeEvent ErrorModeLog::record(const std::string& mcqa_id, const ErrorMode& mode, const std::string& actor) {
    std::lock_guard lock(mutex_);
    if (!known_.count(mcqa_id)) throw Error(ErrorCode::UnknownMcqa, "unknown MCQA " + mcqa_id);
    auto e = apply(mcqa_id, mode, actor);
    if (path_) jsonl::Appender(*path_).append(to_json(e));
    return e;
}

std::map<std::string, ErrorMode> ErrorModeLog::current() const {
    std::lock_guard lock(mutex_);
    return current_;
}

std::array<std::size_t, kErrorModeCount> ErrorModeLog::counts() const {
    std::lock_guard lock(mutex_);
    std::array<std::size_t, kErrorModeCount> out{};
    for (const auto& [id, mode] : current_) ++out[static_cast<std::size_t>(mode.kind)];
    return out;
}

std::vector<ErrorModeEvent> ErrorModeLog::events() const {
    std::lock_guard lock(mutex_);
    return events_;
}

nlohmann::ordered_json evaluation_report(const std::vector<McqaStats>& stats,
                                         const std::map<std::string, mcqa::McqaTopicKey>& topic_of,
                                         const ReportOptions& options) {
    std::vector<double> reads, difficulty, agreement;
    std::size_t matching = 0, ties = 0;
    for (const auto& s : stats) {
        reads.push_back(static_cast<double>(s.qualified_reads));
        difficulty.push_back(s.difficulty);
        agreement.push_back(s.agreement);
        matching += s.matches_assigned ? 1 : 0;
        ties += s.tie ? 1 : 0;
    }
    nlohmann::ordered_json j;
    j["mcqa_count"] = stats.size();
    j["matching"] = matching;
    j["ties"] = ties;
    j["accuracy"] = corpus_accuracy(stats);
    j["std_convention"] = to_string(options.std_convention);
    j["distribution"] = {{"qualified_reads", to_json(distribution(reads, options.std_convention))},
                         {"difficulty", to_json(distribution(difficulty, options.std_convention))},
                         {"agreement", to_json(distribution(agreement, options.std_convention))}};
    if (!topic_of.empty()) {
        auto topics = nlohmann::ordered_json::array();
        for (const auto& t : topic_breakdown(stats, topic_of)) {
            topics.push_back({{"topic", mcqa::topic(t.topic).short_term},
                              {"count", t.count},
                              {"mean_difficulty", t.mean_difficulty},
                              {"mean_agreement", t.mean_agreement}});
        }
        j["topics"] = topics;
    }
    const auto qa = select_qa_set(stats, options.qa);
    auto qa_ids = nlohmann::ordered_json::array();
    for (const auto& s : qa) qa_ids.push_back(s.mcqa_id);
    j["qa_set"] = {{"difficulty_min", options.qa.difficulty_min},
                   {"agreement_max", options.qa.agreement_max},
                   {"count", qa.size()},
                   {"mcqa_ids", qa_ids}};
    return j;
}

std::string report_text(const nlohmann::ordered_json& r) {
    std::string out;
    out += "MCQAs scored: " + std::to_string(r.at("mcqa_count").get<std::size_t>()) + "\n";
    out += "Corpus accuracy: " + fixed(r.at("accuracy").get<double>()) + " (" +
           std::to_string(r.at("matching").get<std::size_t>()) + "/" +
           std::to_string(r.at("mcqa_count").get<std::size_t>()) + ")\n";
    out += "Majority ties: " + std::to_string(r.at("ties").get<std::size_t>()) + "\n";
    out += "Standard deviation: " + r.at("std_convention").get<std::string>() + "\n\n";
    out += "metric           mean     std      min      q05      q10      median   q90      q95      max\n";
    for (const char* metric : {"qualified_reads", "difficulty", "agreement"}) {
        const auto& d = r.at("distribution").at(metric);
        char line[256];
        std::snprintf(line, sizeof line, "%-16s", metric);
        out += line;
        for (const char* f : {"mean", "std", "min", "q05", "q10", "median", "q90", "q95", "max"}) {
            std::snprintf(line, sizeof line, " %-8s", fixed(d.at(f).get<double>()).c_str());
            out += line;
        }
        out += "\n";
    }
    if (r.contains("topics")) {
        out += "\ntopic                              n     difficulty  agreement\n";
        for (const auto& t : r.at("topics")) {
            char line[256];
            std::snprintf(line, sizeof line, "%-34s %-5zu %-11s %s\n", t.at("topic").get<std::string>().c_str(),
                          t.at("count").get<std::size_t>(), fixed(t.at("mean_difficulty").get<double>()).c_str(),
                          fixed(t.at("mean_agreement").get<double>()).c_str());
            out += line;
        }
    }
    const auto& qa = r.at("qa_set");
    out += "\nQA set (difficulty >= " + fixed(qa.at("difficulty_min").get<double>(), 2) +
           ", agreement <= " + fixed(qa.at("agreement_max").get<double>(), 2) +
           "): " + std::to_string(qa.at("count").get<std::size_t>()) + "\n";
    return out;
}

} // namespace consentforge::evaluation
