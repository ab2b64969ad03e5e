#include "consentforge/cli.hpp"

#include "consentforge/config.hpp"
#include "consentforge/corpus.hpp"
#include "consentforge/error.hpp"
#include "consentforge/evaluation.hpp"
#include "consentforge/extraction.hpp"
#include "consentforge/jsonl.hpp"
#include "consentforge/mcqa.hpp"
#include "consentforge/review.hpp"
#include "consentforge/summarizer.hpp"
#include "consentforge/text.hpp"
#include "consentforge/verifier.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <set>

namespace consentforge::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct GlobalOptions {
    std::string config_path = config::kDefaultConfigPath;
    bool config_given = false;
    bool mock = false;
    std::string mock_script;
    std::string store_dir;
    std::string out_dir;
    std::string run_id;
};

std::string utc_stamp() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
    return buf;
}

std::string fixed(double v, int places = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", places, v);
    return buf;
}

template <typename T>
std::vector<json> as_lines(const std::vector<T>& records) {
    std::vector<json> out;
    out.reserve(records.size());
    for (const auto& r : records) out.emplace_back(r);
    return out;
}

ordered_json extraction_record(const extraction::ElementExtraction& e, const std::string& nct_id) {
    auto warnings = ordered_json::array();
    for (const auto& w : e.warnings) {
        warnings.push_back({{"kind", extraction::to_string(w.kind)}, {"key", w.key}, {"detail", w.detail}});
    }
    return {{"doc_id", e.doc_id}, {"nct_id", nct_id}, {"entries", extraction::to_json(e)}, {"warnings", warnings}};
}

class Workspace {
public:
    Workspace(const GlobalOptions& g, std::ostream& out, std::ostream& err)
        : out_(out), err_(err), mock_(g.mock) {
        cfg_ = config::load_config(g.config_path, g.config_given);
        store_ = g.store_dir.empty() ? cfg_.store_dir : fs::path(g.store_dir);
        out_dir_ = g.out_dir.empty() ? cfg_.output_dir : fs::path(g.out_dir);
        run_id_ = g.run_id.empty() ? utc_stamp() : g.run_id;
        if (!g.mock_script.empty()) cfg_.mock_script = fs::path(g.mock_script);

        llm::GatewayOptions options;
        options.requests_per_minute = mock_ ? 0.0 : cfg_.requests_per_minute;
        options.wait_for_budget = cfg_.wait_for_budget;
        gateway_ = std::make_unique<llm::Gateway>(options);
    }

    const config::PipelineConfig& cfg() const { return cfg_; }
    std::ostream& out() { return out_; }
    std::ostream& err() { return err_; }
    llm::Gateway& gateway() { return *gateway_; }

    fs::path store_file(const char* name) const { return store_ / name; }

    fs::path run_dir() {
        const fs::path dir = out_dir_ / ("run-" + run_id_);
        fs::create_directories(dir);
        return dir;
    }

    llm::GenerationParams generator_params() const { return llm::generation_defaults(cfg_.generator.model_id); }

    llm::ChatProvider& generator() {
        if (!generator_) generator_ = make_provider(cfg_.generator, "generator");
        return *generator_;
    }

    std::vector<verifier::PanelMember> panel() {
        std::vector<verifier::PanelMember> members;
        for (const auto& endpoint : cfg_.verifier_panel) {
            auto& slot = verifiers_[endpoint.model_id];
            if (!slot) slot = make_provider(endpoint, "verifier " + endpoint.model_id);
            members.push_back({slot.get(), llm::verifier_defaults(endpoint.model_id)});
        }
        return members;
    }

    std::vector<corpus::IcfDocument> documents(const std::vector<std::string>& ncts) {
        corpus::DocumentStore store(store_file("documents.jsonl"));
        std::vector<corpus::IcfDocument> docs;
        for (auto& d : store.all()) {
            if (ncts.empty() || std::find(ncts.begin(), ncts.end(), d.nct_id) != ncts.end()) docs.push_back(std::move(d));
        }
        if (docs.empty()) throw Error(ErrorCode::EmptyCorpus, "no matching documents in " + store_.string());
        return docs;
    }

    std::vector<mcqa::Mcqa> load_mcqas(const std::string& path) {
        std::vector<mcqa::Mcqa> out;
        for (const auto& j : jsonl::read_file(path.empty() ? store_file("mcqas.jsonl") : fs::path(path))) {
            out.push_back(mcqa::mcqa_from_json(j));
        }
        return out;
    }

    std::vector<evaluation::AnnotationRead> load_reads(const std::string& path) {
        return evaluation::load_annotations(path.empty() ? store_file("annotations.jsonl") : fs::path(path));
    }

    review::ReviewStore& review() {
        if (!review_) review_ = std::make_unique<review::ReviewStore>(store_file("review_log.jsonl"));
        return *review_;
    }

private:
    std::unique_ptr<llm::ChatProvider> make_provider(const config::ProviderEndpoint& endpoint, const std::string& role) {
        if (mock_) {
            if (!cfg_.mock_script) {
                throw Error(ErrorCode::InvalidInput, "--mock needs a script (--mock-script or mock_script in the config)");
            }
            if (!mock_provider_) mock_provider_ = std::make_shared<llm::MockProvider>(llm::MockProvider::load_script(*cfg_.mock_script));
            return std::make_unique<SharedMock>(mock_provider_);
        }
        if (endpoint.endpoint.empty()) {
            throw Error(ErrorCode::InvalidInput, "no endpoint configured for the " + role + " (or pass --mock)");
        }
        return std::make_unique<llm::HttpChatProvider>(
            llm::HttpProviderConfig{endpoint.model_id, endpoint.endpoint, endpoint.api_key_env, std::chrono::seconds(120)});
    }

    class SharedMock final : public llm::ChatProvider {
    public:
        explicit SharedMock(std::shared_ptr<llm::MockProvider> inner) : inner_(std::move(inner)) {}
        std::string name() const override { return inner_->name(); }
        std::string chat(const llm::Transcript& t, const llm::GenerationParams& p) override { return inner_->chat(t, p); }

    private:
        std::shared_ptr<llm::MockProvider> inner_;
    };

    std::ostream& out_;
    std::ostream& err_;
    bool mock_;
    config::PipelineConfig cfg_;
    fs::path store_;
    fs::path out_dir_;
    std::string run_id_;
    std::unique_ptr<llm::Gateway> gateway_;
    std::shared_ptr<llm::MockProvider> mock_provider_;
    std::unique_ptr<llm::ChatProvider> generator_;
    std::map<std::string, std::unique_ptr<llm::ChatProvider>> verifiers_;
    std::unique_ptr<review::ReviewStore> review_;
};

// fetch -----------------------------------------------------------------

struct FetchArgs {
    std::vector<std::string> ncts;
    std::string ids_file;
    std::string from = "0001-01-01";
    std::string to = "9999-12-31";
    std::string study_type = "Interventional";
    std::vector<std::string> conditions;
};

int cmd_fetch(Workspace& ws, const FetchArgs& a) {
    std::vector<std::string> ids = a.ncts;
    if (!a.ids_file.empty()) {
        for (const auto& line : text::split_lines(jsonl::read_text(a.ids_file))) {
            auto id = std::string(text::trim(line));
            if (!id.empty() && id.front() != '#') ids.push_back(id);
        }
    }
    if (ids.empty()) throw Error(ErrorCode::InvalidInput, "fetch needs --nct or --ids-file");

    auto registry = corpus::RegistryConfig::from_env();
    if (!std::getenv(corpus::kRegistryUrlEnv)) registry.base_url = ws.cfg().registry_url;
    corpus::RegistryClient client(registry);

    std::vector<corpus::StudyRecord> fetched;
    std::size_t failures = 0;
    for (const auto& id : ids) {
        try {
            fetched.push_back(client.fetch_study_record(id));
        } catch (const Error& e) {
            ++failures;
            ws.err() << "fetch " << id << ": " << to_string(e.code()) << ": " << e.what() << "\n";
        }
    }
    corpus::FilterCriteria criteria;
    criteria.from = corpus::parse_date(a.from);
    criteria.to = corpus::parse_date(a.to);
    criteria.study_type = corpus::study_type_from_string(a.study_type);
    criteria.condition_terms = a.conditions.empty() ? corpus::default_cancer_terms() : a.conditions;
    const auto kept = corpus::filter_studies(fetched, criteria);

    const auto path = ws.store_file("studies.jsonl");
    auto existing = jsonl::read_file(path);
    std::set<std::string> known;
    for (const auto& j : existing) known.insert(j.at("nct_id").get<std::string>());
    std::size_t added = 0;
    jsonl::Appender appender(path);
    for (const auto& r : kept) {
        if (known.insert(r.nct_id).second) {
            appender.append(corpus::to_json(r));
            ++added;
        }
    }
    ws.out() << "fetched " << fetched.size() << ", kept " << kept.size() << " after filtering, added " << added
             << " new study records\n";
    return failures == 0 ? 0 : 1;
}

// ingest ----------------------------------------------------------------

struct IngestArgs {
    std::string nct;
    std::string file;
    std::int64_t pages = 1;
    std::string source = "local";
};

int cmd_ingest(Workspace& ws, const IngestArgs& a) {
    corpus::DocumentStore store(ws.store_file("documents.jsonl"));
    const auto source = text::iequals(a.source, "registry") ? corpus::DocumentSource::Registry
                                                            : corpus::DocumentSource::LocalFile;
    try {
        const auto doc = store.ingest(a.nct, jsonl::read_text(a.file), a.pages, source);
        ws.out() << "ingested " << doc.doc_id << " (" << doc.nct_id << ", " << doc.token_count << " tokens, "
                 << doc.page_count << " pages)\n";
    } catch (const Error& e) {
        if (e.code() != ErrorCode::DuplicateDocument) throw;
        ws.out() << "already ingested: " << e.what() << "\n";
    }
    return 0;
}

// extract ---------------------------------------------------------------

std::map<std::string, json> load_by_key(const fs::path& path, const char* key) {
    std::map<std::string, json> out;
    for (auto& j : jsonl::read_file(path)) out[j.at(key).get<std::string>()] = std::move(j);
    return out;
}

void save_by_key(const fs::path& path, const std::map<std::string, json>& records) {
    std::vector<json> lines;
    for (const auto& [k, v] : records) lines.push_back(v);
    jsonl::write_file(path, lines);
}

int cmd_extract(Workspace& ws, const std::vector<std::string>& ncts) {
    const auto docs = ws.documents(ncts);
    std::vector<json> records, fidelity;
    auto stored = load_by_key(ws.store_file("extractions.jsonl"), "doc_id");
    for (const auto& doc : docs) {
        const auto e = extraction::run_extraction(doc.doc_id, doc.text, ws.gateway(), ws.generator(), ws.generator_params());
        const auto report = extraction::verify_fidelity(e, doc.text);
        auto record = extraction_record(e, doc.nct_id);
        records.emplace_back(record);
        stored[doc.doc_id] = record;
        fidelity.push_back({{"doc_id", doc.doc_id}, {"nct_id", doc.nct_id}, {"verdicts", extraction::to_json(report)}});
        ws.out() << doc.nct_id << " " << doc.doc_id << ": " << report.count(extraction::Verdict::Verbatim)
                 << " verbatim, " << report.count(extraction::Verdict::NotFoundInSource) << " not found, "
                 << report.count(extraction::Verdict::Missing) << " missing, " << e.warnings.size() << " warnings\n";
    }
    const auto dir = ws.run_dir();
    jsonl::write_file(dir / "extractions.jsonl", records);
    jsonl::write_file(dir / "fidelity.jsonl", fidelity);
    save_by_key(ws.store_file("extractions.jsonl"), stored);
    return 0;
}

// summarize -------------------------------------------------------------

struct SummarizeArgs {
    std::string strategy;
    std::vector<std::string> ncts;
    std::string extractions;
    std::string missing = "na";
};

int cmd_summarize(Workspace& ws, const SummarizeArgs& a) {
    const auto strategy = summarizer::strategy_from_string(a.strategy);
    summarizer::SummaryOptions options;
    options.thresholds = ws.cfg().summary;
    options.missing_mode = text::iequals(a.missing, "omit") ? summarizer::MissingMode::Omit : summarizer::MissingMode::RenderNa;

    std::map<std::string, extraction::ElementExtraction> extractions;
    if (strategy == summarizer::SummaryStrategy::Sequential) {
        const fs::path source = a.extractions.empty() ? ws.store_file("extractions.jsonl") : fs::path(a.extractions);
        for (const auto& j : jsonl::read_file(source)) {
            auto e = extraction::extraction_from_json(j);
            extractions[e.doc_id] = std::move(e);
        }
    }

    std::vector<json> records;
    for (const auto& doc : ws.documents(a.ncts)) {
        std::optional<extraction::ElementExtraction> used;
        summarizer::TrialSummary s;
        if (strategy == summarizer::SummaryStrategy::Sequential) {
            auto it = extractions.find(doc.doc_id);
            used = it != extractions.end() ? it->second
                                           : extraction::run_extraction(doc.doc_id, doc.text, ws.gateway(),
                                                                        ws.generator(), ws.generator_params());
            s = summarizer::generate_summary(summarizer::SequentialInput{doc.nct_id, *used}, strategy, ws.gateway(),
                                             ws.generator(), ws.generator_params(), options);
        } else {
            s = summarizer::generate_summary(doc, strategy, ws.gateway(), ws.generator(), ws.generator_params(), options);
        }
        records.emplace_back(summarizer::to_json(s));
        try {
            ws.review().enqueue_summary(s, doc.doc_id, used);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::DuplicateItem) throw;
        }
        ws.out() << s.summary_id << " " << s.nct_id << " " << summarizer::to_string(strategy) << ": " << s.word_count
                 << " words, grade " << (s.readability_grade ? fixed(*s.readability_grade, 2) : std::string("n/a"));
        for (const auto& f : s.constraints.flags) ws.out() << " [" << f << "]";
        ws.out() << "\n";
    }
    jsonl::write_file(ws.run_dir() / ("summaries_" + std::string(summarizer::to_string(strategy)) + ".jsonl"), records);
    return 0;
}

// mcqa-gen --------------------------------------------------------------

struct McqaGenArgs {
    std::string exemplar;
    std::vector<std::string> ncts;
    std::size_t parallelism = 0;
};

int cmd_mcqa_gen(Workspace& ws, const McqaGenArgs& a) {
    fs::path exemplar_path;
    if (!a.exemplar.empty()) exemplar_path = a.exemplar;
    else if (ws.cfg().exemplar_icf) exemplar_path = *ws.cfg().exemplar_icf;
    else throw Error(ErrorCode::InvalidInput, "mcqa-gen needs --exemplar or exemplar_icf in the config");
    const std::string exemplar = jsonl::read_text(exemplar_path);

    mcqa::CorpusGenerationOptions options;
    options.parallelism = a.parallelism ? a.parallelism : ws.cfg().parallelism;
    const auto result = mcqa::generate_corpus_mcqas(ws.documents(a.ncts), exemplar, ws.gateway(), ws.generator(),
                                                    ws.generator_params(), options);

    std::vector<json> valid, invalid;
    std::map<std::string, std::size_t> reasons, violations;
    auto stored = load_by_key(ws.store_file("mcqas.jsonl"), "mcqa_id");
    for (const auto& m : result.mcqas) {
        valid.emplace_back(mcqa::to_json(m));
        stored[m.mcqa_id] = mcqa::to_json(m);
        for (const auto& v : m.violations) ++violations[v];
    }
    for (const auto& m : result.invalid) {
        invalid.emplace_back(mcqa::to_json(m));
        stored.erase(m.mcqa_id);
        ++reasons[m.validity.reason];
    }
    const auto dir = ws.run_dir();
    jsonl::write_file(dir / "mcqas.jsonl", valid);
    jsonl::write_file(dir / "mcqas_invalid.jsonl", invalid);
    const ordered_json summary = {{"attempts", result.attempts},
                                  {"valid", result.mcqas.size()},
                                  {"invalid", result.invalid_count},
                                  {"invalid_reasons", reasons},
                                  {"violations", violations}};
    jsonl::write_text(dir / "mcqa_generation.json", summary.dump(2) + "\n");
    save_by_key(ws.store_file("mcqas.jsonl"), stored);
    ws.out() << "attempts " << result.attempts << ", valid " << result.mcqas.size() << ", invalid "
             << result.invalid_count << "\n";
    for (const auto& [reason, n] : reasons) ws.out() << "  invalid: " << reason << " x" << n << "\n";
    for (const auto& [v, n] : violations) ws.out() << "  violation: " << v << " x" << n << "\n";
    return 0;
}

// annotate-import -------------------------------------------------------

int cmd_annotate_import(Workspace& ws, const std::string& file) {
    const auto reads = evaluation::load_annotations(file);
    std::set<std::string> known;
    for (const auto& m : ws.load_mcqas("")) known.insert(m.mcqa_id);
    for (const auto& r : reads) {
        if (!known.count(r.mcqa_id)) throw Error(ErrorCode::UnknownMcqa, "read " + r.reader_id + " names unknown MCQA " + r.mcqa_id);
    }
    const auto path = ws.store_file("annotations.jsonl");
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& r : evaluation::load_annotations(path)) seen.insert({r.reader_id, r.mcqa_id});
    jsonl::Appender appender(path);
    std::size_t added = 0, skipped = 0;
    for (const auto& r : reads) {
        if (!seen.insert({r.reader_id, r.mcqa_id}).second) {
            ++skipped;
            continue;
        }
        appender.append(evaluation::to_json(r));
        ++added;
    }
    ws.out() << "imported " << added << " reads (" << skipped << " duplicates skipped)\n";
    return 0;
}

// eval / qa-select ------------------------------------------------------

struct EvalArgs {
    std::string annotations;
    std::string mcqas;
    std::string std_convention = "sample";
    double difficulty_min = -1;
    double agreement_max = -1;
};

std::vector<evaluation::McqaStats> score(Workspace& ws, const EvalArgs& a, std::map<std::string, mcqa::McqaTopicKey>* topics) {
    std::map<std::string, char> assigned;
    for (const auto& m : ws.load_mcqas(a.mcqas)) {
        if (auto ans = m.assigned_answer()) assigned[m.mcqa_id] = *ans;
        if (topics) (*topics)[m.mcqa_id] = m.topic;
    }
    return evaluation::score_corpus(ws.load_reads(a.annotations), assigned);
}

evaluation::QaThresholds thresholds(const Workspace& ws, const EvalArgs& a) {
    auto t = ws.cfg().qa;
    if (a.difficulty_min >= 0) t.difficulty_min = a.difficulty_min;
    if (a.agreement_max >= 0) t.agreement_max = a.agreement_max;
    return t;
}

int cmd_eval(Workspace& ws, const EvalArgs& a) {
    std::map<std::string, mcqa::McqaTopicKey> topics;
    const auto stats = score(ws, a, &topics);
    std::map<std::string, mcqa::McqaTopicKey> scored_topics;
    for (const auto& s : stats) scored_topics[s.mcqa_id] = topics.at(s.mcqa_id);
    evaluation::ReportOptions options;
    options.qa = thresholds(ws, a);
    options.std_convention = text::iequals(a.std_convention, "population") ? evaluation::StdConvention::Population
                                                                            : evaluation::StdConvention::Sample;
    const auto report = evaluation::evaluation_report(stats, scored_topics, options);
    const auto text = evaluation::report_text(report);
    const auto dir = ws.run_dir();
    jsonl::write_file(dir / "mcqa_stats.jsonl", as_lines(std::vector<ordered_json>(
                                                     [&] {
                                                         std::vector<ordered_json> v;
                                                         for (const auto& s : stats) v.push_back(evaluation::to_json(s));
                                                         return v;
                                                     }())));
    jsonl::write_text(dir / "eval_report.json", report.dump(2) + "\n");
    jsonl::write_text(dir / "eval_report.txt", text);
    ws.out() << text;
    return 0;
}

int cmd_qa_select(Workspace& ws, const EvalArgs& a) {
    const auto stats = score(ws, a, nullptr);
    const auto t = thresholds(ws, a);
    const auto selected = evaluation::select_qa_set(stats, t);
    std::vector<json> lines;
    for (const auto& s : selected) lines.emplace_back(evaluation::to_json(s));
    jsonl::write_file(ws.run_dir() / "qa_set.jsonl", lines);
    ws.out() << "QA set (difficulty >= " << fixed(t.difficulty_min, 2) << ", agreement <= " << fixed(t.agreement_max, 2)
             << "): " << selected.size() << " of " << stats.size() << "\n";
    for (const auto& s : selected) {
        ws.out() << "  " << s.mcqa_id << " difficulty " << fixed(s.difficulty) << " agreement " << fixed(s.agreement) << "\n";
    }
    return 0;
}

// verify ----------------------------------------------------------------

struct VerifyArgs {
    std::string mcqas;
    std::string ids;
};

int cmd_verify(Workspace& ws, const VerifyArgs& a) {
    auto mcqas = ws.load_mcqas(a.mcqas);
    if (!a.ids.empty()) {
        std::set<std::string> wanted;
        for (const auto& j : jsonl::read_file(a.ids)) wanted.insert(j.at("mcqa_id").get<std::string>());
        std::erase_if(mcqas, [&](const mcqa::Mcqa& m) { return !wanted.count(m.mcqa_id); });
    }
    std::map<std::string, std::string> texts;
    for (const auto& d : ws.documents({})) texts[d.doc_id] = d.text;

    verifier::VerifyOptions options;
    options.policy = ws.cfg().flags;
    options.parallelism = ws.cfg().parallelism;
    const auto reports = verifier::verify_mcqas(mcqas, texts, ws.panel(), ws.gateway(), options);

    std::vector<json> lines;
    std::size_t flagged = 0;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        lines.emplace_back(verifier::to_json(reports[i]));
        if (!reports[i].flag_for_review) continue;
        ++flagged;
        try {
            ws.review().enqueue_mcqa(mcqas[i], reports[i]);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::DuplicateItem) throw;
        }
        ws.out() << "  flagged " << reports[i].mcqa_id << ": agree " << reports[i].agree_count << "/"
                 << reports[i].votes.size() << "\n";
    }
    jsonl::write_file(ws.run_dir() / "verifier_reports.jsonl", lines);
    ws.out() << "verified " << reports.size() << " MCQAs with " << ws.cfg().verifier_panel.size() << " models, flagged "
             << flagged << "\n";
    return 0;
}

// report ----------------------------------------------------------------

int cmd_report(Workspace& ws, const std::string& verifier_reports) {
    ordered_json report;
    corpus::DocumentStore docs(ws.store_file("documents.jsonl"));
    if (docs.size() > 0) report["corpus"] = corpus::to_json(corpus::corpus_stats(docs.all()));

    auto& store = ws.review();
    ordered_json queue = ordered_json::object();
    std::map<std::string, evaluation::ErrorModeKind> modes;
    std::array<std::size_t, evaluation::kErrorModeCount> mode_counts{};
    for (const auto& item : store.list()) {
        auto key = std::string(review::to_string(item.kind)) + "/" + std::string(summarizer::to_string(item.status));
        queue[key] = queue.value(key, 0) + 1;
        if (item.error_mode) {
            modes[item.item_id] = item.error_mode->kind;
            ++mode_counts[static_cast<std::size_t>(item.error_mode->kind)];
        }
    }
    report["review_queue"] = queue;
    ordered_json mode_json = ordered_json::object();
    for (std::size_t i = 0; i < evaluation::kErrorModeCount; ++i) {
        mode_json[std::string(evaluation::to_string(static_cast<evaluation::ErrorModeKind>(i)))] = mode_counts[i];
    }
    report["error_modes"] = mode_json;
    report["surveys"] = evaluation::to_json(store.survey_tallies());
    if (!verifier_reports.empty()) {
        std::vector<verifier::VerifierReport> reports;
        for (const auto& j : jsonl::read_file(verifier_reports)) reports.push_back(verifier::report_from_json(j));
        report["verifier_cross_tab"] = verifier::cross_tab(reports, modes);
    }
    jsonl::write_text(ws.run_dir() / "report.json", report.dump(2) + "\n");
    ws.out() << report.dump(2) << "\n";
    return 0;
}

// serve -----------------------------------------------------------------

int cmd_serve(Workspace& ws, std::string host, int port) {
    review::ServerOptions options;
    options.host = host.empty() ? ws.cfg().server_host : host;
    options.port = port >= 0 ? port : ws.cfg().server_port;
    if (const char* token = std::getenv(review::kTokenEnv)) options.token = token;
    if (options.token.empty()) ws.err() << "warning: " << review::kTokenEnv << " is unset; authentication disabled\n";
    review::ReviewServer server(ws.review(), options);
    const int bound = server.bind();
    ws.out() << "review API listening on http://" << options.host << ":" << bound << "\n" << std::flush;
    server.listen();
    return 0;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Consent-form summarization, MCQA generation and human review pipeline.", "consentforge"};
    app.require_subcommand(1, 1);
    GlobalOptions g;
    auto* config_opt = app.add_option("--config", g.config_path, "Key = value config file")->capture_default_str();
    app.add_flag("--mock", g.mock, "Use the scripted mock provider instead of live endpoints");
    app.add_option("--mock-script", g.mock_script, "Mock script (fingerprint -> reply JSON)");
    app.add_option("--store", g.store_dir, "Store directory (overrides store_dir)");
    app.add_option("--out", g.out_dir, "Output directory for run folders (overrides output_dir)");
    app.add_option("--run-id", g.run_id, "Run folder name suffix instead of a UTC timestamp");

    FetchArgs fetch_args;
    auto* fetch = app.add_subcommand("fetch", "Fetch study records from the registry into the store");
    fetch->add_option("--nct", fetch_args.ncts, "NCT identifier (repeatable)");
    fetch->add_option("--ids-file", fetch_args.ids_file, "File with one NCT identifier per line");
    fetch->add_option("--from", fetch_args.from, "Earliest registration date (YYYY-MM[-DD])");
    fetch->add_option("--to", fetch_args.to, "Latest registration date (YYYY-MM[-DD])");
    fetch->add_option("--study-type", fetch_args.study_type, "Interventional, Observational or Other");
    fetch->add_option("--condition", fetch_args.conditions, "Condition term (repeatable; default: cancer terms)");

    IngestArgs ingest_args;
    auto* ingest = app.add_subcommand("ingest", "Add a local ICF text file to the store");
    ingest->add_option("--nct", ingest_args.nct, "NCT identifier")->required();
    ingest->add_option("--file", ingest_args.file, "ICF text file")->required();
    ingest->add_option("--pages", ingest_args.pages, "Page count of the source form");
    ingest->add_option("--source", ingest_args.source, "local or registry");

    std::vector<std::string> extract_ncts;
    auto* extract = app.add_subcommand("extract", "Extract the consent elements of stored ICFs");
    extract->add_option("--nct", extract_ncts, "Limit to these trials (repeatable)");

    SummarizeArgs summarize_args;
    auto* summarize = app.add_subcommand("summarize", "Generate trial summaries");
    summarize->add_option("--strategy", summarize_args.strategy, "direct or sequential")
        ->required()
        ->check(CLI::IsMember({"direct", "sequential"}));
    summarize->add_option("--nct", summarize_args.ncts, "Limit to these trials (repeatable)");
    summarize->add_option("--extractions", summarize_args.extractions, "Extractions JSONL for the sequential strategy");
    summarize->add_option("--missing", summarize_args.missing, "na or omit: how missing elements reach the prompt")
        ->check(CLI::IsMember({"na", "omit"}));

    McqaGenArgs mcqa_args;
    auto* mcqa_gen = app.add_subcommand("mcqa-gen", "Generate one MCQA per seed topic for each stored ICF");
    mcqa_gen->add_option("--exemplar", mcqa_args.exemplar, "Example ICF shown in the one-shot prompt");
    mcqa_gen->add_option("--nct", mcqa_args.ncts, "Limit to these trials (repeatable)");
    mcqa_gen->add_option("--parallelism", mcqa_args.parallelism, "Concurrent generation calls");

    std::string annotations_file;
    auto* annotate = app.add_subcommand("annotate-import", "Import annotation reads (JSON lines) into the store");
    annotate->add_option("--file", annotations_file, "Reads JSONL")->required();

    EvalArgs eval_args;
    auto add_eval_inputs = [&](CLI::App* sub) {
        sub->add_option("--annotations", eval_args.annotations, "Reads JSONL (default: store annotations)");
        sub->add_option("--mcqas", eval_args.mcqas, "MCQA JSONL (default: store MCQAs)");
        sub->add_option("--difficulty-min", eval_args.difficulty_min, "QA-set difficulty threshold")->check(CLI::Range(0.0, 1.0));
        sub->add_option("--agreement-max", eval_args.agreement_max, "QA-set agreement threshold")->check(CLI::Range(0.0, 1.0));
    };
    auto* eval = app.add_subcommand("eval", "Score MCQAs against annotation reads");
    add_eval_inputs(eval);
    eval->add_option("--std", eval_args.std_convention, "sample or population standard deviation")
        ->check(CLI::IsMember({"sample", "population"}));
    auto* qa_select = app.add_subcommand("qa-select", "Select the quality-assurance set");
    add_eval_inputs(qa_select);

    VerifyArgs verify_args;
    auto* verify = app.add_subcommand("verify", "Cross-check MCQAs with the verifier panel");
    verify->add_option("--mcqas", verify_args.mcqas, "MCQA JSONL (default: store MCQAs)");
    verify->add_option("--ids", verify_args.ids, "JSONL whose mcqa_id fields limit the run (e.g. qa_set.jsonl)");

    std::string verifier_reports;
    auto* report = app.add_subcommand("report", "Corpus, review, survey and verifier report");
    report->add_option("--verifier-reports", verifier_reports, "Verifier reports JSONL for the cross-tab");

    std::string serve_host;
    int serve_port = -1;
    auto* serve = app.add_subcommand("serve", "Run the review API");
    serve->add_option("--host", serve_host, "Bind address");
    serve->add_option("--port", serve_port, "Port (0 picks a free one)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }
    g.config_given = config_opt->count() > 0;

    try {
        Workspace ws(g, out, err);
        if (fetch->parsed()) return cmd_fetch(ws, fetch_args);
        if (ingest->parsed()) return cmd_ingest(ws, ingest_args);
        if (extract->parsed()) return cmd_extract(ws, extract_ncts);
        if (summarize->parsed()) return cmd_summarize(ws, summarize_args);
        if (mcqa_gen->parsed()) return cmd_mcqa_gen(ws, mcqa_args);
        if (annotate->parsed()) return cmd_annotate_import(ws, annotations_file);
        if (eval->parsed()) return cmd_eval(ws, eval_args);
        if (qa_select->parsed()) return cmd_qa_select(ws, eval_args);
        if (verify->parsed()) return cmd_verify(ws, verify_args);
        if (report->parsed()) return cmd_report(ws, verifier_reports);
        if (serve->parsed()) return cmd_serve(ws, serve_host, serve_port);
    } catch (const Error& e) {
        err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    err << app.help();
    return 2;
}

} // namespace consentforge::cli
