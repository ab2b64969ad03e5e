#include "consentforge/config.hpp"

#include "consentforge/error.hpp"
#include "consentforge/jsonl.hpp"
#include "consentforge/text.hpp"

#include <charconv>
#include <map>

namespace consentforge::config {

namespace {

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidInput, "config " + key + ": not a number: " + value);
    }
}

long to_long(const std::string& key, const std::string& value) {
    long v = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw Error(ErrorCode::InvalidInput, "config " + key + ": not an integer: " + value);
    }
    return v;
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "yes" || value == "1") return true;
    if (value == "false" || value == "no" || value == "0") return false;
    throw Error(ErrorCode::InvalidInput, "config " + key + ": not a boolean: " + value);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
    std::filesystem::path p(value);
    return p.is_absolute() ? p : base / p;
}

std::filesystem::path existing_file(const std::string& key, const std::filesystem::path& p) {
    if (!std::filesystem::is_regular_file(p)) {
        throw Error(ErrorCode::InvalidInput, "config " + key + ": file not found: " + p.string());
    }
    return p;
}

void check_unit(const std::string& key, double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::InvalidInput, "config " + key + " must lie in [0, 1]");
}

} // namespace

std::vector<std::string> default_verifier_panel() {
    return {"gpt-4o", "command-r-plus", "gemini-1.0-pro", "claude-3-sonnet"};
}

PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
    PipelineConfig c;
    std::vector<std::string> panel = default_verifier_panel();
    std::map<std::string, ProviderEndpoint> verifier_settings;

    std::size_t line_no = 0;
    for (const auto& raw : text::split_lines(text)) {
        ++line_no;
        std::string_view line = text::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorCode::InvalidInput, "config line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key(text::trim(line.substr(0, eq)));
        const std::string value(text::trim(line.substr(eq + 1)));

        if (key == "registry_url") c.registry_url = value;
        else if (key == "generator.model_id") c.generator.model_id = value;
        else if (key == "generator.endpoint") c.generator.endpoint = value;
        else if (key == "generator.api_key_env") c.generator.api_key_env = value;
        else if (key == "verifier.panel") {
            const std::string& rest = value;
            panel.clear();
            std::size_t start = 0;
            while (start <= rest.size()) {
                auto comma = rest.find(',', start);
                if (comma == std::string::npos) comma = rest.size();
                auto item = std::string(text::trim(std::string_view(rest).substr(start, comma - start)));
                if (!item.empty()) panel.push_back(item);
                start = comma + 1;
            }
        } else if (key.rfind("verifier.", 0) == 0 && (key.size() > 9) &&
                   (key.ends_with(".endpoint") || key.ends_with(".api_key_env"))) {
            const auto last = key.rfind('.');
            const std::string model = key.substr(9, last - 9);
            auto& v = verifier_settings[model];
            v.model_id = model;
            (key.ends_with(".endpoint") ? v.endpoint : v.api_key_env) = value;
        } else if (key == "verifier.max_dissent") {
            const long v = to_long(key, value);
            if (v < 0) throw Error(ErrorCode::InvalidInput, "config verifier.max_dissent must be >= 0");
            c.flags.max_dissent = static_cast<std::size_t>(v);
        } else if (key == "verifier.flag_adverse_consensus") c.flags.flag_adverse_consensus = to_bool(key, value);
        else if (key == "verifier.flag_no_agreement") c.flags.flag_no_agreement = to_bool(key, value);
        else if (key == "exemplar_icf") c.exemplar_icf = existing_file(key, resolve(base_dir, value));
        else if (key == "mock_script") c.mock_script = existing_file(key, resolve(base_dir, value));
        else if (key == "store_dir") c.store_dir = resolve(base_dir, value);
        else if (key == "output_dir") c.output_dir = resolve(base_dir, value);
        else if (key == "rate_limit_rpm") {
            c.requests_per_minute = to_double(key, value);
            if (c.requests_per_minute < 0) throw Error(ErrorCode::InvalidInput, "config rate_limit_rpm must be >= 0");
        } else if (key == "wait_for_budget") c.wait_for_budget = to_bool(key, value);
        else if (key == "parallelism") {
            const long v = to_long(key, value);
            if (v < 1 || v > 256) throw Error(ErrorCode::InvalidInput, "config parallelism must lie in [1, 256]");
            c.parallelism = static_cast<std::size_t>(v);
        } else if (key == "qa.difficulty_min") {
            c.qa.difficulty_min = to_double(key, value);
            check_unit(key, c.qa.difficulty_min);
        } else if (key == "qa.agreement_max") {
            c.qa.agreement_max = to_double(key, value);
            check_unit(key, c.qa.agreement_max);
        } else if (key == "readability.grade_max") {
            c.summary.grade_max = to_double(key, value);
            if (c.summary.grade_max < 0) throw Error(ErrorCode::InvalidInput, "config readability.grade_max must be >= 0");
        } else if (key == "summary.word_limit") {
            const long v = to_long(key, value);
            if (v < 1) throw Error(ErrorCode::InvalidInput, "config summary.word_limit must be >= 1");
            c.summary.word_limit = static_cast<std::size_t>(v);
        } else if (key == "server.host") c.server_host = value;
        else if (key == "server.port") {
            const long v = to_long(key, value);
            if (v < 0 || v > 65535) throw Error(ErrorCode::InvalidInput, "config server.port out of range");
            c.server_port = static_cast<int>(v);
        } else {
            throw Error(ErrorCode::InvalidInput, "config line " + std::to_string(line_no) + ": unknown key " + key);
        }
    }

    for (const auto& model : panel) {
        ProviderEndpoint p{model, "", ""};
        if (auto it = verifier_settings.find(model); it != verifier_settings.end()) p = it->second;
        c.verifier_panel.push_back(p);
    }
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path, bool explicit_path) {
    if (!std::filesystem::exists(path)) {
        if (explicit_path) throw Error(ErrorCode::InvalidInput, "config file not found: " + path.string());
        return parse_config("", std::filesystem::current_path());
    }
    auto base = path.parent_path();
    if (base.empty()) base = std::filesystem::current_path();
    return parse_config(jsonl::read_text(path), base);
}

} // namespace consentforge::config
