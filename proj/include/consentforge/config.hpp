#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "consentforge/evaluation.hpp"
#include "consentforge/llm_gateway.hpp"
#include "consentforge/summarizer.hpp"
#include "consentforge/verifier.hpp"

namespace consentforge::config {

struct ProviderEndpoint {
    std::string model_id;
    std::string endpoint;
    /// Environment variable holding the bearer token.
    std::string api_key_env;
};

/// The verifier models used when the config names none.
std::vector<std::string> default_verifier_panel();

/// Settings for a pipeline run. Read from a key = value file; secrets never
/// appear in it, only the names of the environment variables holding them.
struct PipelineConfig {
    std::string registry_url = "https://clinicaltrials.gov/api/v2";
    ProviderEndpoint generator{"gpt-4", "", "OPENAI_API_KEY"};
    std::vector<ProviderEndpoint> verifier_panel;
    std::optional<std::filesystem::path> exemplar_icf;
    std::optional<std::filesystem::path> mock_script;
    std::filesystem::path store_dir = "consentforge-store";
    std::filesystem::path output_dir = "runs";
    double requests_per_minute = 60.0;
    bool wait_for_budget = true;
    std::size_t parallelism = 1;
    evaluation::QaThresholds qa;
    summarizer::ConstraintThresholds summary;
    verifier::FlagPolicy flags;
    std::string server_host = "127.0.0.1";
    int server_port = 8080;
};

/// Parses the key = value text. Relative paths resolve against `base_dir`.
/// Errors: InvalidInput (unknown key, bad value, threshold out of range,
/// referenced file missing).
PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir);

/// A missing file at the default location yields the defaults; a missing
/// file that was asked for explicitly is an error.
PipelineConfig load_config(const std::filesystem::path& path, bool explicit_path);

inline constexpr const char* kDefaultConfigPath = "consentforge.config";

} // namespace consentforge::config
