#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

/// Verbatim prompt templates. Placeholders are substituted by `render`.
namespace consentforge::prompts {

inline constexpr std::string_view kFormText = "{form_text}";
inline constexpr std::string_view kExtractedContent = "{extracted_content}";
inline constexpr std::string_view kExampleIcf = "<text of the example ICF>";
inline constexpr std::string_view kTargetTopic = "<target topic>";
inline constexpr std::string_view kSeedMcqa = "<human-generated MCQA for the target topic>";
inline constexpr std::string_view kTargetIcf = "<target ICF>";
inline constexpr std::string_view kMcqa = "<MCQA>";

std::string_view direct_summary();
std::string_view extraction_request1();
std::string_view extraction_request2();
std::string_view sequential_summary();

std::string_view mcqa_system();
std::string_view mcqa_user1();
std::string_view mcqa_assistant();
std::string_view mcqa_user2();

std::string_view verifier_system();
std::string_view verifier_user();

using Bindings = std::vector<std::pair<std::string_view, std::string_view>>;

/// Single left-to-right pass: each placeholder occurrence in `tmpl` is replaced
/// by its bound value, and inserted values are never rescanned. Throws
/// std::logic_error if a binding's placeholder does not occur.
std::string render(std::string_view tmpl, const Bindings& bindings);

} // namespace consentforge::prompts
