#pragma once

#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

namespace consentforge::jsonl {

/// Reads every non-blank line as one JSON value. A missing file yields an
/// empty list; a malformed line throws Error(InvalidInput) naming the line.
std::vector<nlohmann::json> read_file(const std::filesystem::path& path);

/// Overwrites `path` with one compact JSON value per line.
void write_file(const std::filesystem::path& path, const std::vector<nlohmann::json>& records);

/// Append-only JSON-lines file; appends are serialized and flushed per record.
class Appender {
public:
    explicit Appender(std::filesystem::path path);

    void append(const nlohmann::json& record);
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::mutex mutex_;
};

void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

} // namespace consentforge::jsonl
