#pragma once

#include "consentforge/jsonl.hpp"
#include "consentforge/llm_gateway.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <unistd.h>

namespace testsupport {

inline const std::filesystem::path kSource = CF_SOURCE_DIR;
inline const std::filesystem::path kFixtures = kSource / "tests" / "fixtures";
inline const std::filesystem::path kGolden = kSource / "tests" / "golden";

inline std::string fixture(const std::string& rel) { return consentforge::jsonl::read_text(kFixtures / rel); }
inline std::string golden(const std::string& rel) { return consentforge::jsonl::read_text(kGolden / rel); }

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& name) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("cf-unit-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" + name);
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

/// Provider answering through a callback.
class FnProvider final : public consentforge::llm::ChatProvider {
public:
    using Fn = std::function<std::string(const consentforge::llm::Transcript&, const consentforge::llm::GenerationParams&)>;
    explicit FnProvider(Fn fn, std::string name = "fn") : fn_(std::move(fn)), name_(std::move(name)) {}
    std::string name() const override { return name_; }
    std::string chat(const consentforge::llm::Transcript& t, const consentforge::llm::GenerationParams& p) override {
        return fn_(t, p);
    }

private:
    Fn fn_;
    std::string name_;
};

/// Gateway without rate limiting or retry sleeps.
inline consentforge::llm::Gateway fast_gateway() {
    consentforge::llm::GatewayOptions o;
    o.requests_per_minute = 0;
    return consentforge::llm::Gateway(o, [](std::chrono::milliseconds) {});
}

} // namespace testsupport

#define CHECK_CODE(expr, ec)                                                     \
    do {                                                                         \
        bool thrown_ = false;                                                    \
        try {                                                                    \
            (void)(expr);                                                        \
        } catch (const consentforge::Error& e_) {                                \
            thrown_ = true;                                                      \
            CHECK_MESSAGE(e_.code() == (ec), "got " << consentforge::to_string(e_.code())); \
        }                                                                        \
        CHECK_MESSAGE(thrown_, "expected " << consentforge::to_string(ec));      \
    } while (0)
