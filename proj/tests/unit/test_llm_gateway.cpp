#include "consentforge/error.hpp"
#include "consentforge/hash.hpp"
#include "consentforge/llm_gateway.hpp"
#include "consentforge/summarizer.hpp"

#include "test_support.hpp"

#include <doctest.h>
#include <httplib.h>

#include <thread>

using namespace consentforge;
using namespace consentforge::llm;
using testsupport::fast_gateway;
using testsupport::FnProvider;

namespace {

Transcript terse() { return Transcript{{{Role::System, "You are terse."}, {Role::User, "Say OK."}}}; }

} // namespace

TEST_CASE("sha256 and fingerprints match an independent digest") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(fingerprint(terse()) == "5d9d9ecdadd515ea4014feebc72ce1242d01e4120df1e05995cf8670b4cce97a");
    CHECK(stable_id("x-", "abc", 4) == "x-ba78");
    auto other = terse();
    other.messages[1].role = Role::Assistant;
    CHECK(fingerprint(other) != fingerprint(terse()));
}

TEST_CASE("transcript and params validation") {
    CHECK_CODE(Transcript{}.validate(), ErrorCode::InvalidTranscript);
    CHECK_CODE((Transcript{{{Role::User, ""}}}.validate()), ErrorCode::InvalidTranscript);
    CHECK_CODE((Transcript{{{Role::User, "a"}, {Role::System, "b"}}}.validate()), ErrorCode::InvalidTranscript);
    CHECK_NOTHROW(terse().validate());

    auto p = generation_defaults("m");
    CHECK(p.temperature == 0.0);
    CHECK(p.top_p == 0.0);
    CHECK(p.max_tokens == 3000);
    p.top_p = 1.5;
    CHECK_CODE(p.validate(), ErrorCode::InvalidParams);
    p = generation_defaults();
    p.temperature = -0.1;
    CHECK_CODE(p.validate(), ErrorCode::InvalidParams);
    p = generation_defaults();
    p.max_tokens = 0;
    CHECK_CODE(p.validate(), ErrorCode::InvalidParams);

    const auto golden = nlohmann::json::parse(testsupport::golden("generation_params.json"));
    const auto d = generation_defaults();
    CHECK(d.temperature == golden["temperature"].get<double>());
    CHECK(d.top_p == golden["top_p"].get<double>());
    CHECK(d.max_tokens == golden["max_tokens"].get<std::int64_t>());
}

TEST_CASE("mock provider and gateway") {
    MockProvider mock({{fingerprint(terse()), "OK"}, {"special/" + fingerprint(terse()), "model-specific"}});
    auto gw = fast_gateway();
    const auto r = gw.complete(mock, terse(), generation_defaults("any"));
    CHECK(r.text == "OK");
    CHECK(r.attempt_count == 1);
    CHECK(r.model_id == "any");
    CHECK(gw.complete(mock, terse(), generation_defaults("any")).text == r.text);
    CHECK(gw.complete(mock, terse(), generation_defaults("special")).text == "model-specific");

    mock.fail_next(2);
    CHECK(gw.complete(mock, terse(), generation_defaults()).attempt_count == 3);
    mock.fail_next(3);
    CHECK_CODE(gw.complete(mock, terse(), generation_defaults()), ErrorCode::Exhausted);

    const Transcript unknown{{{Role::User, "nobody scripted this"}}};
    try {
        gw.complete(mock, unknown, generation_defaults());
        FAIL("expected ProviderError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ProviderError);
        CHECK(std::string(e.what()).find(fingerprint(unknown)) != std::string::npos);
    }
    CHECK_CODE(gw.complete(mock, Transcript{}, generation_defaults()), ErrorCode::InvalidTranscript);
    auto bad = generation_defaults();
    bad.top_p = 1.5;
    const auto before = mock.calls();
    CHECK_CODE(gw.complete(mock, terse(), bad), ErrorCode::InvalidParams);
    CHECK(mock.calls() == before);
}

TEST_CASE("retry backoff delays are exponential") {
    RetryPolicy p;
    CHECK(p.delay_for(1).count() == 500);
    CHECK(p.delay_for(2).count() == 1000);
    CHECK(p.delay_for(3).count() == 2000);

    std::vector<std::chrono::milliseconds> slept;
    GatewayOptions o;
    o.requests_per_minute = 0;
    Gateway gw(o, [&](std::chrono::milliseconds d) { slept.push_back(d); });
    MockProvider mock({{fingerprint(terse()), "OK"}});
    mock.fail_next(2);
    gw.complete(mock, terse(), generation_defaults());
    CHECK(slept == std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(500), std::chrono::milliseconds(1000)});
}

TEST_CASE("non-retryable provider errors surface at once") {
    int calls = 0;
    FnProvider p([&](const Transcript&, const GenerationParams&) -> std::string {
        ++calls;
        throw Error(ErrorCode::ProviderError, "bad request");
    });
    auto gw = fast_gateway();
    CHECK_CODE(gw.complete(p, terse(), generation_defaults()), ErrorCode::ProviderError);
    CHECK(calls == 1);
}

TEST_CASE("rate limiter budget") {
    auto now = std::chrono::steady_clock::time_point{};
    auto clock = [&] { return now; };
    RateLimiter limiter(2.0, clock);
    CHECK(limiter.try_acquire("p"));
    CHECK(limiter.try_acquire("p"));
    std::chrono::milliseconds wait{0};
    CHECK_FALSE(limiter.try_acquire("p", &wait));
    CHECK(wait.count() == 30000);
    CHECK(limiter.try_acquire("other"));
    now += std::chrono::seconds(30);
    CHECK(limiter.try_acquire("p"));
    CHECK(RateLimiter(0.0).try_acquire("p"));

    GatewayOptions strict;
    strict.requests_per_minute = 1;
    strict.wait_for_budget = false;
    Gateway gw(strict, [](std::chrono::milliseconds) {}, clock);
    MockProvider mock({{fingerprint(terse()), "OK"}});
    gw.complete(mock, terse(), generation_defaults());
    CHECK_CODE(gw.complete(mock, terse(), generation_defaults()), ErrorCode::RateLimited);

    GatewayOptions patient = strict;
    patient.wait_for_budget = true;
    std::chrono::milliseconds total{0};
    Gateway waiting(patient, [&](std::chrono::milliseconds d) { total += d; now += d; }, clock);
    waiting.complete(mock, terse(), generation_defaults());
    waiting.complete(mock, terse(), generation_defaults());
    CHECK(total.count() == 60000);
}

TEST_CASE("gateway is safe under concurrent callers") {
    MockProvider mock({{fingerprint(terse()), "OK"}});
    auto gw = fast_gateway();
    std::vector<std::thread> threads;
    std::atomic<int> ok{0};
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&] {
            for (int i = 0; i < 50; ++i) ok += gw.complete(mock, terse(), generation_defaults()).text == "OK";
        });
    }
    for (auto& t : threads) t.join();
    CHECK(ok == 400);
    CHECK(mock.calls() == 400);
}

TEST_CASE("fixture script answers the direct-summary transcript of fixture ICF 1") {
    auto mock = MockProvider::from_file(testsupport::kFixtures / "mock_script.json");
    auto gw = fast_gateway();
    const auto text = testsupport::fixture("icf/NCT90000001.txt");
    const auto r = gw.complete(mock, summarizer::build_direct_prompt(text), generation_defaults("mock-gen"));
    const auto expected = nlohmann::json::parse(testsupport::fixture("expected_pipeline.json"));
    CHECK(summarizer::word_count(r.text) == expected["summaries"]["NCT90000001/direct"]["word_count"].get<std::size_t>());
    CHECK_CODE(MockProvider::from_file(testsupport::kFixtures / "missing.json"), ErrorCode::Io);
}

TEST_CASE("http provider speaks the chat-completions protocol") {
    httplib::Server server;
    nlohmann::json seen;
    std::string auth;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen = nlohmann::json::parse(req.body);
        auth = req.get_header_value("Authorization");
        const auto last = seen["messages"].back()["content"].get<std::string>();
        if (last == "throttle") {
            res.status = 429;
        } else if (last == "crash") {
            res.status = 503;
        } else if (last == "reject") {
            res.status = 400;
            res.set_content("bad", "text/plain");
        } else if (last == "garbage") {
            res.set_content("{}", "application/json");
        } else {
            res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"hello back"}}]})", "application/json");
        }
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ::setenv("CF_TEST_KEY", "sekret", 1);
    HttpChatProvider p({"remote", "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions", "CF_TEST_KEY",
                        std::chrono::seconds(5)});
    auto params = verifier_defaults("gpt-test");
    CHECK(p.chat(terse(), params) == "hello back");
    CHECK(auth == "Bearer sekret");
    CHECK(seen["model"] == "gpt-test");
    CHECK(seen["max_tokens"] == 300);
    CHECK(seen["temperature"] == 0.0);
    CHECK(seen["messages"][0]["role"] == "system");

    auto say = [](const char* s) { return Transcript{{{Role::User, s}}}; };
    CHECK_CODE(p.chat(say("throttle"), params), ErrorCode::RateLimited);
    CHECK_CODE(p.chat(say("crash"), params), ErrorCode::Transport);
    CHECK_CODE(p.chat(say("reject"), params), ErrorCode::ProviderError);
    CHECK_CODE(p.chat(say("garbage"), params), ErrorCode::ProviderError);
    ::unsetenv("CF_TEST_KEY");
    CHECK_CODE(p.chat(terse(), params), ErrorCode::ProviderError);

    server.stop();
    t.join();
    HttpChatProvider gone({"remote", "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions", "",
                           std::chrono::seconds(2)});
    CHECK_CODE(gone.chat(terse(), params), ErrorCode::Transport);
}
