#include <gtest/gtest.h>

#include <random>

#include "scaffold/gateway.hpp"
#include "scaffold/synthetic.hpp"
#include "support.hpp"

using namespace scaffold;
using namespace std::chrono_literals;
using testing_support::TempDir;

namespace {

// Fails with TransientFailure `failures` times, then answers.
class FlakyBackend : public Backend {
public:
    explicit FlakyBackend(int failures, std::string partial = {}) : failures_(failures), partial_(std::move(partial)) {}
    std::string name() const override { return "flaky"; }
    Completion generate(const std::vector<ChatMessage>&, const GenerationConfig&) override {
        ++calls;
        if (calls <= failures_) throw TransientFailure("503");
        return Completion{"ok. done.", "stop", 0, "flaky", std::nullopt};
    }
    Completion generate_stream(const std::vector<ChatMessage>& m, const GenerationConfig& c,
                               const FragmentSink& sink) override {
        if (!partial_.empty() && calls < failures_) {
            ++calls;
            sink(partial_);
            throw TransientFailure("connection reset");
        }
        return Backend::generate_stream(m, c, sink);
    }
    int calls = 0;

private:
    int failures_;
    std::string partial_;
};

struct SleepLog {
    std::vector<std::chrono::milliseconds> delays;
    Gateway::Sleeper sleeper() {
        return [this](std::chrono::milliseconds d) { delays.push_back(d); };
    }
};

const std::vector<ChatMessage> kMessages{{"system", "You are Mark."}, {"user", "Where were you?"}};

std::vector<std::string> oracle_segments(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i + 1 < s.size(); ++i)
        if ((s[i] == '.' || s[i] == '!' || s[i] == '?') && std::isspace(static_cast<unsigned char>(s[i + 1]))) {
            out.push_back(s.substr(start, i + 1 - start));
            start = i + 1;
        }
    if (start < s.size()) out.push_back(s.substr(start));
    return out;
}

std::vector<std::string> run_segmenter(const std::vector<std::string>& fragments) {
    SentenceSegmenter seg;
    std::vector<std::string> out;
    for (const auto& f : fragments)
        for (auto& s : seg.push(f)) out.push_back(std::move(s));
    if (auto rest = seg.flush()) out.push_back(*rest);
    return out;
}

}  // namespace

TEST(Retry, BacksOffExponentiallyThenSucceeds) {
    auto backend = std::make_shared<FlakyBackend>(2);
    SleepLog log;
    Gateway gw(backend, {}, log.sleeper());
    EXPECT_EQ(gw.complete(kMessages, {}).text, "ok. done.");
    EXPECT_EQ(backend->calls, 3);
    EXPECT_EQ(log.delays, (std::vector<std::chrono::milliseconds>{250ms, 500ms}));
}

TEST(Retry, GivesUpAfterThreeAttempts) {
    auto backend = std::make_shared<FlakyBackend>(10);
    SleepLog log;
    Gateway gw(backend, {}, log.sleeper());
    EXPECT_THROW(gw.complete(kMessages, {}), GatewayTimeout);
    EXPECT_EQ(backend->calls, 3);
    EXPECT_EQ(log.delays.size(), 2u);
}

TEST(Retry, CustomPolicy) {
    auto backend = std::make_shared<FlakyBackend>(10);
    SleepLog log;
    Gateway gw(backend, RetryPolicy{4, 10ms}, log.sleeper());
    EXPECT_THROW(gw.complete(kMessages, {}), GatewayTimeout);
    EXPECT_EQ(backend->calls, 5);
    EXPECT_EQ(log.delays, (std::vector<std::chrono::milliseconds>{10ms, 20ms, 40ms, 80ms}));
}

TEST(Retry, RejectionsAreNotRetried) {
    int calls = 0;
    auto backend = std::make_shared<CallbackBackend>("reject", [&](const auto&, const auto&) -> std::string {
        ++calls;
        throw GatewayRejected("400 bad request", 400);
    });
    SleepLog log;
    Gateway gw(backend, {}, log.sleeper());
    try {
        gw.complete(kMessages, {});
        FAIL();
    } catch (const GatewayRejected& e) {
        EXPECT_EQ(e.status(), 400);
    }
    EXPECT_EQ(calls, 1);
    EXPECT_TRUE(log.delays.empty());
}

TEST(Retry, StreamFailureAfterDeliveryIsNotRetried) {
    auto backend = std::make_shared<FlakyBackend>(1, "I was ");
    SleepLog log;
    Gateway gw(backend, {}, log.sleeper());
    std::string seen;
    EXPECT_THROW(gw.complete_stream(kMessages, {}, [&](std::string_view f) { seen += f; }), GatewayTimeout);
    EXPECT_EQ(seen, "I was ");
    EXPECT_EQ(backend->calls, 1);
    EXPECT_TRUE(log.delays.empty());
}

TEST(Retry, StreamFailureBeforeDeliveryIsRetried) {
    auto backend = std::make_shared<FlakyBackend>(1);
    SleepLog log;
    Gateway gw(backend, {}, log.sleeper());
    std::string seen;
    auto c = gw.complete_stream(kMessages, {}, [&](std::string_view f) { seen += f; });
    EXPECT_EQ(seen, "ok. done.");
    EXPECT_EQ(c.text, seen);
    EXPECT_EQ(log.delays.size(), 1u);
}

TEST(Digest, KnownVectors) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(FixtureKey, CoversOutputRelevantFieldsOnly) {
    GenerationConfig a;
    auto base = fixture_key(kMessages, a);
    EXPECT_EQ(base.size(), 64u);
    auto b = a;
    b.timeout = 1ms;
    EXPECT_EQ(fixture_key(kMessages, b), base);
    b = a;
    b.temperature = 0.7;
    EXPECT_NE(fixture_key(kMessages, b), base);
    b = a;
    b.seed = 1;
    EXPECT_NE(fixture_key(kMessages, b), base);
    b = a;
    b.model = "other";
    EXPECT_NE(fixture_key(kMessages, b), base);
    auto m = kMessages;
    m[1].content += " ";
    EXPECT_NE(fixture_key(m, a), base);
}

TEST(Replay, RecordThenReplayReturnsIdenticalText) {
    TempDir dir;
    auto synthetic = make_synthetic_backend();
    auto rec = std::make_shared<ReplayBackend>(dir.path(), FixtureMode::Record, synthetic);
    auto first = rec->generate(kMessages, {});
    EXPECT_EQ(rec->recorded(), 1u);
    EXPECT_TRUE(std::filesystem::exists(rec->fixture_path(fixture_key(kMessages, {}))));
    rec->generate(kMessages, {});
    EXPECT_EQ(rec->recorded(), 1u);
    EXPECT_EQ(rec->hits(), 1u);

    ReplayBackend replay(dir.path());
    EXPECT_EQ(replay.generate(kMessages, {}).text, first.text);
    std::string streamed;
    std::size_t fragments = 0;
    auto c = replay.generate_stream(kMessages, {}, [&](std::string_view f) {
        streamed += f;
        ++fragments;
    });
    EXPECT_EQ(streamed, first.text);
    EXPECT_EQ(c.text, first.text);
    EXPECT_GT(fragments, 1u);
}

TEST(Replay, MissingFixtureInStrictMode) {
    TempDir dir;
    ReplayBackend replay(dir.path());
    EXPECT_THROW(replay.generate(kMessages, {}), FixtureMissing);
    EXPECT_THROW(replay.generate_stream(kMessages, {}, [](std::string_view) {}), FixtureMissing);
    EXPECT_THROW(ReplayBackend(dir.path(), FixtureMode::Record), Error);
}

TEST(Segmenter, SplitsAtTerminatorsFollowedByWhitespace) {
    EXPECT_EQ(segment_sentences({"I was home. ", "Ask Sarah! Why? 3.5 hours"}),
              (std::vector<std::string>{"I was home.", " Ask Sarah!", " Why?", " 3.5 hours"}));
    EXPECT_EQ(run_segmenter({"Done."}), (std::vector<std::string>{"Done."}));
    EXPECT_EQ(run_segmenter({"Wait", ".", " ", "No"}), (std::vector<std::string>{"Wait.", " No"}));
    EXPECT_TRUE(run_segmenter({}).empty());
}

TEST(Segmenter, EmitsAsSoonAsTheBoundaryIsVisible) {
    SentenceSegmenter seg;
    EXPECT_TRUE(seg.push("Yes.").empty());
    EXPECT_EQ(seg.push(" I"), std::vector<std::string>{"Yes."});
    EXPECT_EQ(seg.flush(), std::optional<std::string>(" I"));
    EXPECT_EQ(seg.flush(), std::nullopt);
}

TEST(SegmenterProperty, RandomSplitsMatchTheWholeTextOracle) {
    std::mt19937_64 rng(17);
    const std::string alphabet = "ab .!?\n";
    for (int trial = 0; trial < 3000; ++trial) {
        std::string text;
        for (std::size_t n = testing_support::pick(rng, 60); n > 0; --n)
            text += alphabet[testing_support::pick(rng, alphabet.size())];
        std::vector<std::string> fragments;
        for (std::size_t pos = 0; pos < text.size();) {
            auto len = 1 + testing_support::pick(rng, 6);
            fragments.push_back(text.substr(pos, len));
            pos += len;
        }
        auto segs = run_segmenter(fragments);
        ASSERT_EQ(segs, oracle_segments(text)) << text;
        std::string joined;
        for (const auto& s : segs) joined += s;
        ASSERT_EQ(joined, text);
    }
}
