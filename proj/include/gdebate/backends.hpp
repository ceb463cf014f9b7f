#ifndef GDEBATE_BACKENDS_HPP
#define GDEBATE_BACKENDS_HPP

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <semaphore>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "gdebate/core.hpp"

namespace gdebate {

enum class Role { System, User, Assistant };
std::string_view to_string(Role role);

struct Message {
    Role role;
    std::string content;

    bool operator==(const Message&) const = default;
};

enum class CallKind { Response, Summary };
std::string_view to_string(CallKind kind);

/// Metadata describing one generation call. Live backends ignore it; the
/// mock uses it to derive deterministic, sentinel-tagged output.
struct CallInfo {
    CallKind kind = CallKind::Response;
    Phase phase = Phase::InitialThinking;
    int round = 1;
    int stage = 1;
    AgentId agent = -1;  // responding agent, or the agent a MAD summary is for
    int group = -1;      // summarized group for GD summaries
    std::uint64_t seed = 0;
    TaskKind task = TaskKind::Arithmetic;
    std::string truth;
};

struct Generation {
    std::string text;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    bool estimated = false;  // usage counted locally, not reported by the transport
};

class BackendError : public std::runtime_error {
public:
    BackendError(const std::string& what, int status = 0, std::string body = {})
        : std::runtime_error(what), status_(status), body_(std::move(body)) {}

    int status() const { return status_; }
    const std::string& body() const { return body_; }

private:
    int status_;
    std::string body_;
};

enum class Tokenizer { AdditiveWords, Estimator };
std::string_view to_string(Tokenizer tokenizer);
Tokenizer parse_tokenizer(std::string_view text);

/// AdditiveWords counts whitespace-delimited units, so counts add exactly
/// across single-space joins. Estimator is ceil(bytes / 4) for live reports.
std::int64_t count_tokens(std::string_view text, Tokenizer tokenizer);
/// Sum over message contents; roles carry no tokens.
std::int64_t count_tokens(std::span<const Message> messages, Tokenizer tokenizer);

class AgentBackend {
public:
    virtual ~AgentBackend() = default;

    /// Must be safe to call concurrently.
    virtual Generation generate(std::span<const Message> context, const CallInfo& call) = 0;
};

// --- mock --------------------------------------------------------------

/// Largest summary a mock may emit, mirroring the 80-word summary prompt.
inline constexpr int kMaxSummaryWords = 80;

/// Exactly `output_tokens` words per response and `summary_tokens` per
/// summary (additive tokenizer). The first word is a sentinel tag.
struct FixedLength {
    int output_tokens = 5;
    int summary_tokens = 6;
};

/// Lookup of (agent, round) -> response text. Round 0 matches any round.
/// Texts may use {truth} and {wrong} placeholders.
struct Scripted {
    std::map<std::pair<AgentId, int>, std::string> responses;
    std::string fallback = "I cannot decide.";
    std::string summary = "The agents gave differing answers.";
};

/// Correct with probability `correctness`; otherwise, with probability
/// `conformity`, adopts the majority answer found in its incoming context,
/// else answers wrongly. Fully determined by (seed, agent, round).
struct SeededStochastic {
    double correctness = 0.7;
    double conformity = 0.5;
};

using MockPolicy = std::variant<FixedLength, Scripted, SeededStochastic>;

void validate(const MockPolicy& policy);

/// Sentinel words for context-hygiene checks.
std::string output_sentinel(AgentId agent, int round);
std::string summary_sentinel(const CallInfo& call);

/// A wrong-but-well-formed answer value for `truth`, chosen by `salt`.
std::string wrong_answer(std::string_view truth, TaskKind task, std::uint64_t salt);
/// `value` rendered in the task's final-answer format.
std::string format_answer(std::string_view value, TaskKind task);

Generation mock_generate(const MockPolicy& policy, std::span<const Message> context,
                         const CallInfo& call, Tokenizer tokenizer = Tokenizer::AdditiveWords);

class MockBackend final : public AgentBackend {
public:
    explicit MockBackend(MockPolicy policy, Tokenizer tokenizer = Tokenizer::AdditiveWords);

    Generation generate(std::span<const Message> context, const CallInfo& call) override;

    const MockPolicy& policy() const { return policy_; }

private:
    MockPolicy policy_;
    Tokenizer tokenizer_;
};

// --- http --------------------------------------------------------------

struct BackendConfig {
    enum class Kind { Mock, Http };

    Kind kind = Kind::Mock;
    MockPolicy mock = FixedLength{};
    Tokenizer tokenizer = Tokenizer::AdditiveWords;

    std::string endpoint;  // full URL of the chat-completions route
    std::string model;
    double temperature = 0.7;
    int max_tokens = 512;
    std::string api_key_env = "OPENAI_API_KEY";
    std::chrono::milliseconds timeout{60'000};
    int max_retries = 3;
    std::chrono::milliseconds retry_backoff{500};  // doubled after each retry
    int max_in_flight = 8;

    void validate() const;
};

/// Chat-completion JSON request body for `context`.
std::string chat_request_body(const BackendConfig& config, std::span<const Message> context);

class HttpChatBackend final : public AgentBackend {
public:
    explicit HttpChatBackend(BackendConfig config);

    Generation generate(std::span<const Message> context, const CallInfo& call) override;

    /// Calls that needed more than one attempt, for diagnostics.
    int retried_calls() const { return retried_calls_.load(); }

private:
    BackendConfig config_;
    std::string base_url_;
    std::string path_;
    std::string api_key_;
    std::counting_semaphore<1024> in_flight_;
    std::atomic<int> retried_calls_{0};
};

std::unique_ptr<AgentBackend> make_backend(const BackendConfig& config);

}  // namespace gdebate

#endif  // GDEBATE_BACKENDS_HPP
