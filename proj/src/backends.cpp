#include "gdebate/backends.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <regex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace gdebate {

using nlohmann::json;

std::string_view to_string(Role role) {
    switch (role) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "?";
}

std::string_view to_string(CallKind kind) {
    return kind == CallKind::Response ? "response" : "summary";
}

std::string_view to_string(Tokenizer tokenizer) {
    return tokenizer == Tokenizer::AdditiveWords ? "additive_words" : "estimator";
}

Tokenizer parse_tokenizer(std::string_view text) {
    if (text == "additive_words") return Tokenizer::AdditiveWords;
    if (text == "estimator") return Tokenizer::Estimator;
    throw ConfigError("tokenizer: unknown value '" + std::string(text) + "'");
}

std::int64_t count_tokens(std::string_view text, Tokenizer tokenizer) {
    if (tokenizer == Tokenizer::Estimator)
        return static_cast<std::int64_t>((text.size() + 3) / 4);
    std::int64_t words = 0;
    bool in_word = false;
    for (char c : text) {
        bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (!space && !in_word) ++words;
        in_word = !space;
    }
    return words;
}

std::int64_t count_tokens(std::span<const Message> messages, Tokenizer tokenizer) {
    std::int64_t total = 0;
    for (const auto& message : messages) total += count_tokens(message.content, tokenizer);
    return total;
}

// --- mock --------------------------------------------------------------

namespace {

constexpr std::string_view kAnswerMarker = "Final answer:";

std::string words(std::string first, int count) {
    if (count <= 0) return {};
    std::string out = std::move(first);
    for (int i = 1; i < count; ++i) out += " tok";
    return out;
}

void replace_all(std::string& text, std::string_view from, std::string_view to) {
    std::size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
}

// Answers the stochastic mock finds after its own "Final answer:" markers.
std::vector<CanonicalAnswer> marked_answers(std::string_view text, TaskKind task) {
    std::vector<CanonicalAnswer> out;
    std::size_t pos = 0;
    while ((pos = text.find(kAnswerMarker, pos)) != std::string_view::npos) {
        pos += kAnswerMarker.size();
        std::size_t end = text.find_first_of("\n", pos);
        std::size_t next_marker = text.find(kAnswerMarker, pos);
        end = std::min(end, next_marker);
        auto answer = extract_answer(text.substr(pos, end == std::string_view::npos ? text.npos : end - pos), task);
        if (answer.parsed()) out.push_back(std::move(answer));
    }
    return out;
}

std::uint64_t call_seed(const CallInfo& call) {
    std::uint64_t s = mix_seed(call.seed, static_cast<std::uint64_t>(call.agent + 1));
    s = mix_seed(s, static_cast<std::uint64_t>(call.round));
    s = mix_seed(s, static_cast<std::uint64_t>(call.group + 1));
    return mix_seed(s, call.kind == CallKind::Summary ? 1 : 0);
}

std::string incoming_text(std::span<const Message> context, Phase phase) {
    if (phase == Phase::InitialThinking || context.empty()) return {};
    for (auto it = context.rbegin(); it != context.rend(); ++it)
        if (it->role == Role::User) return it->content;
    return {};
}

struct MockVisitor {
    std::span<const Message> context;
    const CallInfo& call;

    std::string operator()(const FixedLength& p) const {
        if (call.kind == CallKind::Summary) return words(summary_sentinel(call), p.summary_tokens);
        return words(output_sentinel(call.agent, call.round), p.output_tokens);
    }

    std::string operator()(const Scripted& p) const {
        std::string text;
        if (call.kind == CallKind::Summary) {
            text = p.summary;
        } else if (auto it = p.responses.find({call.agent, call.round}); it != p.responses.end()) {
            text = it->second;
        } else if (auto any = p.responses.find({call.agent, 0}); any != p.responses.end()) {
            text = any->second;
        } else {
            text = p.fallback;
        }
        replace_all(text, "{truth}", call.truth);
        replace_all(text, "{wrong}", wrong_answer(call.truth, call.task, call_seed(call)));
        return text;
    }

    std::string operator()(const SeededStochastic& p) const {
        SeededRng rng(call_seed(call));
        if (call.kind == CallKind::Summary) {
            std::string all;
            for (const auto& m : context) all += m.content + "\n";
            auto found = marked_answers(all, call.task);
            std::string tag = summary_sentinel(call);
            if (found.empty()) return tag + " The agents reached no clear answer.";
            return tag + " Most agents agree. " + std::string(kAnswerMarker) + " " +
                   format_answer(majority_vote(found).value, call.task);
        }
        std::string value;
        if (rng.unit() < p.correctness) {
            value = call.truth;
        } else {
            auto peers = marked_answers(incoming_text(context, call.phase), call.task);
            if (!peers.empty() && rng.unit() < p.conformity) value = majority_vote(peers).value;
            else value = wrong_answer(call.truth, call.task, rng.next());
        }
        return output_sentinel(call.agent, call.round) + " Reasoning step by step. " +
               std::string(kAnswerMarker) + " " + format_answer(value, call.task);
    }
};

}  // namespace

void validate(const MockPolicy& policy) {
    if (const auto* fixed = std::get_if<FixedLength>(&policy)) {
        if (fixed->output_tokens < 0) throw ConfigError("mock.output_tokens: must be >= 0");
        if (fixed->summary_tokens < 0 || fixed->summary_tokens > kMaxSummaryWords)
            throw ConfigError("mock.summary_tokens: must be in [0, 80], got " +
                              std::to_string(fixed->summary_tokens));
    } else if (const auto* stochastic = std::get_if<SeededStochastic>(&policy)) {
        auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
        if (!in_unit(stochastic->correctness)) throw ConfigError("mock.correctness: must be in [0, 1]");
        if (!in_unit(stochastic->conformity)) throw ConfigError("mock.conformity: must be in [0, 1]");
    }
}

std::string output_sentinel(AgentId agent, int round) {
    return "<<out:a" + std::to_string(agent) + ":t" + std::to_string(round) + ">>";
}

std::string summary_sentinel(const CallInfo& call) {
    if (call.group >= 0)
        return "<<sum:g" + std::to_string(call.group) + ":s" + std::to_string(call.stage) + ">>";
    return "<<sum:a" + std::to_string(call.agent) + ":t" + std::to_string(call.round) + ">>";
}

std::string wrong_answer(std::string_view truth, TaskKind task, std::uint64_t salt) {
    if (task == TaskKind::MMLU) {
        char letter = truth.size() == 1 ? truth[0] : 'A';
        char shifted = static_cast<char>('A' + (letter - 'A' + 1 + static_cast<int>(salt % 3)) % 4);
        return std::string(1, shifted);
    }
    long long value = 0;
    auto [ptr, ec] = std::from_chars(truth.data(), truth.data() + truth.size(), value);
    if (ec == std::errc() && ptr == truth.data() + truth.size()) {
        long long delta = 1 + static_cast<long long>(salt % 9);
        return std::to_string((salt >> 8) % 2 == 0 ? value + delta : value - delta);
    }
    return "not-" + std::string(truth);
}

std::string format_answer(std::string_view value, TaskKind task) {
    switch (task) {
        case TaskKind::Arithmetic: return "The answer is " + std::string(value) + ".";
        case TaskKind::GSM8K:
        case TaskKind::MATH: return "\\boxed{" + std::string(value) + "}";
        case TaskKind::MMLU: return "(" + std::string(value) + ")";
    }
    return std::string(value);
}

Generation mock_generate(const MockPolicy& policy, std::span<const Message> context,
                         const CallInfo& call, Tokenizer tokenizer) {
    Generation out;
    out.text = std::visit(MockVisitor{context, call}, policy);
    out.prompt_tokens = count_tokens(context, tokenizer);
    out.completion_tokens = count_tokens(out.text, tokenizer);
    return out;
}

MockBackend::MockBackend(MockPolicy policy, Tokenizer tokenizer)
    : policy_(std::move(policy)), tokenizer_(tokenizer) {
    gdebate::validate(policy_);
}

Generation MockBackend::generate(std::span<const Message> context, const CallInfo& call) {
    return mock_generate(policy_, context, call, tokenizer_);
}

// --- http --------------------------------------------------------------

void BackendConfig::validate() const {
    if (kind == Kind::Mock) {
        gdebate::validate(mock);
        return;
    }
    if (endpoint.empty()) throw ConfigError("backend.endpoint: required for http backends");
    if (model.empty()) throw ConfigError("backend.model: required for http backends");
    if (max_retries < 0) throw ConfigError("backend.max_retries: must be >= 0");
    if (max_in_flight < 1 || max_in_flight > 1024)
        throw ConfigError("backend.max_in_flight: must be in [1, 1024]");
    if (max_tokens < 1) throw ConfigError("backend.max_tokens: must be >= 1");
}

std::string chat_request_body(const BackendConfig& config, std::span<const Message> context) {
    json messages = json::array();
    for (const auto& m : context)
        messages.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
    json body = {{"model", config.model},
                 {"messages", std::move(messages)},
                 {"temperature", config.temperature},
                 {"max_tokens", config.max_tokens}};
    return body.dump();
}

namespace {
BackendConfig validated(BackendConfig config) {
    config.kind = BackendConfig::Kind::Http;
    config.validate();
    return config;
}
}  // namespace

HttpChatBackend::HttpChatBackend(BackendConfig config)
    : config_(validated(std::move(config))), in_flight_(config_.max_in_flight) {
    static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch match;
    if (!std::regex_match(config_.endpoint, match, kUrl))
        throw ConfigError("backend.endpoint: not an http(s) URL: " + config_.endpoint);
    base_url_ = match[1].str();
    path_ = match[2].matched ? match[2].str() : "/v1/chat/completions";
    if (!config_.api_key_env.empty()) {
        const char* key = std::getenv(config_.api_key_env.c_str());
        if (key == nullptr)
            throw ConfigError("backend.api_key_env: environment variable " + config_.api_key_env +
                              " is not set");
        api_key_ = key;
    }
}

Generation HttpChatBackend::generate(std::span<const Message> context, const CallInfo&) {
    const std::string body = chat_request_body(config_, context);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    auto backoff = config_.retry_backoff;
    std::string last_error;
    int last_status = 0;
    std::string last_body;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            if (attempt == 1) ++retried_calls_;
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        httplib::Result result;
        {
            in_flight_.acquire();
            httplib::Client client(base_url_);
            auto seconds = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
            auto micros = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - seconds);
            client.set_connection_timeout(seconds.count(), micros.count());
            client.set_read_timeout(seconds.count(), micros.count());
            client.set_write_timeout(seconds.count(), micros.count());
            result = client.Post(path_, headers, body, "application/json");
            in_flight_.release();
        }
        if (!result) {
            last_error = "transport error: " + httplib::to_string(result.error());
            last_status = 0;
            continue;
        }
        last_status = result->status;
        last_body = result->body.substr(0, 200);
        if (result->status == 429 || result->status >= 500) {
            last_error = "HTTP " + std::to_string(result->status);
            continue;
        }
        if (result->status < 200 || result->status >= 300)
            throw BackendError("chat completion failed with HTTP " + std::to_string(result->status) +
                                   ": " + last_body,
                               result->status, last_body);

        json reply;
        try {
            reply = json::parse(result->body);
        } catch (const json::parse_error& e) {
            throw BackendError(std::string("malformed chat completion body: ") + e.what(),
                               result->status, last_body);
        }
        const json* content = nullptr;
        if (reply.contains("choices") && reply["choices"].is_array() && !reply["choices"].empty()) {
            const auto& message = reply["choices"][0].value("message", json::object());
            if (message.contains("content") && message["content"].is_string())
                content = &reply["choices"][0]["message"]["content"];
        }
        if (content == nullptr)
            throw BackendError("chat completion has no choices[0].message.content", result->status,
                               last_body);

        Generation out;
        out.text = content->get<std::string>();
        const auto usage = reply.value("usage", json::object());
        if (usage.contains("prompt_tokens") && usage.contains("completion_tokens")) {
            out.prompt_tokens = usage["prompt_tokens"].get<std::int64_t>();
            out.completion_tokens = usage["completion_tokens"].get<std::int64_t>();
        } else {
            out.prompt_tokens = count_tokens(context, config_.tokenizer);
            out.completion_tokens = count_tokens(out.text, config_.tokenizer);
            out.estimated = true;
        }
        return out;
    }
    throw BackendError("chat completion failed after " + std::to_string(config_.max_retries) +
                           " retries: " + last_error + (last_body.empty() ? "" : ": " + last_body),
                       last_status, last_body);
}

std::unique_ptr<AgentBackend> make_backend(const BackendConfig& config) {
    config.validate();
    if (config.kind == BackendConfig::Kind::Http) return std::make_unique<HttpChatBackend>(config);
    return std::make_unique<MockBackend>(config.mock, config.tokenizer);
}

}  // namespace gdebate
