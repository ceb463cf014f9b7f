#include "gdebate/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <optional>
#include <thread>

namespace gdebate {

std::int64_t TokenLedger::prompt_total() const {
    std::int64_t sum = 0;
    for (const auto& e : entries) sum += e.prompt_tokens;
    return sum;
}

std::int64_t TokenLedger::completion_total() const {
    std::int64_t sum = 0;
    for (const auto& e : entries) sum += e.completion_tokens;
    return sum;
}

std::int64_t TokenLedger::total_of(CallKind kind) const {
    std::int64_t sum = 0;
    for (const auto& e : entries)
        if (e.kind == kind) sum += e.prompt_tokens + e.completion_tokens;
    return sum;
}

bool TokenLedger::estimated() const {
    return std::any_of(entries.begin(), entries.end(), [](const auto& e) { return e.estimated; });
}

std::optional<std::string> render_incoming(const Incoming& incoming, const TemplateSet& templates,
                                           TaskKind task) {
    if (const auto* peers = std::get_if<PeerOutputs>(&incoming)) return templates.intra(peers->outputs, task);
    if (const auto* pool = std::get_if<SummaryPoolView>(&incoming))
        return templates.inter(pool->own_group, pool->other_groups, task);
    return std::nullopt;
}

std::vector<Message> AgentMemory::to_messages(const TemplateSet& templates, TaskKind task) const {
    std::vector<Message> out;
    if (auto system = templates.system(); !system.empty()) out.push_back({Role::System, std::move(system)});
    out.push_back({Role::User, question});
    if (!own_output.empty()) out.push_back({Role::Assistant, own_output});
    if (auto in = render_incoming(incoming, templates, task)) out.push_back({Role::User, std::move(*in)});
    return out;
}

DebateContext::DebateContext(const DebateConfig& config, const Problem& problem, AgentBackend& backend,
                             const TemplateSet& templates, RunOptions options)
    : config_(config), problem_(problem), backend_(backend), templates_(templates), options_(options) {
    result_.problem_id = problem.id;
    result_.mode = config.mode;
}

CallInfo DebateContext::call_info(CallKind kind, Phase phase, int round, int stage) const {
    CallInfo info;
    info.kind = kind;
    info.phase = phase;
    info.round = round;
    info.stage = stage;
    info.seed = config_.seed;
    info.task = problem_.task;
    info.truth = problem_.truth.value;
    return info;
}

std::vector<std::string> DebateContext::execute(std::vector<Call> calls) {
    const std::size_t n = calls.size();
    std::vector<std::optional<Generation>> results(n);
    std::vector<std::exception_ptr> errors(n);

    auto run_one = [&](std::size_t i) {
        try {
            results[i] = backend_.generate(calls[i].prompt, calls[i].info);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };

    const auto workers = static_cast<std::size_t>(std::max(options_.parallelism, 1));
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) run_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < std::min(workers, n); ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) run_one(i);
            });
        }
    }  // jthreads join here

    std::vector<std::string> outputs;
    outputs.reserve(n);
    std::optional<std::string> failure;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& call = calls[i];
        if (errors[i]) {
            if (!failure) {
                std::string what;
                try {
                    std::rethrow_exception(errors[i]);
                } catch (const std::exception& e) {
                    what = e.what();
                } catch (...) {
                    what = "unknown error";
                }
                failure = std::string(to_string(call.info.kind)) + " call for " +
                          (call.info.kind == CallKind::Summary && call.info.group >= 0 ? "group " : "agent ") +
                          std::to_string(call.id) + " at round " + std::to_string(call.info.round) +
                          " (stage " + std::to_string(call.info.stage) + ") failed: " + what;
            }
            continue;
        }
        const Generation& g = *results[i];
        result_.ledger.entries.push_back({call.info.round, call.info.stage, call.info.phase, call.id,
                                          call.info.kind, g.prompt_tokens, g.completion_tokens,
                                          g.estimated});
        result_.transcript.push_back({call.info.round, call.info.stage, call.info.phase, call.info.kind,
                                      call.id, call.prompt, g.text});
        outputs.push_back(g.text);
    }
    if (failure) {
        result_.api_calls = result_.ledger.api_calls();
        throw DebateAborted(*failure, result_);
    }
    return outputs;
}

DebateResult DebateContext::finish(std::vector<std::string> final_outputs) {
    result_.per_agent_final.clear();
    for (const auto& text : final_outputs) result_.per_agent_final.push_back(extract_answer(text, problem_.task));
    result_.final = majority_vote(result_.per_agent_final);
    result_.api_calls = result_.ledger.api_calls();
    return std::move(result_);
}

namespace {

std::vector<AgentId> agents_of(std::span<const std::vector<AgentId>> groups) {
    std::vector<AgentId> out;
    for (const auto& g : groups) out.insert(out.end(), g.begin(), g.end());
    std::sort(out.begin(), out.end());
    return out;
}

int group_index(std::span<const std::vector<AgentId>> groups, AgentId agent) {
    for (std::size_t g = 0; g < groups.size(); ++g)
        if (std::find(groups[g].begin(), groups[g].end(), agent) != groups[g].end()) return static_cast<int>(g);
    return -1;
}

// Response round shared by GD (three-slot memory) and MAD_GROUP (three
// slots plus an archive of every earlier turn).
std::vector<std::string> respond(DebateContext& ctx, std::span<const std::vector<AgentId>> groups,
                                 std::vector<AgentMemory>& memories,
                                 std::vector<std::vector<Message>>* archives, int round, int stage,
                                 Phase phase) {
    const auto& templates = ctx.templates();
    const TaskKind task = ctx.problem().task;
    const auto agents = agents_of(groups);

    std::vector<DebateContext::Call> calls;
    for (AgentId a : agents) {
        auto& memory = memories[static_cast<std::size_t>(a)];
        std::vector<Message> prompt = memory.to_messages(templates, task);
        if (archives != nullptr) {
            // Archive goes between the question and the live own-output slot.
            auto& archive = (*archives)[static_cast<std::size_t>(a)];
            auto question = std::find_if(prompt.begin(), prompt.end(),
                                         [](const Message& m) { return m.role == Role::User; });
            prompt.insert(question + 1, archive.begin(), archive.end());
        }
        CallInfo info = ctx.call_info(CallKind::Response, phase, round, stage);
        info.agent = a;
        info.group = group_index(groups, a);
        calls.push_back({std::move(info), std::move(prompt), a});
    }
    auto outputs = ctx.execute(std::move(calls));

    for (std::size_t i = 0; i < agents.size(); ++i) {
        auto& memory = memories[static_cast<std::size_t>(agents[i])];
        if (archives != nullptr) {
            auto& archive = (*archives)[static_cast<std::size_t>(agents[i])];
            if (!memory.own_output.empty()) archive.push_back({Role::Assistant, memory.own_output});
            if (auto in = render_incoming(memory.incoming, templates, task))
                archive.push_back({Role::User, std::move(*in)});
        }
        memory.own_output = outputs[i];
    }
    for (const auto& group : groups) {
        for (AgentId a : group) {
            PeerOutputs peers;
            for (AgentId b : group)
                if (b != a) peers.outputs.push_back(memories[static_cast<std::size_t>(b)].own_output);
            memories[static_cast<std::size_t>(a)].incoming = std::move(peers);
        }
    }
    return outputs;
}

}  // namespace

std::vector<std::string> step_intra_round(DebateContext& ctx, std::span<const std::vector<AgentId>> groups,
                                          std::vector<AgentMemory>& memories, int round, int stage,
                                          Phase phase) {
    return respond(ctx, groups, memories, nullptr, round, stage, phase);
}

std::vector<std::string> step_inter_transition(DebateContext& ctx, std::span<const std::vector<AgentId>> groups,
                                               std::vector<AgentMemory>& memories, int stage) {
    const auto& config = ctx.config();
    const int round = std::min(stage * config.intra_rounds, config.total_rounds);

    std::vector<DebateContext::Call> calls;
    for (std::size_t j = 0; j < groups.size(); ++j) {
        std::vector<std::string> outputs;
        for (AgentId a : groups[j]) outputs.push_back(memories[static_cast<std::size_t>(a)].own_output);
        CallInfo info = ctx.call_info(CallKind::Summary, Phase::InterGroup, round, stage);
        info.group = static_cast<int>(j);
        calls.push_back({std::move(info), {{Role::User, ctx.templates().summary(outputs)}}, static_cast<int>(j)});
    }
    auto pool = ctx.execute(std::move(calls));

    auto& stages = ctx.result().summaries.stages;
    if (stages.size() < static_cast<std::size_t>(stage)) stages.resize(static_cast<std::size_t>(stage));
    stages[static_cast<std::size_t>(stage - 1)] = pool;

    for (std::size_t j = 0; j < groups.size(); ++j) {
        SummaryPoolView view{pool[j], {}};
        for (std::size_t k = 0; k < pool.size(); ++k)
            if (k != j) view.other_groups.push_back(pool[k]);
        for (AgentId a : groups[j]) memories[static_cast<std::size_t>(a)].incoming = view;
    }
    return pool;
}

DebateResult run_debate(const DebateConfig& config, const Problem& problem, AgentBackend& backend,
                        const TemplateSet& templates, RunOptions options) {
    if (config.mode != Mode::GD && config.mode != Mode::MadGroup)
        throw ConfigError("mode: run_debate handles GD and MAD_GROUP, got " + std::string(to_string(config.mode)));
    config.validate();
    const auto schedule = build_schedule(config.total_rounds, config.intra_rounds);
    const auto assignment = partition_agents(config.agents, config.group_sizes, config.seed);
    const int stages = schedule.stage_count();

    DebateContext ctx(config, problem, backend, templates, options);
    ctx.result().groups = assignment;

    const std::string question = templates.starting(problem);
    std::vector<AgentMemory> memories(static_cast<std::size_t>(config.agents), AgentMemory{question, "", {}});
    std::vector<std::vector<Message>> archives(static_cast<std::size_t>(config.agents));
    auto* archive = config.mode == Mode::MadGroup ? &archives : nullptr;

    for (const auto& entry : schedule.phases) {
        respond(ctx, assignment.groups, memories, archive, entry.round, entry.stage, entry.phase);
        if (entry.round == schedule.last_round_of(entry.stage) && entry.stage < stages)
            step_inter_transition(ctx, assignment.groups, memories, entry.stage);
    }

    std::vector<std::string> finals;
    for (const auto& memory : memories) finals.push_back(memory.own_output);
    return ctx.finish(std::move(finals));
}

DebateResult run_mad(const DebateConfig& config, const Problem& problem, AgentBackend& backend,
                     const TemplateSet& templates, RunOptions options) {
    if (config.mode == Mode::MadGroup) return run_debate(config, problem, backend, templates, options);
    if (config.mode != Mode::MAD && config.mode != Mode::MadForget)
        throw ConfigError("mode: run_mad handles MAD, MAD_FORGET and MAD_GROUP, got " +
                          std::string(to_string(config.mode)));
    config.validate();
    const bool forget = config.mode == Mode::MadForget;
    const auto M = static_cast<std::size_t>(config.agents);
    const TaskKind task = problem.task;

    DebateContext ctx(config, problem, backend, templates, options);
    GroupAssignment everyone;
    everyone.groups.emplace_back();
    for (int a = 0; a < config.agents; ++a) everyone.groups[0].push_back(a);
    ctx.result().groups = everyone;

    std::vector<Message> opening;
    if (auto system = templates.system(); !system.empty()) opening.push_back({Role::System, std::move(system)});
    opening.push_back({Role::User, templates.starting(problem)});

    std::vector<std::vector<Message>> history(M, opening);
    std::vector<std::string> latest(M);

    for (int t = 1; t <= config.total_rounds; ++t) {
        const Phase phase = t == 1 ? Phase::InitialThinking : Phase::IntraGroup;
        std::vector<std::string> summaries(M);
        if (t > 1) {
            std::vector<DebateContext::Call> calls;
            for (std::size_t i = 0; i < M; ++i) {
                std::vector<std::string> others;
                for (std::size_t k = 0; k < M; ++k)
                    if (k != i) others.push_back(latest[k]);
                CallInfo info = ctx.call_info(CallKind::Summary, phase, t - 1, 1);
                info.agent = static_cast<AgentId>(i);
                calls.push_back({std::move(info), {{Role::User, templates.summary(others)}}, static_cast<int>(i)});
            }
            summaries = ctx.execute(std::move(calls));
        }

        std::vector<DebateContext::Call> calls;
        std::vector<Message> handed_back(M);
        for (std::size_t i = 0; i < M; ++i) {
            std::vector<Message> prompt;
            if (t > 1) {
                handed_back[i] = {Role::User, templates.mad_debate(summaries[i], task)};
                if (forget) {
                    prompt = opening;
                    prompt.push_back({Role::Assistant, latest[i]});
                } else {
                    prompt = history[i];
                }
                prompt.push_back(handed_back[i]);
            } else {
                prompt = opening;
            }
            CallInfo info = ctx.call_info(CallKind::Response, phase, t, 1);
            info.agent = static_cast<AgentId>(i);
            info.group = 0;
            calls.push_back({std::move(info), std::move(prompt), static_cast<int>(i)});
        }
        auto outputs = ctx.execute(std::move(calls));
        for (std::size_t i = 0; i < M; ++i) {
            if (t > 1) history[i].push_back(handed_back[i]);
            history[i].push_back({Role::Assistant, outputs[i]});
            latest[i] = outputs[i];
        }
    }
    return ctx.finish(std::move(latest));
}

DebateResult run_single(const DebateConfig& config, const Problem& problem, AgentBackend& backend,
                        const TemplateSet& templates, RunOptions options) {
    if (config.mode != Mode::SingleCot && config.mode != Mode::CotSc && config.mode != Mode::Reflection)
        throw ConfigError("mode: run_single handles SINGLE_COT, COT_SC and REFLECTION, got " +
                          std::string(to_string(config.mode)));
    config.validate();
    DebateContext ctx(config, problem, backend, templates, options);
    const std::vector<Message> opening{{Role::User, templates.starting(problem)}};
    const int samples = config.mode == Mode::CotSc ? config.agents : 1;

    GroupAssignment solo;
    solo.groups.emplace_back();
    for (int a = 0; a < samples; ++a) solo.groups[0].push_back(a);
    ctx.result().groups = solo;

    std::vector<DebateContext::Call> calls;
    for (int a = 0; a < samples; ++a) {
        CallInfo info = ctx.call_info(CallKind::Response, Phase::InitialThinking, 1, 1);
        info.agent = a;
        calls.push_back({std::move(info), opening, a});
    }
    auto outputs = ctx.execute(std::move(calls));
    if (config.mode != Mode::Reflection) return ctx.finish(std::move(outputs));

    std::vector<Message> history = opening;
    std::string latest = outputs.front();
    for (int trial = 1; trial <= config.reflection_trials; ++trial) {
        history.push_back({Role::Assistant, latest});
        history.push_back({Role::User, templates.reflection(problem.task)});
        CallInfo info = ctx.call_info(CallKind::Response, Phase::IntraGroup, trial + 1, 1);
        info.agent = 0;
        latest = ctx.execute({{std::move(info), history, 0}}).front();
    }
    return ctx.finish({latest});
}

DebateResult run_mode(const DebateConfig& config, const Problem& problem, AgentBackend& backend,
                      const TemplateSet& templates, RunOptions options) {
    switch (config.mode) {
        case Mode::GD:
        case Mode::MadGroup: return run_debate(config, problem, backend, templates, options);
        case Mode::MAD:
        case Mode::MadForget: return run_mad(config, problem, backend, templates, options);
        case Mode::SingleCot:
        case Mode::CotSc:
        case Mode::Reflection: return run_single(config, problem, backend, templates, options);
    }
    throw ConfigError("mode: unsupported");
}

int expected_api_calls(const DebateConfig& config) {
    const int M = config.agents, T = config.total_rounds;
    switch (config.mode) {
        case Mode::GD:
        case Mode::MadGroup: return M * T + config.group_count() * (config.stage_count() - 1);
        case Mode::MAD:
        case Mode::MadForget: return M * T + M * (T - 1);
        case Mode::SingleCot: return 1;
        case Mode::CotSc: return M;
        case Mode::Reflection: return 1 + config.reflection_trials;
    }
    return 0;
}

}  // namespace gdebate
