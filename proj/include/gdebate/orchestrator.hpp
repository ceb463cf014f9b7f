#ifndef GDEBATE_ORCHESTRATOR_HPP
#define GDEBATE_ORCHESTRATOR_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "gdebate/backends.hpp"
#include "gdebate/core.hpp"
#include "gdebate/taskgen.hpp"

namespace gdebate {

struct LedgerEntry {
    int round = 0;
    int stage = 0;
    Phase phase = Phase::InitialThinking;
    int id = 0;  // agent for responses and MAD summaries, group for GD summaries
    CallKind kind = CallKind::Response;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    bool estimated = false;

    bool operator==(const LedgerEntry&) const = default;
};

struct TokenLedger {
    std::vector<LedgerEntry> entries;

    std::int64_t prompt_total() const;
    std::int64_t completion_total() const;
    std::int64_t grand_total() const { return prompt_total() + completion_total(); }
    std::int64_t total_of(CallKind kind) const;
    int api_calls() const { return static_cast<int>(entries.size()); }
    bool estimated() const;
};

struct TranscriptEntry {
    int round = 0;
    int stage = 0;
    Phase phase = Phase::InitialThinking;
    CallKind kind = CallKind::Response;
    int id = 0;
    std::vector<Message> prompt;
    std::string output;
};

/// Group summaries by stage: stages[s - 1][j] summarizes group j at the end
/// of stage s. The final stage never gets summaries.
struct SummaryPool {
    std::vector<std::vector<std::string>> stages;
};

/// Incoming slot contents: peers' previous outputs (intra-group rounds) or
/// the latest summary pool with the agent's own group first (inter-group).
struct PeerOutputs {
    std::vector<std::string> outputs;
};
struct SummaryPoolView {
    std::string own_group;
    std::vector<std::string> other_groups;
};
using Incoming = std::variant<std::monostate, PeerOutputs, SummaryPoolView>;

/// The user turn an incoming slot renders to; nullopt for the empty buffer.
std::optional<std::string> render_incoming(const Incoming& incoming, const TemplateSet& templates,
                                           TaskKind task);

/// The three fixed memory slots of a forgetful GroupDebate agent.
struct AgentMemory {
    std::string question;    // rendered starting prompt
    std::string own_output;  // empty before round 1
    Incoming incoming;       // empty buffer until the first exchange

    std::vector<Message> to_messages(const TemplateSet& templates, TaskKind task) const;
};

struct DebateResult {
    std::string problem_id;
    Mode mode = Mode::GD;
    GroupAssignment groups;
    std::vector<TranscriptEntry> transcript;
    SummaryPool summaries;
    std::vector<CanonicalAnswer> per_agent_final;
    CanonicalAnswer final;
    TokenLedger ledger;
    int api_calls = 0;
};

/// Thrown when a backend call fails for good. `partial` holds every call
/// that completed, in ledger order; its answers are never voted.
class DebateAborted : public std::runtime_error {
public:
    DebateAborted(const std::string& what, DebateResult partial)
        : std::runtime_error(what), partial_(std::move(partial)) {}

    const DebateResult& partial() const { return partial_; }

private:
    DebateResult partial_;
};

struct RunOptions {
    int parallelism = 1;  // concurrent calls within one round
};

/// Shared state of one run: backend wiring plus the ledger and transcript
/// assembled so far.
class DebateContext {
public:
    DebateContext(const DebateConfig& config, const Problem& problem, AgentBackend& backend,
                  const TemplateSet& templates, RunOptions options = {});

    struct Call {
        CallInfo info;
        std::vector<Message> prompt;
        int id = 0;
    };

    /// Issues all calls (concurrently up to the parallelism limit) and
    /// records them in the given order. Throws DebateAborted on failure.
    std::vector<std::string> execute(std::vector<Call> calls);

    CallInfo call_info(CallKind kind, Phase phase, int round, int stage) const;

    const DebateConfig& config() const { return config_; }
    const Problem& problem() const { return problem_; }
    const TemplateSet& templates() const { return templates_; }
    DebateResult& result() { return result_; }

    /// Finalizes voting and returns the completed result.
    DebateResult finish(std::vector<std::string> final_outputs);

private:
    const DebateConfig& config_;
    const Problem& problem_;
    AgentBackend& backend_;
    const TemplateSet& templates_;
    RunOptions options_;
    DebateResult result_;
};

/// One response per agent in `groups`, each reading its memory; afterwards
/// every member's incoming slot holds its group peers' new outputs (agent
/// order). Calls are recorded in agent-index order.
std::vector<std::string> step_intra_round(DebateContext& ctx,
                                          std::span<const std::vector<AgentId>> groups,
                                          std::vector<AgentMemory>& memories, int round, int stage,
                                          Phase phase = Phase::IntraGroup);

/// One summary call per group over its members' latest outputs; sets every
/// agent's incoming slot to the pool view (own group first).
std::vector<std::string> step_inter_transition(DebateContext& ctx,
                                               std::span<const std::vector<AgentId>> groups,
                                               std::vector<AgentMemory>& memories, int stage);

/// GroupDebate (mode GD) and the grouped full-history ablation (MAD_GROUP).
DebateResult run_debate(const DebateConfig& config, const Problem& problem, AgentBackend& backend,
                        const TemplateSet& templates = TemplateSet::builtin("debate"),
                        RunOptions options = {});

/// Summarized MAD and its forgetful variant; MAD_GROUP is forwarded to
/// run_debate.
DebateResult run_mad(const DebateConfig& config, const Problem& problem, AgentBackend& backend,
                     const TemplateSet& templates = TemplateSet::builtin("debate"),
                     RunOptions options = {});

/// Single-agent baselines: SINGLE_COT, COT_SC (M samples), REFLECTION.
DebateResult run_single(const DebateConfig& config, const Problem& problem, AgentBackend& backend,
                        const TemplateSet& templates = TemplateSet::builtin("debate"),
                        RunOptions options = {});

/// Dispatch on config.mode.
DebateResult run_mode(const DebateConfig& config, const Problem& problem, AgentBackend& backend,
                      const TemplateSet& templates = TemplateSet::builtin("debate"),
                      RunOptions options = {});

/// Expected call count for a completed run of `config`.
int expected_api_calls(const DebateConfig& config);

}  // namespace gdebate

#endif  // GDEBATE_ORCHESTRATOR_HPP
