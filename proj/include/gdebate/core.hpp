#ifndef GDEBATE_CORE_HPP
#define GDEBATE_CORE_HPP

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gdebate {

/// Raised for any inconsistent run parameterization (sizes, rounds, modes).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class VoteError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class Mode { GD, MAD, MadForget, MadGroup, SingleCot, CotSc, Reflection };
enum class TaskKind { Arithmetic, GSM8K, MMLU, MATH };
enum class Phase { InitialThinking, IntraGroup, InterGroup };

std::string_view to_string(Mode mode);
std::string_view to_string(TaskKind task);
std::string_view to_string(Phase phase);
Mode parse_mode(std::string_view text);
TaskKind parse_task(std::string_view text);

using AgentId = int;

/// Agents are 0-based: a run with M agents uses ids 0..M-1.
struct GroupAssignment {
    std::vector<std::vector<AgentId>> groups;  // each sorted ascending

    std::size_t group_count() const { return groups.size(); }
    /// Index of the group containing `agent`.
    std::size_t group_of(AgentId agent) const;
};

struct ScheduleEntry {
    int round;  // 1-based global round t
    int stage;  // 1-based stage s
    Phase phase;

    bool operator==(const ScheduleEntry&) const = default;
};

struct DebateSchedule {
    int intra_rounds = 1;
    std::vector<ScheduleEntry> phases;

    int total_rounds() const { return static_cast<int>(phases.size()); }
    int stage_count() const { return phases.empty() ? 0 : phases.back().stage; }
    /// Last round of `stage`, i.e. min(stage * R, T).
    int last_round_of(int stage) const;
};

inline int stage_count(int total_rounds, int intra_rounds) {
    return (total_rounds + intra_rounds - 1) / intra_rounds;
}

/// Debate parameterization. Backend and task source settings live in the
/// harness's ExperimentConfig, which embeds one of these.
struct DebateConfig {
    Mode mode = Mode::GD;
    int agents = 1;
    std::vector<int> group_sizes{1};
    int total_rounds = 1;
    int intra_rounds = 1;
    std::uint64_t seed = 0;
    TaskKind task = TaskKind::Arithmetic;
    int repetitions = 1;
    int reflection_trials = 3;

    int group_count() const { return static_cast<int>(group_sizes.size()); }
    int stage_count() const { return gdebate::stage_count(total_rounds, intra_rounds); }
    bool grouped() const { return mode == Mode::GD || mode == Mode::MadGroup; }

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

inline constexpr std::string_view kUnparseable = "~unparseable";

struct CanonicalAnswer {
    std::string raw;
    std::string value;

    bool parsed() const { return value != kUnparseable; }
    bool operator==(const CanonicalAnswer& other) const { return value == other.value; }
};

/// Trim, collapse whitespace, canonicalize numerals ("007" -> "7",
/// "1,000.50" -> "1000.5", "-0" -> "0") and upper-case lone choice letters.
std::string normalize_answer(std::string_view raw);

CanonicalAnswer make_answer(std::string_view raw);
CanonicalAnswer unparseable_answer(std::string_view raw = {});

/// Task-specific final-answer extraction. GSM8K/MATH take the last
/// \boxed{...}, MMLU the last "(A)".."(D)", Arithmetic the last numeral.
CanonicalAnswer extract_answer(std::string_view response, TaskKind task);

/// Every answer occurrence of the task's format, in text order.
std::vector<std::string> extract_all_answers(std::string_view text, TaskKind task);

/// Most frequent value; ties go to the lexicographically smallest value.
CanonicalAnswer majority_vote(const std::vector<CanonicalAnswer>& answers);

/// Portable seeded generator: mt19937_64 plus rejection-sampled bounded
/// draws, so sequences are identical across standard libraries.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed);

    std::uint64_t next();
    /// Uniform integer in [0, bound]; bound must be non-negative.
    std::uint64_t uniform(std::uint64_t bound);
    /// Uniform real in [0, 1).
    double unit();

private:
    std::mt19937_64 engine_;
};

/// splitmix64 finalizer; used to derive per-call seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

std::vector<AgentId> seeded_permutation(int count, std::uint64_t seed);

GroupAssignment partition_agents(int agents, const std::vector<int>& group_sizes,
                                 std::uint64_t seed);

DebateSchedule build_schedule(int total_rounds, int intra_rounds);

/// Split `agents` into `groups` near-equal sizes, larger groups first.
std::vector<int> even_group_sizes(int agents, int groups);

}  // namespace gdebate

#endif  // GDEBATE_CORE_HPP
