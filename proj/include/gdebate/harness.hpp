#ifndef GDEBATE_HARNESS_HPP
#define GDEBATE_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gdebate/backends.hpp"
#include "gdebate/core.hpp"
#include "gdebate/cost_model.hpp"
#include "gdebate/orchestrator.hpp"
#include "gdebate/taskgen.hpp"

namespace gdebate {

/// Where a run's problems come from.
struct TaskSpec {
    enum class Source { Generate, Dataset, Filler };

    TaskKind kind = TaskKind::Arithmetic;
    Source source = Source::Generate;
    std::string path;          // Dataset: JSON Lines file
    int count = 1;             // problems per repetition; 0 = whole dataset
    std::uint64_t seed = 0;    // Generate: repetition r uses seed + r
    int operand_max = 99;      // Generate (Arithmetic only)
    int question_tokens = 10;  // Filler: question of exactly this many words
};

struct ExperimentConfig {
    DebateConfig debate;
    TaskSpec task;
    BackendConfig backend;
    std::string templates = "debate";  // builtin name or template file path
    int parallelism = 1;
    std::optional<bool> timing;  // wall_ms measured; default: http only

    bool timing_enabled() const { return timing.value_or(backend.kind == BackendConfig::Kind::Http); }
    void validate() const;
};

ExperimentConfig parse_experiment(std::string_view json_text);
ExperimentConfig load_experiment(const std::filesystem::path& path);

/// Problems for repetition `rep` (0-based).
std::vector<Problem> problems_for(const TaskSpec& task, int rep);

/// Per-(config, repetition) row. Token and call columns sum the ledgers of
/// every problem in the repetition.
struct ReportRow {
    std::string dataset;
    Mode mode = Mode::GD;
    int agents = 0;
    int groups = 0;
    int rounds = 0;
    int intra_rounds = 0;
    int stages = 0;
    std::uint64_t seed = 0;
    int repetition = 0;  // 1-based
    double accuracy = 0.0;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    std::int64_t total_tokens = 0;
    std::int64_t api_calls = 0;
    std::int64_t wall_ms = 0;
    bool estimated = false;
};

enum class RunStatus { Complete, Partial, Failed };
std::string_view to_string(RunStatus status);

struct ConfigSummary {
    ReportRow key;  // identifying columns; metric fields unused
    int requested = 0;
    int completed = 0;
    RunStatus status = RunStatus::Complete;
    std::string error;
    MeanStd accuracy, prompt_tokens, completion_tokens, total_tokens, api_calls;
};

struct ExperimentReport {
    std::vector<ReportRow> rows;
    std::vector<ConfigSummary> summaries;

    bool partial() const;
};

inline constexpr std::string_view kReportColumns =
    "dataset,mode,M,N,T,R,S,seed,repetition,accuracy,prompt_tokens,completion_tokens,"
    "total_tokens,api_calls,wall_ms,estimated_usage_flag";

/// Runs every repetition; a backend failure stops the config and marks
/// its summary partial (or failed if nothing completed).
ExperimentReport run_experiment(const ExperimentConfig& config);
ExperimentReport run_experiment(const ExperimentConfig& config, AgentBackend& backend);

using GroupStrategy = std::variant<std::vector<int>, int>;  // explicit sizes or a group count

struct SweepSpec {
    ExperimentConfig base;
    std::vector<Mode> modes;
    std::vector<int> agents;
    std::vector<GroupStrategy> group_strategies;
    std::vector<int> rounds;
    std::vector<int> intra_rounds;
    std::vector<std::uint64_t> seeds;
    std::vector<int> repetitions;
    int parallel_cells = 1;

    /// Cells in lexicographic axis order (mode, agents, strategy, rounds,
    /// intra_rounds, seed, repetitions); an omitted axis takes the base
    /// value. Strategy and intra_rounds axes collapse to their first value
    /// for ungrouped modes. Throws ConfigError if any cell is invalid.
    std::vector<ExperimentConfig> cells() const;
};

SweepSpec parse_sweep(std::string_view json_text);
SweepSpec load_sweep(const std::filesystem::path& path);

ExperimentReport sweep_grid(const SweepSpec& spec);
ExperimentReport sweep_grid(const SweepSpec& spec, AgentBackend& backend);

void write_report_csv(std::ostream& out, const ExperimentReport& report);
void write_summary_csv(std::ostream& out, const ExperimentReport& report);
void write_report_json(std::ostream& out, const ExperimentReport& report);

/// Cartesian axes for the analytical cost table. `groups` splits M evenly;
/// `group_sizes`, when set, overrides it (single-M axes only).
struct CostAxes {
    std::vector<int> agents{4};
    std::vector<int> groups{2};
    std::optional<std::vector<int>> group_sizes;
    std::vector<int> rounds{4};
    std::vector<int> intra_rounds{2};
    std::vector<std::int64_t> question{10};
    std::vector<std::int64_t> output{5};
    std::vector<std::int64_t> summary{6};
};

struct CostRow {
    CostParams params;
    std::int64_t mad_total = 0;
    std::int64_t gd_total = 0;
    double reduction = 0.0;  // 1 - gd / mad
    std::int64_t mad_bound = 0;
    double gd_bound = 0.0;
    GroupCountChoice optimal{};
};

CostAxes parse_cost_axes(std::string_view json_text);
CostAxes load_cost_axes(const std::filesystem::path& path);
std::vector<CostRow> cost_report(const CostAxes& axes);
void write_cost_csv(std::ostream& out, const std::vector<CostRow>& rows);

}  // namespace gdebate

#endif  // GDEBATE_HARNESS_HPP
