#ifndef GDEBATE_TASKGEN_HPP
#define GDEBATE_TASKGEN_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gdebate/core.hpp"

namespace gdebate {

struct DebateResult;

struct Problem {
    std::string id;
    TaskKind task = TaskKind::Arithmetic;
    std::string question;
    std::vector<std::string> choices;  // exactly 4 for MMLU, else empty
    CanonicalAnswer truth;
};

class RenderError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ScoringError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class PromptPhase { System, Starting, IntraDebate, Summary, InterDebate, MadDebate, Reflection };

using Slots = std::map<std::string, std::string, std::less<>>;

/// Fill `{name}` markers from `slots`; `{{` and `}}` are literal braces.
/// Throws RenderError naming the first marker without a slot value.
std::string render_prompt(std::string_view text, const Slots& slots);

/// A complete prompt table: per-task starting prompts and output-format
/// suffixes plus the task-independent debate prompts. Loaded from JSON.
class TemplateSet {
public:
    /// "debate" (debate prompts with output-format suffixes) or "bare"
    /// (slot contents only, no scaffolding words; used for exact token
    /// accounting against the analytical cost model).
    static const TemplateSet& builtin(std::string_view name);
    static TemplateSet from_json(std::string_view json_text);
    static TemplateSet load(const std::filesystem::path& path);
    /// A builtin name or a path to a template file.
    static TemplateSet resolve(std::string_view name_or_path);

    const std::string& name() const { return name_; }
    const std::string& text(PromptPhase phase, TaskKind task = TaskKind::Arithmetic) const;
    const std::string& format(TaskKind task) const;
    const std::string& separator() const { return separator_; }

    std::string system() const { return render_prompt(system_, {}); }
    std::string starting(const Problem& problem) const;
    std::string intra(const std::vector<std::string>& peer_outputs, TaskKind task) const;
    std::string summary(const std::vector<std::string>& outputs) const;
    std::string inter(std::string_view own_group, const std::vector<std::string>& other_groups,
                      TaskKind task) const;
    std::string mad_debate(std::string_view summary, TaskKind task) const;
    std::string reflection(TaskKind task) const;

private:
    std::string join_items(const std::vector<std::string>& items) const;

    std::string name_;
    std::string system_;
    std::map<TaskKind, std::string> starting_;
    std::map<TaskKind, std::string> format_;
    std::string intra_;
    std::string summary_;
    std::string inter_;
    std::string mad_debate_;
    std::string reflection_;
    std::string item_;
    std::string separator_ = "\n\n";
};

/// a + b*c + d - e*f, rendered without spaces: "3+4*5+6-2*3".
Problem make_arithmetic_problem(const std::array<int, 6>& operands, std::string id);

/// `count` problems with operands uniform in [0, operand_max].
std::vector<Problem> gen_arithmetic(std::uint64_t seed, int count, int operand_max = 99);

/// Canonical truth for a dataset answer field.
CanonicalAnswer truth_answer(std::string_view raw, TaskKind task);

/// JSON Lines: one {id, question, answer, choices?} object per line.
std::vector<Problem> load_dataset(std::istream& in, TaskKind task, std::string_view source = "<stream>");
std::vector<Problem> load_dataset(const std::filesystem::path& path, TaskKind task);
void write_dataset(std::ostream& out, const std::vector<Problem>& problems);

struct ScoreReport {
    double accuracy = 0.0;
    int correct = 0;
    int total = 0;
    std::map<std::string, bool> per_problem;  // by problem id
};

ScoreReport score_run(const std::vector<DebateResult>& results, const std::vector<Problem>& problems);

struct MeanStd {
    double mean = 0.0;
    double stddev = 0.0;  // sample (n - 1) standard deviation; 0 for n < 2
};

MeanStd mean_and_std(const std::vector<double>& values);

}  // namespace gdebate

#endif  // GDEBATE_TASKGEN_HPP
