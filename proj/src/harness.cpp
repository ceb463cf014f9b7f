#include "gdebate/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iterator>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace gdebate {

namespace {

using json = nlohmann::json;

std::string read_file(const std::filesystem::path& path, std::string_view what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(std::string(what) + ": cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json parse_json(std::string_view text, std::string_view what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string(what) + ": " + e.what());
    }
}

// Strict object reader: every lookup is recorded so that leftover keys can
// be reported as unknown fields.
class Fields {
public:
    Fields(const json& object, std::string prefix) : object_(object), prefix_(std::move(prefix)) {
        if (!object_.is_object()) throw ConfigError(name("") + "expected an object");
    }

    std::string name(std::string_view key) const { return prefix_ + std::string(key); }

    const json* find(std::string_view key) {
        seen_.insert(std::string(key));
        auto it = object_.find(key);
        return it == object_.end() ? nullptr : &*it;
    }

    template <typename T>
    T get(std::string_view key, T fallback) {
        const json* v = find(key);
        if (!v) return fallback;
        return as<T>(*v, name(key));
    }

    template <typename T>
    static T as(const json& v, const std::string& field) {
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ConfigError(field + ": expected true or false");
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer()) throw ConfigError(field + ": expected an integer");
                if constexpr (std::is_unsigned_v<T>) {
                    if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)
                        throw ConfigError(field + ": expected a non-negative integer");
                }
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!v.is_number()) throw ConfigError(field + ": expected a number");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw ConfigError(field + ": expected a string");
            }
            return v.get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(field + ": " + e.what());
        }
    }

    void finish() const {
        for (const auto& [key, value] : object_.items()) {
            if (!seen_.count(key)) throw ConfigError(name(key) + ": unknown field");
        }
    }

private:
    const json& object_;
    std::string prefix_;
    std::set<std::string, std::less<>> seen_;
};

template <typename T>
std::vector<T> as_list(const json& v, const std::string& field) {
    if (!v.is_array()) return {Fields::as<T>(v, field)};
    std::vector<T> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(Fields::as<T>(v[i], field + "[" + std::to_string(i) + "]"));
    return out;
}

template <typename T>
T checked(const std::string& field, auto&& parse) {
    try {
        return parse();
    } catch (const ConfigError& e) {
        throw ConfigError(field + ": " + e.what());
    }
}

MockPolicy parse_mock(Fields& f) {
    std::string policy = f.get<std::string>("policy", "fixed_length");
    if (policy == "fixed_length") {
        FixedLength p;
        p.output_tokens = f.get<int>("output_tokens", p.output_tokens);
        p.summary_tokens = f.get<int>("summary_tokens", p.summary_tokens);
        return p;
    }
    if (policy == "scripted") {
        Scripted p;
        p.fallback = f.get<std::string>("fallback", p.fallback);
        p.summary = f.get<std::string>("summary", p.summary);
        if (const json* script = f.find("script")) {
            if (!script->is_array()) throw ConfigError(f.name("script") + ": expected a list");
            for (std::size_t i = 0; i < script->size(); ++i) {
                Fields line((*script)[i], f.name("script") + "[" + std::to_string(i) + "].");
                AgentId agent = line.get<int>("agent", -1);
                int round = line.get<int>("round", 0);
                if (!line.find("text")) throw ConfigError(line.name("text") + ": required");
                std::string text = line.get<std::string>("text", "");
                line.finish();
                if (agent < 0) throw ConfigError(line.name("agent") + ": required, >= 0");
                if (round < 0) throw ConfigError(line.name("round") + ": must be >= 0");
                p.responses[{agent, round}] = std::move(text);
            }
        }
        return p;
    }
    if (policy == "seeded_stochastic") {
        SeededStochastic p;
        p.correctness = f.get<double>("correctness", p.correctness);
        p.conformity = f.get<double>("conformity", p.conformity);
        return p;
    }
    throw ConfigError(f.name("policy") + ": unknown value '" + policy + "'");
}

BackendConfig parse_backend(const json& v) {
    Fields f(v, "backend.");
    BackendConfig b;
    std::string kind = f.get<std::string>("kind", "mock");
    if (kind == "mock") {
        b.kind = BackendConfig::Kind::Mock;
        b.mock = parse_mock(f);
    } else if (kind == "http") {
        b.kind = BackendConfig::Kind::Http;
        b.tokenizer = Tokenizer::Estimator;
        b.endpoint = f.get<std::string>("endpoint", "");
        b.model = f.get<std::string>("model", "");
        b.temperature = f.get<double>("temperature", b.temperature);
        b.max_tokens = f.get<int>("max_tokens", b.max_tokens);
        b.api_key_env = f.get<std::string>("api_key_env", b.api_key_env);
        b.timeout = std::chrono::milliseconds(f.get<std::int64_t>("timeout_ms", b.timeout.count()));
        b.max_retries = f.get<int>("max_retries", b.max_retries);
        b.retry_backoff =
            std::chrono::milliseconds(f.get<std::int64_t>("retry_backoff_ms", b.retry_backoff.count()));
        b.max_in_flight = f.get<int>("max_in_flight", b.max_in_flight);
    } else {
        throw ConfigError(f.name("kind") + ": unknown value '" + kind + "' (mock or http)");
    }
    if (const json* t = f.find("tokenizer")) {
        auto text = Fields::as<std::string>(*t, f.name("tokenizer"));
        b.tokenizer = checked<Tokenizer>("backend", [&] { return parse_tokenizer(text); });
    }
    f.finish();
    checked<int>("backend", [&] {
        b.validate();
        return 0;
    });
    return b;
}

TaskSpec parse_task_spec(const json& v) {
    Fields f(v, "task.");
    TaskSpec t;
    if (const json* k = f.find("kind")) {
        auto text = Fields::as<std::string>(*k, f.name("kind"));
        t.kind = checked<TaskKind>("task", [&] { return parse_task(text); });
    }
    std::string source = f.get<std::string>("source", "generate");
    if (source == "generate") {
        t.source = TaskSpec::Source::Generate;
    } else if (source == "dataset") {
        t.source = TaskSpec::Source::Dataset;
    } else if (source == "filler") {
        t.source = TaskSpec::Source::Filler;
    } else {
        throw ConfigError(f.name("source") + ": unknown value '" + source +
                          "' (generate, dataset or filler)");
    }
    t.path = f.get<std::string>("path", "");
    t.count = f.get<int>("count", t.count);
    t.seed = f.get<std::uint64_t>("seed", t.seed);
    t.operand_max = f.get<int>("operand_max", t.operand_max);
    t.question_tokens = f.get<int>("question_tokens", t.question_tokens);
    f.finish();
    return t;
}

void parse_group_sizes(Fields& f, DebateConfig& d) {
    const json* sizes = f.find("group_sizes");
    const json* groups = f.find("groups");
    if (sizes && groups) throw ConfigError("groups: give either group_sizes or groups, not both");
    if (sizes) {
        if (!sizes->is_array()) throw ConfigError(f.name("group_sizes") + ": expected a list");
        d.group_sizes = as_list<int>(*sizes, f.name("group_sizes"));
    } else if (groups) {
        int n = Fields::as<int>(*groups, f.name("groups"));
        d.group_sizes = checked<std::vector<int>>("groups", [&] { return even_group_sizes(d.agents, n); });
    } else {
        d.group_sizes = {d.agents};
    }
}

ExperimentConfig parse_experiment_object(const json& v) {
    Fields f(v, "");
    ExperimentConfig c;
    DebateConfig& d = c.debate;
    if (const json* m = f.find("mode")) d.mode = parse_mode(Fields::as<std::string>(*m, "mode"));
    d.agents = f.get<int>("agents", 1);
    parse_group_sizes(f, d);
    d.total_rounds = f.get<int>("rounds", 1);
    d.intra_rounds = f.get<int>("intra_rounds", 1);
    d.seed = f.get<std::uint64_t>("seed", 0);
    d.repetitions = f.get<int>("repetitions", 1);
    d.reflection_trials = f.get<int>("reflection_trials", d.reflection_trials);
    c.parallelism = f.get<int>("parallelism", 1);
    c.templates = f.get<std::string>("templates", c.templates);
    if (const json* t = f.find("task")) c.task = parse_task_spec(*t);
    if (const json* b = f.find("backend")) c.backend = parse_backend(*b);
    if (const json* r = f.find("report")) {
        Fields report(*r, "report.");
        if (const json* timing = report.find("timing")) c.timing = Fields::as<bool>(*timing, "report.timing");
        report.finish();
    }
    f.finish();
    d.task = c.task.kind;
    c.validate();
    return c;
}

std::string fixed(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", value);
    return buf;
}

std::string csv_field(std::string_view text) {
    if (text.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(text);
    std::string out = "\"";
    for (char c : text) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string group_sizes_text(const std::vector<int>& sizes) {
    std::string out;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (i) out += ';';
        out += std::to_string(sizes[i]);
    }
    return out;
}

ReportRow key_row(const ExperimentConfig& c) {
    const DebateConfig& d = c.debate;
    ReportRow r;
    r.dataset = std::string(to_string(c.task.kind));
    r.mode = d.mode;
    r.agents = d.agents;
    r.groups = d.group_count();
    r.rounds = d.total_rounds;
    r.intra_rounds = d.intra_rounds;
    r.stages = d.stage_count();
    r.seed = d.seed;
    return r;
}

std::vector<Problem> filler_problems(const TaskSpec& task, int rep) {
    std::string question;
    for (int i = 0; i < task.question_tokens; ++i) question += i ? " q" : "q";
    std::vector<Problem> out;
    for (int i = 0; i < task.count; ++i) {
        Problem p;
        p.id = "filler-" + std::to_string(rep) + "-" + std::to_string(i);
        p.task = task.kind;
        p.question = question;
        if (task.kind == TaskKind::MMLU) p.choices = {"a", "b", "c", "d"};
        p.truth = make_answer(task.kind == TaskKind::MMLU ? "A" : "0");
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace

void ExperimentConfig::validate() const {
    debate.validate();
    backend.validate();
    if (parallelism < 1) throw ConfigError("parallelism: must be >= 1");
    if (task.count < 0) throw ConfigError("task.count: must be >= 0");
    switch (task.source) {
        case TaskSpec::Source::Generate:
            if (task.kind != TaskKind::Arithmetic)
                throw ConfigError("task.source: only Arithmetic problems can be generated");
            if (task.count < 1) throw ConfigError("task.count: must be >= 1 for generated problems");
            if (task.operand_max < 0) throw ConfigError("task.operand_max: must be >= 0");
            break;
        case TaskSpec::Source::Dataset:
            if (task.path.empty()) throw ConfigError("task.path: required for a dataset source");
            break;
        case TaskSpec::Source::Filler:
            if (task.count < 1) throw ConfigError("task.count: must be >= 1 for filler problems");
            if (task.question_tokens < 0) throw ConfigError("task.question_tokens: must be >= 0");
            break;
    }
}

ExperimentConfig parse_experiment(std::string_view json_text) {
    return parse_experiment_object(parse_json(json_text, "config"));
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
    return parse_experiment(read_file(path, "config"));
}

std::vector<Problem> problems_for(const TaskSpec& task, int rep) {
    switch (task.source) {
        case TaskSpec::Source::Generate:
            return gen_arithmetic(task.seed + static_cast<std::uint64_t>(rep), task.count, task.operand_max);
        case TaskSpec::Source::Filler:
            return filler_problems(task, rep);
        case TaskSpec::Source::Dataset: {
            auto all = load_dataset(std::filesystem::path(task.path), task.kind);
            if (task.count == 0) return all;
            std::size_t begin = static_cast<std::size_t>(rep) * static_cast<std::size_t>(task.count);
            std::size_t end = begin + static_cast<std::size_t>(task.count);
            if (end > all.size())
                throw DatasetError(task.path + ": repetition " + std::to_string(rep + 1) + " needs problems " +
                                   std::to_string(begin + 1) + ".." + std::to_string(end) + " but only " +
                                   std::to_string(all.size()) + " exist");
            return {all.begin() + static_cast<std::ptrdiff_t>(begin), all.begin() + static_cast<std::ptrdiff_t>(end)};
        }
    }
    return {};
}

std::string_view to_string(RunStatus status) {
    switch (status) {
        case RunStatus::Complete: return "complete";
        case RunStatus::Partial: return "partial";
        case RunStatus::Failed: return "failed";
    }
    return "?";
}

bool ExperimentReport::partial() const {
    return std::any_of(summaries.begin(), summaries.end(),
                       [](const ConfigSummary& s) { return s.status != RunStatus::Complete; });
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
    config.validate();
    auto backend = make_backend(config.backend);
    return run_experiment(config, *backend);
}

ExperimentReport run_experiment(const ExperimentConfig& config, AgentBackend& backend) {
    config.validate();
    const TemplateSet templates = TemplateSet::resolve(config.templates);
    const DebateConfig& base = config.debate;

    ExperimentReport report;
    ConfigSummary summary;
    summary.key = key_row(config);
    summary.requested = base.repetitions;

    for (int rep = 0; rep < base.repetitions; ++rep) {
        ReportRow row = key_row(config);
        row.repetition = rep + 1;
        try {
            auto start = std::chrono::steady_clock::now();
            auto problems = problems_for(config.task, rep);
            std::vector<DebateResult> results;
            for (std::size_t i = 0; i < problems.size(); ++i) {
                DebateConfig run = base;
                run.task = config.task.kind;
                run.seed = mix_seed(mix_seed(base.seed, static_cast<std::uint64_t>(rep)), i);
                results.push_back(run_mode(run, problems[i], backend, templates, {config.parallelism}));
                const TokenLedger& ledger = results.back().ledger;
                row.prompt_tokens += ledger.prompt_total();
                row.completion_tokens += ledger.completion_total();
                row.api_calls += ledger.api_calls();
                row.estimated = row.estimated || ledger.estimated();
            }
            row.total_tokens = row.prompt_tokens + row.completion_tokens;
            row.accuracy = score_run(results, problems).accuracy;
            if (config.timing_enabled()) {
                row.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                  std::chrono::steady_clock::now() - start)
                                  .count();
            }
        } catch (const DebateAborted& e) {
            summary.error = "repetition " + std::to_string(rep + 1) + ": " + e.what();
            break;
        } catch (const BackendError& e) {
            summary.error = "repetition " + std::to_string(rep + 1) + ": " + e.what();
            break;
        } catch (const DatasetError& e) {
            summary.error = "repetition " + std::to_string(rep + 1) + ": " + e.what();
            break;
        }
        report.rows.push_back(row);
    }

    summary.completed = static_cast<int>(report.rows.size());
    summary.status = summary.completed == summary.requested ? RunStatus::Complete
                     : summary.completed == 0               ? RunStatus::Failed
                                                            : RunStatus::Partial;
    std::vector<double> acc, prompt, completion, total, calls;
    for (const auto& r : report.rows) {
        acc.push_back(r.accuracy);
        prompt.push_back(static_cast<double>(r.prompt_tokens));
        completion.push_back(static_cast<double>(r.completion_tokens));
        total.push_back(static_cast<double>(r.total_tokens));
        calls.push_back(static_cast<double>(r.api_calls));
    }
    summary.accuracy = mean_and_std(acc);
    summary.prompt_tokens = mean_and_std(prompt);
    summary.completion_tokens = mean_and_std(completion);
    summary.total_tokens = mean_and_std(total);
    summary.api_calls = mean_and_std(calls);
    report.summaries.push_back(std::move(summary));
    return report;
}

std::vector<ExperimentConfig> SweepSpec::cells() const {
    auto require = [](bool nonempty, const char* axis) {
        if (!nonempty) throw ConfigError(std::string("axes.") + axis + ": axis is empty");
    };
    require(!modes.empty(), "mode");
    require(!agents.empty(), "agents");
    require(!group_strategies.empty(), "group_strategies");
    require(!rounds.empty(), "rounds");
    require(!intra_rounds.empty(), "intra_rounds");
    require(!seeds.empty(), "seeds");
    require(!repetitions.empty(), "repetitions");
    if (parallel_cells < 1) throw ConfigError("parallel_cells: must be >= 1");

    std::vector<ExperimentConfig> out;
    for (Mode mode : modes) {
        bool grouped = mode == Mode::GD || mode == Mode::MadGroup;
        std::size_t n_strategies = grouped ? group_strategies.size() : 1;
        std::size_t n_intra = grouped ? intra_rounds.size() : 1;
        for (int m : agents) {
            for (std::size_t g = 0; g < n_strategies; ++g) {
                for (int t : rounds) {
                    for (std::size_t r = 0; r < n_intra; ++r) {
                        for (std::uint64_t seed : seeds) {
                            for (int reps : repetitions) {
                                ExperimentConfig c = base;
                                DebateConfig& d = c.debate;
                                d.mode = mode;
                                d.agents = m;
                                d.total_rounds = t;
                                d.intra_rounds = grouped ? intra_rounds[r] : 1;
                                d.seed = seed;
                                d.repetitions = reps;
                                std::string cell = std::string(to_string(mode)) + ", M=" + std::to_string(m) +
                                                   ", T=" + std::to_string(t) +
                                                   ", R=" + std::to_string(d.intra_rounds);
                                if (grouped) {
                                    const auto& s = group_strategies[g];
                                    if (const auto* sizes = std::get_if<std::vector<int>>(&s)) {
                                        d.group_sizes = *sizes;
                                    } else {
                                        d.group_sizes = checked<std::vector<int>>(
                                            "sweep cell (" + cell + ")",
                                            [&] { return even_group_sizes(m, std::get<int>(s)); });
                                    }
                                    cell += ", groups=" + group_sizes_text(d.group_sizes);
                                } else {
                                    d.group_sizes = {m};
                                }
                                checked<int>("sweep cell (" + cell + ")", [&] {
                                    c.validate();
                                    return 0;
                                });
                                out.push_back(std::move(c));
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

SweepSpec parse_sweep(std::string_view json_text) {
    json v = parse_json(json_text, "sweep spec");
    Fields f(v, "");
    SweepSpec spec;
    const json* base = f.find("base");
    if (!base) throw ConfigError("base: required");
    spec.base = checked<ExperimentConfig>("base", [&] { return parse_experiment_object(*base); });
    spec.parallel_cells = f.get<int>("parallel_cells", 1);
    const DebateConfig& d = spec.base.debate;
    spec.modes = {d.mode};
    spec.agents = {d.agents};
    spec.group_strategies = {d.group_sizes};
    spec.rounds = {d.total_rounds};
    spec.intra_rounds = {d.intra_rounds};
    spec.seeds = {d.seed};
    spec.repetitions = {d.repetitions};
    if (const json* axes_json = f.find("axes")) {
        Fields axes(*axes_json, "axes.");
        auto list = [&](std::string_view key) -> const json* {
            const json* a = axes.find(key);
            if (a && !a->is_array()) throw ConfigError(axes.name(key) + ": expected a list");
            return a;
        };
        if (const json* a = list("mode")) {
            spec.modes.clear();
            for (const auto& s : as_list<std::string>(*a, axes.name("mode"))) spec.modes.push_back(parse_mode(s));
        }
        if (const json* a = list("agents")) spec.agents = as_list<int>(*a, axes.name("agents"));
        if (const json* a = list("group_strategies")) {
            spec.group_strategies.clear();
            for (std::size_t i = 0; i < a->size(); ++i) {
                std::string field = axes.name("group_strategies") + "[" + std::to_string(i) + "]";
                const json& s = (*a)[i];
                if (s.is_array()) {
                    spec.group_strategies.emplace_back(as_list<int>(s, field));
                } else {
                    Fields g(s, field + ".");
                    const json* n = g.find("groups");
                    if (!n) throw ConfigError(g.name("groups") + ": required");
                    spec.group_strategies.emplace_back(Fields::as<int>(*n, g.name("groups")));
                    g.finish();
                }
            }
        }
        if (const json* a = list("rounds")) spec.rounds = as_list<int>(*a, axes.name("rounds"));
        if (const json* a = list("intra_rounds")) spec.intra_rounds = as_list<int>(*a, axes.name("intra_rounds"));
        if (const json* a = list("seeds")) spec.seeds = as_list<std::uint64_t>(*a, axes.name("seeds"));
        if (const json* a = list("repetitions")) spec.repetitions = as_list<int>(*a, axes.name("repetitions"));
        axes.finish();
    }
    f.finish();
    return spec;
}

SweepSpec load_sweep(const std::filesystem::path& path) {
    return parse_sweep(read_file(path, "sweep spec"));
}

ExperimentReport sweep_grid(const SweepSpec& spec) {
    auto cells = spec.cells();
    auto backend = make_backend(spec.base.backend);
    return sweep_grid(spec, *backend);
}

ExperimentReport sweep_grid(const SweepSpec& spec, AgentBackend& backend) {
    const auto cells = spec.cells();  // validates every cell up front
    std::vector<ExperimentReport> parts(cells.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            try {
                parts[i] = run_experiment(cells[i], backend);
            } catch (const std::exception& e) {
                ConfigSummary s;
                s.key = key_row(cells[i]);
                s.requested = cells[i].debate.repetitions;
                s.status = RunStatus::Failed;
                s.error = e.what();
                parts[i] = {{}, {s}};
            }
        }
    };
    {
        std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(spec.parallel_cells), cells.size());
        std::vector<std::jthread> pool;
        for (std::size_t i = 1; i < n; ++i) pool.emplace_back(worker);
        worker();
    }
    ExperimentReport out;
    for (auto& p : parts) {
        std::move(p.rows.begin(), p.rows.end(), std::back_inserter(out.rows));
        std::move(p.summaries.begin(), p.summaries.end(), std::back_inserter(out.summaries));
    }
    return out;
}

void write_report_csv(std::ostream& out, const ExperimentReport& report) {
    out << kReportColumns << '\n';
    for (const auto& r : report.rows) {
        out << csv_field(r.dataset) << ',' << to_string(r.mode) << ',' << r.agents << ',' << r.groups << ','
            << r.rounds << ',' << r.intra_rounds << ',' << r.stages << ',' << r.seed << ',' << r.repetition
            << ',' << fixed(r.accuracy) << ',' << r.prompt_tokens << ',' << r.completion_tokens << ','
            << r.total_tokens << ',' << r.api_calls << ',' << r.wall_ms << ',' << (r.estimated ? 1 : 0)
            << '\n';
    }
}

void write_summary_csv(std::ostream& out, const ExperimentReport& report) {
    out << "dataset,mode,M,N,T,R,S,seed,repetitions,completed,status,accuracy_mean,accuracy_std,"
           "prompt_tokens_mean,prompt_tokens_std,completion_tokens_mean,completion_tokens_std,"
           "total_tokens_mean,total_tokens_std,api_calls_mean,api_calls_std,error\n";
    for (const auto& s : report.summaries) {
        const ReportRow& k = s.key;
        out << csv_field(k.dataset) << ',' << to_string(k.mode) << ',' << k.agents << ',' << k.groups << ','
            << k.rounds << ',' << k.intra_rounds << ',' << k.stages << ',' << k.seed << ',' << s.requested
            << ',' << s.completed << ',' << to_string(s.status);
        for (const MeanStd* m : {&s.accuracy, &s.prompt_tokens, &s.completion_tokens, &s.total_tokens,
                                 &s.api_calls})
            out << ',' << fixed(m->mean) << ',' << fixed(m->stddev);
        out << ',' << csv_field(s.error) << '\n';
    }
}

void write_report_json(std::ostream& out, const ExperimentReport& report) {
    using ojson = nlohmann::ordered_json;
    ojson rows = ojson::array();
    for (const auto& r : report.rows) {
        rows.push_back({{"dataset", r.dataset},
                        {"mode", to_string(r.mode)},
                        {"M", r.agents},
                        {"N", r.groups},
                        {"T", r.rounds},
                        {"R", r.intra_rounds},
                        {"S", r.stages},
                        {"seed", r.seed},
                        {"repetition", r.repetition},
                        {"accuracy", r.accuracy},
                        {"prompt_tokens", r.prompt_tokens},
                        {"completion_tokens", r.completion_tokens},
                        {"total_tokens", r.total_tokens},
                        {"api_calls", r.api_calls},
                        {"wall_ms", r.wall_ms},
                        {"estimated_usage_flag", r.estimated}});
    }
    ojson summaries = ojson::array();
    for (const auto& s : report.summaries) {
        auto stat = [](const MeanStd& m) { return ojson{{"mean", m.mean}, {"std", m.stddev}}; };
        const ReportRow& k = s.key;
        summaries.push_back({{"dataset", k.dataset},
                             {"mode", to_string(k.mode)},
                             {"M", k.agents},
                             {"N", k.groups},
                             {"T", k.rounds},
                             {"R", k.intra_rounds},
                             {"S", k.stages},
                             {"seed", k.seed},
                             {"repetitions", s.requested},
                             {"completed", s.completed},
                             {"status", to_string(s.status)},
                             {"accuracy", stat(s.accuracy)},
                             {"prompt_tokens", stat(s.prompt_tokens)},
                             {"completion_tokens", stat(s.completion_tokens)},
                             {"total_tokens", stat(s.total_tokens)},
                             {"api_calls", stat(s.api_calls)},
                             {"error", s.error}});
    }
    ojson doc{{"partial", report.partial()}, {"rows", rows}, {"summary", summaries}};
    out << doc.dump(2) << '\n';
}

CostAxes parse_cost_axes(std::string_view json_text) {
    json v = parse_json(json_text, "cost params");
    Fields f(v, "");
    CostAxes a;
    auto axis = [&](std::string_view key, auto& target) {
        using T = typename std::decay_t<decltype(target)>::value_type;
        if (const json* x = f.find(key)) {
            target = as_list<T>(*x, f.name(key));
            if (target.empty()) throw ConfigError(f.name(key) + ": axis is empty");
        }
    };
    axis("M", a.agents);
    axis("N", a.groups);
    axis("T", a.rounds);
    axis("R", a.intra_rounds);
    axis("Q", a.question);
    axis("o", a.output);
    axis("m", a.summary);
    if (const json* g = f.find("group_sizes")) {
        if (!g->is_array()) throw ConfigError("group_sizes: expected a list");
        a.group_sizes = as_list<int>(*g, "group_sizes");
    }
    f.finish();
    if (a.group_sizes && a.agents.size() != 1)
        throw ConfigError("group_sizes: only allowed with a single M value");
    return a;
}

CostAxes load_cost_axes(const std::filesystem::path& path) {
    return parse_cost_axes(read_file(path, "cost params"));
}

std::vector<CostRow> cost_report(const CostAxes& axes) {
    std::vector<CostRow> out;
    std::vector<std::vector<int>> strategies;
    for (int m : axes.agents) {
        strategies.clear();
        if (axes.group_sizes) {
            strategies.push_back(*axes.group_sizes);
        } else {
            for (int n : axes.groups) {
                strategies.push_back(checked<std::vector<int>>("N", [&] { return even_group_sizes(m, n); }));
            }
        }
        for (const auto& sizes : strategies) {
            for (int t : axes.rounds) {
                for (int r : axes.intra_rounds) {
                    for (auto q : axes.question) {
                        for (auto o : axes.output) {
                            for (auto s : axes.summary) {
                                CostRow row;
                                row.params = {m, sizes, t, r, q, o, s};
                                row.params.validate(true);
                                row.mad_total = mad_token_cost(row.params).total;
                                row.gd_total = gd_token_cost(row.params).total;
                                row.reduction = row.mad_total == 0
                                                    ? 0.0
                                                    : 1.0 - static_cast<double>(row.gd_total) /
                                                                static_cast<double>(row.mad_total);
                                row.mad_bound = mad_cost_bound(row.params);
                                row.gd_bound = gd_cost_bound(row.params);
                                row.optimal = optimal_group_count(m, t, row.params.stage_count(), o, s);
                                out.push_back(std::move(row));
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

void write_cost_csv(std::ostream& out, const std::vector<CostRow>& rows) {
    out << "M,N,group_sizes,T,R,S,Q,o,m,mad_total,gd_total,reduction,mad_bound,gd_bound,n_star,n_heuristic\n";
    for (const auto& r : rows) {
        const CostParams& p = r.params;
        out << p.agents << ',' << p.group_count() << ',' << group_sizes_text(p.group_sizes) << ','
            << p.rounds << ',' << p.intra_rounds << ',' << p.stage_count() << ',' << p.question << ','
            << p.output << ',' << p.summary << ',' << r.mad_total << ',' << r.gd_total << ','
            << fixed(r.reduction) << ',' << r.mad_bound << ',' << fixed(r.gd_bound) << ',' << r.optimal.n_star
            << ',' << r.optimal.n_heuristic << '\n';
    }
}

}  // namespace gdebate
