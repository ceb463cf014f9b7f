#include "gdebate/taskgen.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gdebate/builtin_templates.inc"
#include "gdebate/orchestrator.hpp"

namespace gdebate {

using nlohmann::json;

namespace {

constexpr std::array<TaskKind, 4> kTasks{TaskKind::Arithmetic, TaskKind::GSM8K, TaskKind::MMLU,
                                         TaskKind::MATH};

bool is_slot_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

std::string required_string(const json& j, const std::string& key) {
    if (!j.contains(key)) throw ConfigError("templates: missing key '" + key + "'");
    if (!j[key].is_string()) throw ConfigError("templates: key '" + key + "' must be a string");
    return j[key].get<std::string>();
}

std::map<TaskKind, std::string> per_task(const json& j, const std::string& key) {
    if (!j.contains(key) || !j[key].is_object())
        throw ConfigError("templates: missing per-task table '" + key + "'");
    std::map<TaskKind, std::string> out;
    for (TaskKind task : kTasks) {
        std::string name(to_string(task));
        out[task] = required_string(j[key], name);
    }
    return out;
}

std::string whitespace_free(std::string_view text) {
    std::string out;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
    return out;
}

}  // namespace

std::string render_prompt(std::string_view text, const Slots& slots) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '{' && i + 1 < text.size() && text[i + 1] == '{') {
            out.push_back('{');
            ++i;
        } else if (c == '}' && i + 1 < text.size() && text[i + 1] == '}') {
            out.push_back('}');
            ++i;
        } else if (c == '{') {
            std::size_t end = i + 1;
            while (end < text.size() && is_slot_char(text[end])) ++end;
            if (end < text.size() && text[end] == '}' && end > i + 1) {
                std::string_view name = text.substr(i + 1, end - i - 1);
                auto it = slots.find(name);
                if (it == slots.end())
                    throw RenderError("render: no value for slot {" + std::string(name) + "}");
                out += it->second;
                i = end;
            } else {
                out.push_back(c);
            }
        } else {
            out.push_back(c);
        }
    }
    return out;
}

const TemplateSet& TemplateSet::builtin(std::string_view name) {
    static const TemplateSet debate = from_json(detail::kDebateTemplates);
    static const TemplateSet bare = from_json(detail::kBareTemplates);
    if (name == "debate") return debate;
    if (name == "bare") return bare;
    throw ConfigError("templates: unknown builtin set '" + std::string(name) + "'");
}

TemplateSet TemplateSet::from_json(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("templates: invalid JSON: ") + e.what());
    }
    TemplateSet t;
    t.name_ = required_string(j, "name");
    t.system_ = required_string(j, "system");
    t.starting_ = per_task(j, "starting");
    t.format_ = per_task(j, "format");
    // Format lines are spliced in as slot values, so resolve their escapes now.
    for (auto& [task, text] : t.format_) text = render_prompt(text, {});
    t.intra_ = required_string(j, "intra");
    t.summary_ = required_string(j, "summary");
    t.inter_ = required_string(j, "inter");
    t.mad_debate_ = required_string(j, "mad_debate");
    t.reflection_ = required_string(j, "reflection");
    t.item_ = required_string(j, "item");
    t.separator_ = required_string(j, "separator");
    return t;
}

TemplateSet TemplateSet::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("templates: cannot open " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_json(buffer.str());
}

TemplateSet TemplateSet::resolve(std::string_view name_or_path) {
    if (name_or_path == "debate" || name_or_path == "bare") return builtin(name_or_path);
    return load(std::filesystem::path(name_or_path));
}

const std::string& TemplateSet::text(PromptPhase phase, TaskKind task) const {
    switch (phase) {
        case PromptPhase::System: return system_;
        case PromptPhase::Starting: return starting_.at(task);
        case PromptPhase::IntraDebate: return intra_;
        case PromptPhase::Summary: return summary_;
        case PromptPhase::InterDebate: return inter_;
        case PromptPhase::MadDebate: return mad_debate_;
        case PromptPhase::Reflection: return reflection_;
    }
    return system_;
}

const std::string& TemplateSet::format(TaskKind task) const { return format_.at(task); }

std::string TemplateSet::join_items(const std::vector<std::string>& items) const {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i > 0) out += separator_;
        out += render_prompt(item_, {{"response", items[i]}});
    }
    return out;
}

std::string TemplateSet::starting(const Problem& problem) const {
    Slots slots{{"question", problem.question}, {"format", format(problem.task)}};
    static constexpr std::array<const char*, 4> kChoiceSlots{"choice_a", "choice_b", "choice_c",
                                                             "choice_d"};
    for (std::size_t i = 0; i < problem.choices.size() && i < kChoiceSlots.size(); ++i)
        slots.emplace(kChoiceSlots[i], problem.choices[i]);
    return render_prompt(starting_.at(problem.task), slots);
}

std::string TemplateSet::intra(const std::vector<std::string>& peer_outputs, TaskKind task) const {
    return render_prompt(intra_, {{"peer_responses", join_items(peer_outputs)}, {"format", format(task)}});
}

std::string TemplateSet::summary(const std::vector<std::string>& outputs) const {
    return render_prompt(summary_, {{"responses", join_items(outputs)}});
}

std::string TemplateSet::inter(std::string_view own_group, const std::vector<std::string>& other_groups,
                               TaskKind task) const {
    std::string others;
    for (std::size_t i = 0; i < other_groups.size(); ++i) {
        if (i > 0) others += separator_;
        others += other_groups[i];
    }
    return render_prompt(inter_, {{"own_group_summary", std::string(own_group)},
                                  {"other_group_summaries", others},
                                  {"format", format(task)}});
}

std::string TemplateSet::mad_debate(std::string_view summary, TaskKind task) const {
    return render_prompt(mad_debate_, {{"summary", std::string(summary)}, {"format", format(task)}});
}

std::string TemplateSet::reflection(TaskKind task) const {
    return render_prompt(reflection_, {{"format", format(task)}});
}

Problem make_arithmetic_problem(const std::array<int, 6>& v, std::string id) {
    Problem p;
    p.id = std::move(id);
    p.task = TaskKind::Arithmetic;
    p.question = std::to_string(v[0]) + "+" + std::to_string(v[1]) + "*" + std::to_string(v[2]) + "+" +
                 std::to_string(v[3]) + "-" + std::to_string(v[4]) + "*" + std::to_string(v[5]);
    long long truth = static_cast<long long>(v[0]) + static_cast<long long>(v[1]) * v[2] + v[3] -
                      static_cast<long long>(v[4]) * v[5];
    p.truth = make_answer(std::to_string(truth));
    return p;
}

std::vector<Problem> gen_arithmetic(std::uint64_t seed, int count, int operand_max) {
    if (count < 1) throw ConfigError("count: must be >= 1, got " + std::to_string(count));
    if (operand_max < 0) throw ConfigError("operand_max: must be >= 0");
    SeededRng rng(seed);
    std::vector<Problem> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        std::array<int, 6> operands{};
        for (int& v : operands) v = static_cast<int>(rng.uniform(static_cast<std::uint64_t>(operand_max)));
        out.push_back(make_arithmetic_problem(operands, "arith-" + std::to_string(seed) + "-" + std::to_string(i)));
    }
    return out;
}

CanonicalAnswer truth_answer(std::string_view raw, TaskKind task) {
    if ((task == TaskKind::GSM8K || task == TaskKind::MATH) && raw.find("\\boxed{") == raw.npos)
        return make_answer(whitespace_free(raw));
    return extract_answer(raw, task);
}

std::vector<Problem> load_dataset(std::istream& in, TaskKind task, std::string_view source) {
    std::vector<Problem> out;
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& msg) -> void {
        throw DatasetError(std::string(source) + ":" + std::to_string(line_no) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            fail(std::string("malformed JSON: ") + e.what());
        }
        if (!record.is_object()) fail("record is not an object");
        for (const char* key : {"id", "question", "answer"})
            if (!record.contains(key)) fail(std::string("missing required field '") + key + "'");

        Problem p;
        p.task = task;
        if (!record["id"].is_string()) fail("field 'id' must be a string");
        if (!record["question"].is_string()) fail("field 'question' must be a string");
        p.id = record["id"].get<std::string>();
        p.question = record["question"].get<std::string>();
        const auto& answer = record["answer"];
        std::string raw;
        if (answer.is_string()) raw = answer.get<std::string>();
        else if (answer.is_number()) raw = answer.dump();
        else fail("field 'answer' must be a string or number");

        if (record.contains("choices")) {
            const auto& choices = record["choices"];
            if (!choices.is_array()) fail("field 'choices' must be an array");
            for (const auto& c : choices) {
                if (!c.is_string()) fail("every choice must be a string");
                p.choices.push_back(c.get<std::string>());
            }
            if (p.choices.size() != 4)
                fail("expected 4 choices, got " + std::to_string(p.choices.size()));
        }
        if (task == TaskKind::MMLU && p.choices.size() != 4) fail("MMLU record needs 4 choices");

        p.truth = truth_answer(raw, task);
        if (!p.truth.parsed()) fail("answer '" + raw + "' is not in the " + std::string(to_string(task)) + " format");
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<Problem> load_dataset(const std::filesystem::path& path, TaskKind task) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open dataset " + path.string());
    return load_dataset(in, task, path.string());
}

void write_dataset(std::ostream& out, const std::vector<Problem>& problems) {
    for (const auto& p : problems) {
        json record = {{"id", p.id}, {"question", p.question}, {"answer", p.truth.value}};
        if (!p.choices.empty()) record["choices"] = p.choices;
        out << record.dump() << '\n';
    }
}

ScoreReport score_run(const std::vector<DebateResult>& results, const std::vector<Problem>& problems) {
    std::map<std::string, const DebateResult*> by_id;
    for (const auto& r : results) {
        if (!by_id.emplace(r.problem_id, &r).second)
            throw ScoringError("score: duplicate result for problem '" + r.problem_id + "'");
    }
    std::set<std::string> seen;
    ScoreReport report;
    for (const auto& p : problems) {
        if (!seen.insert(p.id).second) throw ScoringError("score: duplicate problem id '" + p.id + "'");
        auto it = by_id.find(p.id);
        if (it == by_id.end()) throw ScoringError("score: no result for problem '" + p.id + "'");
        bool correct = it->second->final == p.truth;
        report.per_problem[p.id] = correct;
        report.correct += correct ? 1 : 0;
    }
    if (by_id.size() != problems.size())
        throw ScoringError("score: " + std::to_string(by_id.size() - seen.size()) +
                           " result(s) have no matching problem");
    report.total = static_cast<int>(problems.size());
    report.accuracy = report.total == 0 ? 0.0 : static_cast<double>(report.correct) / report.total;
    return report;
}

MeanStd mean_and_std(const std::vector<double>& values) {
    MeanStd out;
    if (values.empty()) return out;
    double sum = 0.0;
    for (double v : values) sum += v;
    out.mean = sum / static_cast<double>(values.size());
    if (values.size() < 2) return out;
    double squares = 0.0;
    for (double v : values) squares += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(squares / static_cast<double>(values.size() - 1));
    return out;
}

}  // namespace gdebate
