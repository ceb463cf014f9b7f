#include "gdebate/core.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <optional>

namespace gdebate {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view text) {
    while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
    while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
    return text;
}

std::string collapse_whitespace(std::string_view text) {
    std::string out;
    bool pending_space = false;
    for (char c : trim(text)) {
        if (is_space(c)) {
            pending_space = true;
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

std::string strip_whitespace(std::string_view text) {
    std::string out;
    for (char c : text)
        if (!is_space(c)) out.push_back(c);
    return out;
}

// Canonical decimal form of a numeral, or nullopt if `text` is not one.
// Accepts an optional sign, a leading '$', comma thousands groups and a
// trailing '.'.
std::optional<std::string> canonical_number(std::string_view text) {
    if (text.empty()) return std::nullopt;
    bool negative = false;
    if (text.front() == '+' || text.front() == '-') {
        negative = text.front() == '-';
        text.remove_prefix(1);
    }
    if (!text.empty() && text.front() == '$') text.remove_prefix(1);
    if (!text.empty() && text.back() == '.') text.remove_suffix(1);
    if (text.empty()) return std::nullopt;

    std::string integer;
    std::string fraction;
    std::size_t i = 0;
    std::size_t group_len = 0;
    bool saw_comma = false;
    for (; i < text.size() && text[i] != '.'; ++i) {
        char c = text[i];
        if (is_digit(c)) {
            integer.push_back(c);
            ++group_len;
        } else if (c == ',') {
            if (integer.empty() || (saw_comma && group_len != 3)) return std::nullopt;
            saw_comma = true;
            group_len = 0;
        } else {
            return std::nullopt;
        }
    }
    if (saw_comma && group_len != 3) return std::nullopt;
    if (i < text.size()) {
        for (++i; i < text.size(); ++i) {
            if (!is_digit(text[i])) return std::nullopt;
            fraction.push_back(text[i]);
        }
        if (fraction.empty()) return std::nullopt;
    }
    if (integer.empty() && fraction.empty()) return std::nullopt;

    auto first = integer.find_first_not_of('0');
    integer = first == std::string::npos ? "0" : integer.substr(first);
    auto last = fraction.find_last_not_of('0');
    fraction = last == std::string::npos ? "" : fraction.substr(0, last + 1);

    std::string out = integer;
    if (!fraction.empty()) out += "." + fraction;
    if (negative && out != "0") out.insert(out.begin(), '-');
    return out;
}

// Balanced contents of every \boxed{...} in order.
std::vector<std::string> boxed_contents(std::string_view text) {
    static constexpr std::string_view kOpen = "\\boxed{";
    std::vector<std::string> out;
    std::size_t pos = 0;
    while ((pos = text.find(kOpen, pos)) != std::string_view::npos) {
        std::size_t start = pos + kOpen.size();
        int depth = 1;
        std::size_t i = start;
        for (; i < text.size() && depth > 0; ++i) {
            if (text[i] == '{') ++depth;
            else if (text[i] == '}') --depth;
        }
        if (depth == 0) {
            std::string inner = strip_whitespace(text.substr(start, i - 1 - start));
            // "\boxed{{72}}" from literal copies of the format instruction.
            while (inner.size() >= 2 && inner.front() == '{' && inner.back() == '}')
                inner = inner.substr(1, inner.size() - 2);
            out.push_back(std::move(inner));
        }
        pos = start;
    }
    return out;
}

std::vector<std::string> choice_letters(std::string_view text) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i + 2 < text.size(); ++i) {
        if (text[i] == '(' && text[i + 2] == ')' && text[i + 1] >= 'A' && text[i + 1] <= 'D')
            out.emplace_back(1, text[i + 1]);
    }
    return out;
}

std::vector<std::string> numerals(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_digit(text[i]) || (i > 0 && (is_alpha(text[i - 1]) || text[i - 1] == '_' ||
                                             is_digit(text[i - 1])))) {
            ++i;
            continue;
        }
        std::size_t start = i;
        if (i > 0 && text[i - 1] == '-') {
            bool binary_minus = i > 1 && (std::isalnum(static_cast<unsigned char>(text[i - 2])) ||
                                          text[i - 2] == ')');
            if (!binary_minus) start = i - 1;
        }
        while (i < text.size()) {
            if (is_digit(text[i])) {
                ++i;
            } else if (text[i] == ',' && i + 3 < text.size() && is_digit(text[i + 1]) &&
                       is_digit(text[i + 2]) && is_digit(text[i + 3]) &&
                       (i + 4 >= text.size() || !is_digit(text[i + 4]))) {
                i += 4;
            } else if (text[i] == '.' && i + 1 < text.size() && is_digit(text[i + 1])) {
                ++i;
            } else {
                break;
            }
        }
        out.emplace_back(text.substr(start, i - start));
    }
    return out;
}

}  // namespace

std::string_view to_string(Mode mode) {
    switch (mode) {
        case Mode::GD: return "GD";
        case Mode::MAD: return "MAD";
        case Mode::MadForget: return "MAD_FORGET";
        case Mode::MadGroup: return "MAD_GROUP";
        case Mode::SingleCot: return "SINGLE_COT";
        case Mode::CotSc: return "COT_SC";
        case Mode::Reflection: return "REFLECTION";
    }
    return "?";
}

std::string_view to_string(TaskKind task) {
    switch (task) {
        case TaskKind::Arithmetic: return "Arithmetic";
        case TaskKind::GSM8K: return "GSM8K";
        case TaskKind::MMLU: return "MMLU";
        case TaskKind::MATH: return "MATH";
    }
    return "?";
}

std::string_view to_string(Phase phase) {
    switch (phase) {
        case Phase::InitialThinking: return "initial";
        case Phase::IntraGroup: return "intra";
        case Phase::InterGroup: return "inter";
    }
    return "?";
}

Mode parse_mode(std::string_view text) {
    for (Mode m : {Mode::GD, Mode::MAD, Mode::MadForget, Mode::MadGroup, Mode::SingleCot,
                   Mode::CotSc, Mode::Reflection}) {
        if (to_string(m) == text) return m;
    }
    if (text == "COT") return Mode::SingleCot;
    throw ConfigError("mode: unknown value '" + std::string(text) + "'");
}

TaskKind parse_task(std::string_view text) {
    for (TaskKind t : {TaskKind::Arithmetic, TaskKind::GSM8K, TaskKind::MMLU, TaskKind::MATH}) {
        if (to_string(t) == text) return t;
    }
    throw ConfigError("task: unknown value '" + std::string(text) + "'");
}

void DebateConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (agents < 1) fail("agents: must be >= 1, got " + std::to_string(agents));
    if (total_rounds < 1) fail("rounds: must be >= 1, got " + std::to_string(total_rounds));
    if (intra_rounds < 1) fail("intra_rounds: must be >= 1, got " + std::to_string(intra_rounds));
    if (repetitions < 1) fail("repetitions: must be >= 1, got " + std::to_string(repetitions));
    if (reflection_trials < 0) fail("reflection_trials: must be >= 0");
    if (grouped()) {
        if (group_sizes.empty()) fail("group_sizes: must list at least one group");
        for (int size : group_sizes)
            if (size < 1) fail("group_sizes: every group needs >= 1 agent, got " + std::to_string(size));
        int sum = std::accumulate(group_sizes.begin(), group_sizes.end(), 0);
        if (sum != agents)
            fail("group_sizes: sizes sum to " + std::to_string(sum) + " but agents = " +
                 std::to_string(agents));
        if (intra_rounds > total_rounds)
            fail("intra_rounds: " + std::to_string(intra_rounds) + " exceeds rounds " +
                 std::to_string(total_rounds));
    }
    if ((mode == Mode::SingleCot || mode == Mode::Reflection) && agents != 1)
        fail("agents: mode " + std::string(to_string(mode)) + " runs a single agent, got " +
             std::to_string(agents));
}

std::size_t GroupAssignment::group_of(AgentId agent) const {
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (std::binary_search(groups[g].begin(), groups[g].end(), agent)) return g;
    }
    throw std::out_of_range("agent " + std::to_string(agent) + " is in no group");
}

int DebateSchedule::last_round_of(int stage) const {
    return std::min(stage * intra_rounds, total_rounds());
}

std::string normalize_answer(std::string_view raw) {
    std::string text = collapse_whitespace(raw);
    if (auto number = canonical_number(text)) return *number;
    if (text.size() == 1 && text[0] >= 'a' && text[0] <= 'z')
        text[0] = static_cast<char>(text[0] - 'a' + 'A');
    return text;
}

CanonicalAnswer make_answer(std::string_view raw) {
    return CanonicalAnswer{std::string(raw), normalize_answer(raw)};
}

CanonicalAnswer unparseable_answer(std::string_view raw) {
    return CanonicalAnswer{std::string(raw), std::string(kUnparseable)};
}

std::vector<std::string> extract_all_answers(std::string_view text, TaskKind task) {
    switch (task) {
        case TaskKind::GSM8K:
        case TaskKind::MATH: return boxed_contents(text);
        case TaskKind::MMLU: return choice_letters(text);
        case TaskKind::Arithmetic: return numerals(text);
    }
    return {};
}

CanonicalAnswer extract_answer(std::string_view response, TaskKind task) {
    auto found = extract_all_answers(response, task);
    if (!found.empty()) {
        std::string value = normalize_answer(found.back());
        if (value.empty()) return unparseable_answer(response);
        return CanonicalAnswer{std::string(response), std::move(value)};
    }
    // A bare single-token response is its own answer; this makes extraction
    // a fixed point on already-extracted values.
    std::string_view bare = trim(response);
    if (!bare.empty() && std::none_of(bare.begin(), bare.end(), is_space)) {
        if (bare == kUnparseable) return unparseable_answer(response);
        std::string value = normalize_answer(bare);
        bool acceptable = true;
        if (task == TaskKind::MMLU) acceptable = value.size() == 1 && value[0] >= 'A' && value[0] <= 'D';
        if (task == TaskKind::Arithmetic) acceptable = canonical_number(value).has_value();
        if (acceptable) return CanonicalAnswer{std::string(response), std::move(value)};
    }
    return unparseable_answer(response);
}

CanonicalAnswer majority_vote(const std::vector<CanonicalAnswer>& answers) {
    if (answers.empty()) throw VoteError("majority_vote: no answers to vote on");
    struct Tally {
        int count = 0;
        std::string raw;
    };
    std::map<std::string, Tally> tally;  // ordered: first max is the lexicographic minimum
    for (const auto& answer : answers) {
        auto& entry = tally[answer.value];
        if (entry.count == 0 || answer.raw < entry.raw) entry.raw = answer.raw;
        ++entry.count;
    }
    auto best = tally.begin();
    for (auto it = tally.begin(); it != tally.end(); ++it)
        if (it->second.count > best->second.count) best = it;
    return CanonicalAnswer{best->second.raw, best->first};
}

SeededRng::SeededRng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t SeededRng::next() { return engine_(); }

std::uint64_t SeededRng::uniform(std::uint64_t bound) {
    if (bound == ~std::uint64_t{0}) return next();
    const std::uint64_t range = bound + 1;
    // Values below 2^64 mod range would bias the modulo; redraw them.
    const std::uint64_t threshold = (0 - range) % range;
    std::uint64_t r;
    do {
        r = next();
    } while (r < threshold);
    return r % range;
}

double SeededRng::unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::vector<AgentId> seeded_permutation(int count, std::uint64_t seed) {
    std::vector<AgentId> order(static_cast<std::size_t>(std::max(count, 0)));
    std::iota(order.begin(), order.end(), 0);
    SeededRng rng(seed);
    for (int i = count - 1; i > 0; --i) {
        auto j = static_cast<std::size_t>(rng.uniform(static_cast<std::uint64_t>(i)));
        std::swap(order[static_cast<std::size_t>(i)], order[j]);
    }
    return order;
}

GroupAssignment partition_agents(int agents, const std::vector<int>& group_sizes,
                                 std::uint64_t seed) {
    int sum = 0;
    for (int size : group_sizes) {
        if (size < 1)
            throw ConfigError("group_sizes: every group needs >= 1 agent, got " + std::to_string(size));
        sum += size;
    }
    if (group_sizes.empty() || sum != agents)
        throw ConfigError("group_sizes: sizes sum to " + std::to_string(sum) + " but agents = " +
                          std::to_string(agents));

    auto order = seeded_permutation(agents, seed);
    GroupAssignment out;
    std::size_t next = 0;
    for (int size : group_sizes) {
        std::vector<AgentId> group(order.begin() + static_cast<std::ptrdiff_t>(next),
                                   order.begin() + static_cast<std::ptrdiff_t>(next + size));
        std::sort(group.begin(), group.end());
        out.groups.push_back(std::move(group));
        next += static_cast<std::size_t>(size);
    }
    return out;
}

DebateSchedule build_schedule(int total_rounds, int intra_rounds) {
    if (intra_rounds < 1 || total_rounds < 1 || intra_rounds > total_rounds)
        throw ConfigError("schedule: need 1 <= intra_rounds (" + std::to_string(intra_rounds) +
                          ") <= rounds (" + std::to_string(total_rounds) + ")");
    DebateSchedule schedule;
    schedule.intra_rounds = intra_rounds;
    for (int t = 1; t <= total_rounds; ++t) {
        int s = (t - 1) / intra_rounds + 1;
        Phase phase = Phase::IntraGroup;
        if (t == 1) phase = Phase::InitialThinking;
        else if (t == (s - 1) * intra_rounds + 1) phase = Phase::InterGroup;
        schedule.phases.push_back({t, s, phase});
    }
    return schedule;
}

std::vector<int> even_group_sizes(int agents, int groups) {
    if (groups < 1 || groups > agents)
        throw ConfigError("groups: need 1 <= groups (" + std::to_string(groups) + ") <= agents (" +
                          std::to_string(agents) + ")");
    std::vector<int> sizes(static_cast<std::size_t>(groups), agents / groups);
    for (int i = 0; i < agents % groups; ++i) ++sizes[static_cast<std::size_t>(i)];
    return sizes;
}

}  // namespace gdebate
