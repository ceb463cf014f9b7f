#include "gdebate/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gdebate/core.hpp"

namespace gdebate {

void CostParams::validate(bool grouped) const {
    if (agents < 1) throw ConfigError("M: must be >= 1");
    if (rounds < 1) throw ConfigError("T: must be >= 1");
    if (question < 0 || output < 0 || summary < 0) throw ConfigError("Q, o, m: must be >= 0");
    if (!grouped) return;
    if (intra_rounds < 1 || intra_rounds > rounds)
        throw ConfigError("R: need 1 <= R (" + std::to_string(intra_rounds) + ") <= T (" +
                          std::to_string(rounds) + ")");
    if (group_sizes.empty()) throw ConfigError("group_sizes: must list at least one group");
    int sum = 0;
    for (int k : group_sizes) {
        if (k < 1) throw ConfigError("group_sizes: every group needs >= 1 agent");
        sum += k;
    }
    if (sum != agents)
        throw ConfigError("group_sizes: sizes sum to " + std::to_string(sum) + " but M = " +
                          std::to_string(agents));
}

std::int64_t TokenBreakdown::summary_total() const {
    std::int64_t sum = 0;
    for (const auto& r : rounds) sum += r.summary;
    return sum;
}

std::vector<std::int64_t> mad_round_costs_recurrence(const CostParams& p) {
    const std::int64_t M = p.agents;
    std::vector<std::int64_t> cost;
    cost.push_back(M * (p.question + p.output));
    for (int t = 2; t <= p.rounds; ++t) cost.push_back(cost.back() + M * (p.summary + p.output));
    return cost;
}

std::vector<std::int64_t> mad_round_costs_closed(const CostParams& p) {
    std::vector<std::int64_t> cost;
    for (int t = 1; t <= p.rounds; ++t) {
        std::int64_t per_agent = p.question + p.output;
        // Own prior outputs and the summaries handed back after each of them.
        for (int prior = 1; prior < t; ++prior) per_agent += p.output + p.summary;
        cost.push_back(p.agents * per_agent);
    }
    return cost;
}

TokenBreakdown mad_token_cost(const CostParams& p) {
    p.validate(false);
    const std::int64_t M = p.agents;
    const auto response = mad_round_costs_closed(p);
    TokenBreakdown out;
    for (int t = 1; t <= p.rounds; ++t) {
        // Each agent gets a summary of the other M-1 outputs of round t-1.
        std::int64_t summary = t == 1 ? 0 : M * ((M - 1) * p.output + p.summary);
        out.rounds.push_back({t, response[static_cast<std::size_t>(t - 1)], summary});
        out.total += response[static_cast<std::size_t>(t - 1)] + summary;
    }
    return out;
}

TokenBreakdown gd_token_cost(const CostParams& p) {
    p.validate(true);
    const std::int64_t M = p.agents;
    const std::int64_t N = p.group_count();
    const std::int64_t Q = p.question, o = p.output, m = p.summary;

    // An intra round: each member of a size-K group reads Q plus all K
    // previous outputs of its group (its own included) and writes o.
    std::int64_t intra = 0;
    std::int64_t summaries = 0;
    for (int k : p.group_sizes) {
        intra += k * (Q + k * o + o);
        summaries += k * o + m;
    }
    const std::int64_t inter = M * (Q + o + N * m + o);

    TokenBreakdown out;
    for (int t = 1; t <= p.rounds; ++t) {
        int s = (t - 1) / p.intra_rounds + 1;
        RoundCost round{t, 0, 0};
        if (t == 1) {
            round.response = M * (Q + o);
        } else if (t == (s - 1) * p.intra_rounds + 1) {
            round.summary = summaries;  // produced at the end of stage s-1
            round.response = inter;
        } else {
            round.response = intra;
        }
        out.rounds.push_back(round);
        out.total += round.response + round.summary;
    }
    return out;
}

std::int64_t mad_cost_bound(const CostParams& p) {
    const std::int64_t M = p.agents, T = p.rounds;
    return M * T * p.question + 2 * M * M * T * p.output + (M * M * T + M * T * T) * p.summary;
}

double gd_cost_bound(int agents, int groups, int rounds, int stages, std::int64_t question,
                     std::int64_t output, std::int64_t summary) {
    const double M = agents, N = groups, T = rounds, S = stages;
    return M * T * static_cast<double>(question) + 2.0 * M * M * T / N * static_cast<double>(output) +
           2.0 * M * S * N * static_cast<double>(summary);
}

double gd_cost_bound(const CostParams& p) {
    return gd_cost_bound(p.agents, p.group_count(), p.rounds, p.stage_count(), p.question, p.output,
                         p.summary);
}

GroupCountChoice optimal_group_count(int agents, int rounds, int stages, std::int64_t output,
                                     std::int64_t summary) {
    if (agents < 1 || rounds < 1 || stages < 1)
        throw ConfigError("optimal_group_count: M, T, S must be >= 1");
    // The N-dependent part of the bound is (2 M^2 T o + 2 M S m N^2) / N;
    // compare those fractions exactly so ties resolve to the smaller N.
    const __int128 M = agents, T = rounds, S = stages;
    auto numerator = [&](__int128 n) { return 2 * M * M * T * output + 2 * M * S * summary * n * n; };
    GroupCountChoice out{1, 1};
    __int128 best_num = numerator(1);
    __int128 best_den = 1;
    for (int n = 2; n <= agents; ++n) {
        __int128 num = numerator(n);
        if (num * best_den < best_num * n) {
            best_num = num;
            best_den = n;
            out.n_star = n;
        }
    }
    if (summary == 0) {
        out.n_heuristic = agents;
    } else {
        double ideal = std::sqrt(static_cast<double>(agents) * rounds * static_cast<double>(output) /
                                 (static_cast<double>(stages) * static_cast<double>(summary)));
        out.n_heuristic = std::clamp(static_cast<int>(std::lround(ideal)), 1, agents);
    }
    return out;
}

}  // namespace gdebate
