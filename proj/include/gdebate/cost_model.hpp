#ifndef GDEBATE_COST_MODEL_HPP
#define GDEBATE_COST_MODEL_HPP

#include <cstdint>
#include <vector>

namespace gdebate {

/// Analytical token-cost inputs. Every response costs `output` tokens and
/// every summary `summary` tokens; `question` tokens are re-sent with each
/// response call. `group_sizes` and `intra_rounds` apply to GroupDebate only.
struct CostParams {
    int agents = 1;
    std::vector<int> group_sizes{1};
    int rounds = 1;
    int intra_rounds = 1;
    std::int64_t question = 0;
    std::int64_t output = 0;
    std::int64_t summary = 0;

    int group_count() const { return static_cast<int>(group_sizes.size()); }
    int stage_count() const { return (rounds + intra_rounds - 1) / intra_rounds; }
    /// The single constant C = max(output, summary) of the big-O bounds.
    std::int64_t c() const { return output > summary ? output : summary; }

    void validate(bool grouped) const;
};

struct RoundCost {
    int round;
    std::int64_t response;  // all response calls of the round
    std::int64_t summary;   // summary calls feeding this round, 0 if none
};

struct TokenBreakdown {
    std::vector<RoundCost> rounds;
    std::int64_t total = 0;

    std::int64_t summary_total() const;
    std::int64_t response_total() const { return total - summary_total(); }
};

/// Per-round MAD response cost via the cumulative recurrence
/// Token^t = Token^{t-1} + sum_i (Summary_i^{t-1} + Output_i^t).
std::vector<std::int64_t> mad_round_costs_recurrence(const CostParams& p);
/// Same costs from the closed per-round form
/// sum_i (sum_{t'<t} (Output + Summary) + Q + Output_i^t).
std::vector<std::int64_t> mad_round_costs_closed(const CostParams& p);

/// Summarized-MAD cost: per-agent summaries of the other M-1 outputs, full
/// history in every prompt.
TokenBreakdown mad_token_cost(const CostParams& p);

/// GroupDebate cost, exact for uneven group sizes.
TokenBreakdown gd_token_cost(const CostParams& p);

/// MTQ + 2 M^2 T o + (M^2 T + M T^2) m.
std::int64_t mad_cost_bound(const CostParams& p);

/// MTQ + (2 M^2 T / N) o + 2 M S N m. Derived for equal group sizes; with
/// uneven sizes it is evaluated at N = group count.
double gd_cost_bound(int agents, int groups, int rounds, int stages, std::int64_t question,
                     std::int64_t output, std::int64_t summary);
double gd_cost_bound(const CostParams& p);

struct GroupCountChoice {
    int n_star;       // argmin of gd_cost_bound over N in [1, M], ties to smaller N
    int n_heuristic;  // round(sqrt(M T o / (S m))), clamped to [1, M]
};

GroupCountChoice optimal_group_count(int agents, int rounds, int stages, std::int64_t output,
                                     std::int64_t summary);

}  // namespace gdebate

#endif  // GDEBATE_COST_MODEL_HPP
