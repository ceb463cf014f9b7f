#include <doctest.h>

#include <atomic>
#include <tuple>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gdebate/harness.hpp"

using namespace gdebate;

namespace {

std::string csv(const ExperimentReport& report) {
    std::ostringstream out;
    write_report_csv(out, report);
    return out.str();
}

std::string error_of(const std::string& config_json) {
    try {
        parse_experiment(config_json);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

// Mock that counts calls and can fail on a chosen call or agent.
class CountingBackend final : public AgentBackend {
public:
    int fail_at_call = -1;
    int fail_for_agent = -1;
    std::atomic<int> calls{0};

    Generation generate(std::span<const Message> context, const CallInfo& call) override {
        int n = calls++;
        if (n == fail_at_call || (fail_for_agent >= 0 && call.agent == fail_for_agent))
            throw BackendError("stub failure", 500);
        return mock_generate(FixedLength{}, context, call);
    }
};

const char* kFillerGd = R"({
  "mode": "GD", "agents": 4, "group_sizes": [2, 2], "rounds": 4, "intra_rounds": 2,
  "templates": "bare",
  "task": {"source": "filler", "question_tokens": 10},
  "backend": {"kind": "mock", "policy": "fixed_length", "output_tokens": 5, "summary_tokens": 6}
})";

}  // namespace

TEST_CASE("report rows reproduce call counts") {
    auto gd = run_experiment(parse_experiment(
        R"({"mode": "GD", "agents": 5, "group_sizes": [3, 2], "rounds": 3, "intra_rounds": 2})"));
    REQUIRE(gd.rows.size() == 1);
    CHECK(gd.rows[0].api_calls == 17);
    CHECK(gd.rows[0].groups == 2);
    CHECK(gd.rows[0].stages == 2);
    auto mad = run_experiment(parse_experiment(R"({"mode": "MAD", "agents": 5, "rounds": 3})"));
    REQUIRE(mad.rows.size() == 1);
    CHECK(mad.rows[0].api_calls == 25);
}

TEST_CASE("report totals follow the ledger") {
    auto report = run_experiment(parse_experiment(kFillerGd));
    REQUIRE(report.rows.size() == 1);
    const auto& row = report.rows[0];
    CHECK(row.total_tokens == 420);
    CHECK(row.prompt_tokens + row.completion_tokens == row.total_tokens);
    CHECK(row.wall_ms == 0);
    CHECK_FALSE(row.estimated);

    // Multi-problem repetitions sum their per-problem ledgers.
    auto config = parse_experiment(R"({"mode": "GD", "agents": 4, "groups": 2, "rounds": 3,
        "intra_rounds": 2, "seed": 5, "repetitions": 2, "task": {"count": 3, "seed": 9}})");
    auto multi = run_experiment(config);
    REQUIRE(multi.rows.size() == 2);
    MockBackend mock(FixedLength{});
    for (int rep = 0; rep < 2; ++rep) {
        auto problems = problems_for(config.task, rep);
        std::int64_t total = 0;
        for (std::size_t i = 0; i < problems.size(); ++i) {
            DebateConfig run = config.debate;
            run.seed = mix_seed(mix_seed(config.debate.seed, static_cast<std::uint64_t>(rep)), i);
            total += run_mode(run, problems[i], mock).ledger.grand_total();
        }
        CHECK(multi.rows[static_cast<std::size_t>(rep)].total_tokens == total);
        CHECK(multi.rows[static_cast<std::size_t>(rep)].repetition == rep + 1);
    }
    REQUIRE(multi.summaries.size() == 1);
    CHECK(multi.summaries[0].status == RunStatus::Complete);
    CHECK(multi.summaries[0].completed == 2);
}

TEST_CASE("reports are byte-identical across runs") {
    const char* config = R"({"mode": "GD", "agents": 6, "groups": 3, "rounds": 4, "intra_rounds": 2,
        "seed": 17, "repetitions": 3, "parallelism": 3, "task": {"count": 4},
        "backend": {"kind": "mock", "policy": "seeded_stochastic", "correctness": 0.5}})";
    auto a = run_experiment(parse_experiment(config));
    auto b = run_experiment(parse_experiment(config));
    CHECK(csv(a) == csv(b));
    std::ostringstream ja, jb;
    write_report_json(ja, a);
    write_report_json(jb, b);
    CHECK(ja.str() == jb.str());
}

TEST_CASE("csv header is the documented column list") {
    auto text = csv(run_experiment(parse_experiment(kFillerGd)));
    CHECK(text.substr(0, text.find('\n')) ==
          "dataset,mode,M,N,T,R,S,seed,repetition,accuracy,prompt_tokens,completion_tokens,total_tokens,"
          "api_calls,wall_ms,estimated_usage_flag");
    CHECK(text.find("Arithmetic,GD,4,2,4,2,2,0,1,") != std::string::npos);
}

TEST_CASE("json and summary writers") {
    auto report = run_experiment(parse_experiment(kFillerGd));
    std::ostringstream j;
    write_report_json(j, report);
    auto doc = nlohmann::json::parse(j.str());
    CHECK(doc["partial"] == false);
    CHECK(doc["rows"][0]["total_tokens"] == 420);
    CHECK(doc["summary"][0]["status"] == "complete");

    std::ostringstream s;
    write_summary_csv(s, report);
    CHECK(s.str().find("complete") != std::string::npos);
    CHECK(s.str().find("420.000000,0.000000") != std::string::npos);
}

TEST_CASE("config errors name the field") {
    CHECK(error_of(R"({"mode": "GD", "agents": 5, "group_sizes": [3, 3]})").find("group_sizes") !=
          std::string::npos);
    CHECK(error_of(R"({"agent": 5})").find("agent") != std::string::npos);
    CHECK(error_of(R"({"backend": {"kind": "http", "model": "m"}})").find("backend.endpoint") !=
          std::string::npos);
    CHECK(error_of(R"({"backend": {"kind": "mock", "summary_tokens": 99}})").find("summary_tokens") !=
          std::string::npos);
    CHECK(error_of(R"({"task": {"kind": "GSM8K"}})").find("task.source") != std::string::npos);
    CHECK(error_of(R"({"task": {"source": "dataset"}})").find("task.path") != std::string::npos);
    CHECK(error_of(R"({"rounds": "three"})").find("rounds") != std::string::npos);
    CHECK(error_of(R"({"mode": "GD", "agents": 4, "groups": 2, "group_sizes": [2, 2]})").find("groups") !=
          std::string::npos);
    CHECK(error_of("{not json").find("config") != std::string::npos);
    CHECK(error_of(R"({"mode": "GD", "agents": 4, "groups": 2, "rounds": 2})").empty());
}

TEST_CASE("backend failure yields a partial report") {
    CountingBackend backend;
    backend.fail_at_call = 20;  // inside the second repetition
    auto config = parse_experiment(kFillerGd);
    config.debate.repetitions = 3;
    auto report = run_experiment(config, backend);
    CHECK(report.rows.size() == 1);
    CHECK(report.partial());
    REQUIRE(report.summaries.size() == 1);
    CHECK(report.summaries[0].status == RunStatus::Partial);
    CHECK(report.summaries[0].completed == 1);
    CHECK(report.summaries[0].requested == 3);
    CHECK(report.summaries[0].error.find("repetition 2") != std::string::npos);

    CountingBackend always;
    always.fail_at_call = 0;
    auto failed = run_experiment(config, always);
    CHECK(failed.rows.empty());
    CHECK(failed.summaries[0].status == RunStatus::Failed);
}

TEST_CASE("dataset task source slices per repetition") {
    auto dir = std::filesystem::temp_directory_path() / "gdebate_harness_test";
    std::filesystem::create_directories(dir);
    auto path = dir / "arith.jsonl";
    {
        std::ofstream out(path);
        write_dataset(out, gen_arithmetic(1, 4));
    }
    TaskSpec task;
    task.source = TaskSpec::Source::Dataset;
    task.path = path.string();
    task.count = 2;
    CHECK(problems_for(task, 0).front().id == "arith-1-0");
    CHECK(problems_for(task, 1).front().id == "arith-1-2");
    CHECK_THROWS_AS(problems_for(task, 2), DatasetError);
    task.count = 0;
    CHECK(problems_for(task, 5).size() == 4);
    std::filesystem::remove_all(dir);
}

TEST_CASE("sweep over group strategies at eight agents") {
    auto spec = parse_sweep(R"({
      "base": {"mode": "GD", "agents": 8, "rounds": 4, "intra_rounds": 2, "templates": "bare",
               "task": {"source": "filler", "question_tokens": 10}},
      "axes": {"group_strategies": [[4, 4], [2, 2, 2, 2]]}
    })");
    auto report = sweep_grid(spec);
    REQUIRE(report.rows.size() == 2);
    CHECK(report.rows[0].groups == 2);
    CHECK(report.rows[1].groups == 4);
    CHECK(report.rows[1].total_tokens < report.rows[0].total_tokens);
    CHECK(report.rows[0].total_tokens == gd_token_cost({8, {4, 4}, 4, 2, 10, 5, 6}).total);
    CHECK(report.rows[1].total_tokens == gd_token_cost({8, {2, 2, 2, 2}, 4, 2, 10, 5, 6}).total);
}

TEST_CASE("sweep over intra rounds lowers cost as R grows") {
    auto spec = parse_sweep(R"({
      "base": {"mode": "GD", "agents": 4, "groups": 2, "rounds": 4, "templates": "bare",
               "task": {"source": "filler", "question_tokens": 10}},
      "axes": {"intra_rounds": [1, 2, 4]},
      "parallel_cells": 3
    })");
    auto report = sweep_grid(spec);
    REQUIRE(report.rows.size() == 3);
    CHECK(report.rows[0].intra_rounds == 1);
    CHECK(report.rows[2].intra_rounds == 4);
    CHECK(report.rows[0].total_tokens > report.rows[1].total_tokens);
    CHECK(report.rows[1].total_tokens > report.rows[2].total_tokens);
}

TEST_CASE("sweep order is lexicographic over axes") {
    auto spec = parse_sweep(R"({
      "base": {"mode": "GD", "agents": 4, "groups": 2, "rounds": 2},
      "axes": {"mode": ["GD", "MAD"], "agents": [4, 6], "group_strategies": [{"groups": 1}, {"groups": 2}],
               "rounds": [2, 3], "seeds": [1, 2]}
    })");
    auto cells = spec.cells();
    // GD: 2 agents x 2 strategies x 2 rounds x 2 seeds; MAD collapses strategies.
    REQUIRE(cells.size() == 16 + 8);
    CHECK(cells[0].debate.mode == Mode::GD);
    CHECK(cells[0].debate.agents == 4);
    CHECK(cells[0].debate.group_sizes == std::vector<int>{4});
    CHECK(cells[1].debate.seed == 2);
    CHECK(cells[2].debate.total_rounds == 3);
    CHECK(cells[4].debate.group_sizes == std::vector<int>{2, 2});
    CHECK(cells[8].debate.agents == 6);
    CHECK(cells[16].debate.mode == Mode::MAD);
    auto a = sweep_grid(spec);
    auto b = sweep_grid(spec);
    CHECK(csv(a) == csv(b));
    CHECK(a.rows.size() == 24);
}

TEST_CASE("empty or invalid axes stop the sweep before any run") {
    CountingBackend backend;
    auto empty = parse_sweep(R"({"base": {"mode": "GD", "agents": 4, "groups": 2, "rounds": 2},
                                 "axes": {"seeds": []}})");
    CHECK_THROWS_AS(sweep_grid(empty, backend), ConfigError);
    auto invalid = parse_sweep(R"({"base": {"mode": "GD", "agents": 4, "groups": 2, "rounds": 4},
                                   "axes": {"intra_rounds": [2, 5]}})");
    CHECK_THROWS_AS(sweep_grid(invalid, backend), ConfigError);
    auto mismatch = parse_sweep(R"({"base": {"mode": "GD", "agents": 4, "groups": 2, "rounds": 2},
                                    "axes": {"agents": [4, 5], "group_strategies": [[2, 2]]}})");
    CHECK_THROWS_AS(sweep_grid(mismatch, backend), ConfigError);
    CHECK(backend.calls.load() == 0);
    CHECK_THROWS_AS(parse_sweep(R"({"axes": {}})"), ConfigError);
}

TEST_CASE("failed sweep cells are marked and the sweep continues") {
    CountingBackend backend;
    backend.fail_for_agent = 5;
    auto spec = parse_sweep(R"({"base": {"mode": "MAD", "rounds": 2, "agents": 4},
                                "axes": {"agents": [4, 6, 3]}})");
    auto report = sweep_grid(spec, backend);
    CHECK(report.partial());
    REQUIRE(report.summaries.size() == 3);
    CHECK(report.summaries[0].status == RunStatus::Complete);
    CHECK(report.summaries[1].status == RunStatus::Failed);
    CHECK(report.summaries[2].status == RunStatus::Complete);
    CHECK(report.rows.size() == 2);
}

TEST_CASE("cost table: GD below MAD for four to eight agents") {
    auto rows = cost_report(parse_cost_axes(R"({"M": [4, 5, 6, 7, 8], "N": 2, "T": 4, "R": 2})"));
    REQUIRE(rows.size() == 5);
    for (const auto& r : rows) {
        CHECK(r.gd_total < r.mad_total);
        CHECK(r.reduction > 0.0);
        CHECK(r.mad_bound >= r.mad_total);
    }
}

TEST_CASE("cost table: single agent, single round") {
    auto rows = cost_report(parse_cost_axes(R"({"M": 1, "N": 1, "T": 1, "R": 1, "Q": 10, "o": 5, "m": 6})"));
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].mad_total == 15);
    CHECK(rows[0].gd_total == 15);
}

TEST_CASE("cost table: N axis argmin matches the optimal group count") {
    for (auto [m, t, r] : {std::tuple{4, 4, 2}, {8, 6, 3}, {12, 8, 4}, {16, 12, 6}}) {
        CostAxes axes;
        axes.agents = {m};
        axes.groups.clear();
        for (int n = 1; n <= m; ++n) axes.groups.push_back(n);
        axes.rounds = {t};
        axes.intra_rounds = {r};
        axes.output = {1};
        axes.summary = {1};
        auto rows = cost_report(axes);
        REQUIRE(static_cast<int>(rows.size()) == m);
        std::size_t best = 0;
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (rows[i].gd_bound < rows[best].gd_bound) best = i;
        CHECK(rows[best].params.group_count() == rows[0].optimal.n_star);
    }
}

TEST_CASE("cost table csv and validation") {
    auto rows = cost_report(parse_cost_axes(R"({"M": 5, "group_sizes": [3, 2], "T": 3, "R": 2})"));
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].gd_total == 412);
    std::ostringstream out;
    write_cost_csv(out, rows);
    CHECK(out.str().find("5,2,3;2,3,2,2,10,5,6,") != std::string::npos);
    CHECK_THROWS_AS(parse_cost_axes(R"({"M": []})"), ConfigError);
    CHECK_THROWS_AS(parse_cost_axes(R"({"M": [4, 5], "group_sizes": [2, 2]})"), ConfigError);
    CHECK_THROWS_AS(cost_report(parse_cost_axes(R"({"M": 4, "T": 2, "R": 3})")), ConfigError);
    CHECK_THROWS_AS(parse_cost_axes(R"({"X": 1})"), ConfigError);
}
