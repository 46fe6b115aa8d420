#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ngpbo/bayesopt.hpp"
#include "ngpbo/data.hpp"

namespace ngpbo {

/// One (strategy, target task, seed) cell of a benchmark sweep.
struct BoRun {
    std::string strategy;
    std::string task_id;
    std::uint64_t seed = 0;
    double true_max = 0.0;
    BoTrace trace;
};

/// Table-2-style row plus the per-iteration mean regret curve. Runs that
/// never reach the maximum count as budget + 1 evaluations.
struct StrategySummary {
    std::string name;
    double mean_evals = 0.0;
    double stderr_evals = 0.0; // sample stddev / sqrt(runs)
    int runs = 0;
    std::vector<double> mean_regret; // index = iterations completed - 1
};

std::vector<StrategySummary> summarize_runs(const std::vector<BoRun>& runs, int budget);

/// Report document: {"meta": ..., "runs": [...], "summary": [...]}.
nlohmann::json report_to_json(const nlohmann::json& meta, const std::vector<BoRun>& runs, int budget);
std::vector<BoRun> runs_from_report(const nlohmann::json& report);

/// Merges reports over the same dataset digest, budget and split; recomputes
/// pooled means / standard errors from the concatenated runs. Throws
/// ConfigError on incompatible reports.
nlohmann::json merge_reports(const std::vector<nlohmann::json>& reports);

void write_table_csv(const std::vector<StrategySummary>& rows, const std::string& path);
void write_regret_csv(const std::vector<StrategySummary>& rows, const std::string& path);
std::string format_table_text(const std::vector<StrategySummary>& rows);

/// One JSON object per line: {"iter": i, "index": idx, "y": v, "best": b}.
void save_trace_jsonl(const BoTrace& trace, const std::string& path);

/// Reloads a resumable cell; empty when the file is absent or incomplete.
std::optional<BoTrace> load_trace_jsonl(const std::string& path, int expected_len, double true_max);

struct BenchmarkInputs {
    const Dataset* dataset = nullptr;
    std::string dataset_digest;
    SplitSpec split_spec;
    const TaskSplit* split = nullptr;
    std::vector<std::pair<Strategy, std::string>> strategies; // strategy, checkpoint digest ("" if none)
    int budget = 0;
    std::vector<std::uint64_t> seeds;
    std::string workdir; // empty disables per-cell resume files
};

/// Runs every (strategy, target task, seed) cell and returns the report
/// document. Cells found complete in the workdir are reused.
nlohmann::json run_benchmark(const BenchmarkInputs& inputs);

} // namespace ngpbo
