#include "ngpbo/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "ngpbo/rng.hpp"

namespace ngpbo {

using nlohmann::json;

namespace {

struct Group {
    std::string name;
    std::vector<const BoRun*> runs;
};

std::vector<Group> group_by_strategy(const std::vector<BoRun>& runs) {
    std::vector<Group> groups;
    for (const auto& r : runs) {
        auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) { return g.name == r.strategy; });
        if (it == groups.end()) {
            groups.push_back(Group{r.strategy, {}});
            it = groups.end() - 1;
        }
        it->runs.push_back(&r);
    }
    return groups;
}

std::string sanitize(const std::string& s) {
    std::string out = s;
    for (char& c : out)
        if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
    return out;
}

} // namespace

std::vector<StrategySummary> summarize_runs(const std::vector<BoRun>& runs, int budget) {
    std::vector<StrategySummary> rows;
    for (const auto& g : group_by_strategy(runs)) {
        StrategySummary row;
        row.name = g.name;
        row.runs = static_cast<int>(g.runs.size());

        double sum = 0.0;
        std::vector<double> evals;
        evals.reserve(g.runs.size());
        for (const BoRun* r : g.runs) {
            const double e = r->trace.evals_to_max ? static_cast<double>(*r->trace.evals_to_max)
                                                   : static_cast<double>(budget + 1);
            evals.push_back(e);
            sum += e;
        }
        row.mean_evals = sum / evals.size();
        if (evals.size() > 1) {
            double ss = 0.0;
            for (double e : evals) ss += (e - row.mean_evals) * (e - row.mean_evals);
            row.stderr_evals = std::sqrt(ss / (evals.size() - 1)) / std::sqrt(static_cast<double>(evals.size()));
        }

        row.mean_regret.assign(budget, 0.0);
        for (const BoRun* r : g.runs) {
            const auto& best = r->trace.best_so_far;
            for (int i = 0; i < budget; ++i) {
                const std::size_t k = std::min<std::size_t>(i, best.size() - 1);
                row.mean_regret[i] += (r->true_max - best[k]) / g.runs.size();
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

json report_to_json(const json& meta, const std::vector<BoRun>& runs, int budget) {
    json j;
    j["meta"] = meta;
    json jruns = json::array();
    for (const auto& r : runs) {
        json jr;
        jr["strategy"] = r.strategy;
        jr["task"] = r.task_id;
        jr["seed"] = r.seed;
        jr["true_max"] = r.true_max;
        json iters = json::array();
        for (std::size_t i = 0; i < r.trace.queried_indices.size(); ++i)
            iters.push_back(json{{"iter", i},
                                 {"index", r.trace.queried_indices[i]},
                                 {"y", r.trace.observed_values[i]},
                                 {"best", r.trace.best_so_far[i]}});
        jr["iters"] = std::move(iters);
        jruns.push_back(std::move(jr));
    }
    j["runs"] = std::move(jruns);

    json summary = json::array();
    for (const auto& row : summarize_runs(runs, budget)) {
        summary.push_back(json{{"strategy", row.name},
                               {"mean_evals_to_max", row.mean_evals},
                               {"stderr", row.stderr_evals},
                               {"runs", row.runs},
                               {"mean_regret", row.mean_regret}});
    }
    j["summary"] = std::move(summary);
    return j;
}

std::vector<BoRun> runs_from_report(const json& report) {
    std::vector<BoRun> runs;
    for (const auto& jr : report.at("runs")) {
        BoRun r;
        r.strategy = jr.at("strategy").get<std::string>();
        r.task_id = jr.at("task").get<std::string>();
        r.seed = jr.at("seed").get<std::uint64_t>();
        r.true_max = jr.at("true_max").get<double>();
        for (const auto& it : jr.at("iters")) {
            r.trace.queried_indices.push_back(it.at("index").get<int>());
            r.trace.observed_values.push_back(it.at("y").get<double>());
            r.trace.best_so_far.push_back(it.at("best").get<double>());
            if (!r.trace.evals_to_max && it.at("y").get<double>() >= r.true_max)
                r.trace.evals_to_max = static_cast<int>(r.trace.queried_indices.size());
        }
        runs.push_back(std::move(r));
    }
    return runs;
}

json merge_reports(const std::vector<json>& reports) {
    if (reports.empty()) throw ConfigError("merge_reports: no reports");
    const json& first_meta = reports.front().at("meta");
    std::vector<BoRun> all;
    for (const auto& rep : reports) {
        const json& meta = rep.at("meta");
        if (meta.at("dataset_digest") != first_meta.at("dataset_digest"))
            throw ConfigError("merge_reports: dataset digests differ");
        if (meta.at("budget") != first_meta.at("budget"))
            throw ConfigError("merge_reports: budgets differ");
        auto runs = runs_from_report(rep);
        all.insert(all.end(), runs.begin(), runs.end());
    }
    json meta = first_meta;
    meta["merged_reports"] = reports.size();
    return report_to_json(meta, all, first_meta.at("budget").get<int>());
}

void write_table_csv(const std::vector<StrategySummary>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << "strategy,mean_evals_to_max,stderr,runs\n";
    out.precision(17);
    for (const auto& r : rows) out << r.name << ',' << r.mean_evals << ',' << r.stderr_evals << ',' << r.runs << '\n';
}

void write_regret_csv(const std::vector<StrategySummary>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << "strategy,iter,mean_regret\n";
    out.precision(17);
    for (const auto& r : rows)
        for (std::size_t i = 0; i < r.mean_regret.size(); ++i)
            out << r.name << ',' << i << ',' << r.mean_regret[i] << '\n';
}

std::string format_table_text(const std::vector<StrategySummary>& rows) {
    std::size_t width = 8;
    for (const auto& r : rows) width = std::max(width, r.name.size());
    std::ostringstream os;
    os << std::left << std::setw(static_cast<int>(width) + 2) << "Strategy" << std::right
       << std::setw(10) << "Mean" << std::setw(10) << "StdErr" << std::setw(8) << "Runs" << '\n';
    os << std::fixed << std::setprecision(2);
    for (const auto& r : rows)
        os << std::left << std::setw(static_cast<int>(width) + 2) << r.name << std::right
           << std::setw(10) << r.mean_evals << std::setw(10) << r.stderr_evals << std::setw(8) << r.runs << '\n';
    return os.str();
}

void save_trace_jsonl(const BoTrace& trace, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    for (std::size_t i = 0; i < trace.queried_indices.size(); ++i) {
        out << json{{"iter", i},
                    {"index", trace.queried_indices[i]},
                    {"y", trace.observed_values[i]},
                    {"best", trace.best_so_far[i]}}
                   .dump()
            << '\n';
    }
}

std::optional<BoTrace> load_trace_jsonl(const std::string& path, int expected_len, double true_max) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    BoTrace trace;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
            trace.queried_indices.push_back(j.at("index").get<int>());
            trace.observed_values.push_back(j.at("y").get<double>());
            trace.best_so_far.push_back(j.at("best").get<double>());
        } catch (const json::exception&) {
            return std::nullopt;
        }
        if (!trace.evals_to_max && trace.observed_values.back() >= true_max)
            trace.evals_to_max = static_cast<int>(trace.observed_values.size());
    }
    if (static_cast<int>(trace.queried_indices.size()) != expected_len) return std::nullopt;
    return trace;
}

namespace {

int worker_count_from_env() {
    const char* env = std::getenv("NGPBO_WORKERS");
    if (!env) return 1;
    const int n = std::atoi(env);
    return n >= 1 ? n : 1;
}

} // namespace

json run_benchmark(const BenchmarkInputs& inputs) {
    if (!inputs.dataset || !inputs.split) throw ConfigError("run_benchmark: missing dataset or split");
    if (inputs.strategies.empty()) throw ConfigError("run_benchmark: no strategies");
    if (inputs.seeds.empty()) throw ConfigError("run_benchmark: no seeds");
    if (inputs.split->target.empty()) throw ConfigError("run_benchmark: no target tasks");

    const bool resume = !inputs.workdir.empty();
    if (resume) std::filesystem::create_directories(inputs.workdir);

    struct Cell {
        const Strategy* strategy;
        const Task* task;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (const auto& [strategy, ck_digest] : inputs.strategies) {
        for (const auto& task : inputs.split->target) {
            if (inputs.budget > task.n())
                throw ConfigError("run_benchmark: budget " + std::to_string(inputs.budget) +
                                  " exceeds pool size " + std::to_string(task.n()) + " of task '" +
                                  task.id + "'");
            for (std::uint64_t seed : inputs.seeds) cells.push_back(Cell{&strategy, &task, seed});
        }
    }

    // Cells are independent; the indexed result vector makes the output
    // identical for any worker count.
    std::vector<BoRun> runs(cells.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto work = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            try {
                const Cell& cell = cells[i];
                const CandidatePool pool = CandidatePool::from_task(*cell.task);
                const double true_max = pool.y_true.maxCoeff();
                BoRun run;
                run.strategy = cell.strategy->name;
                run.task_id = cell.task->id;
                run.seed = cell.seed;
                run.true_max = true_max;

                std::string cell_path;
                if (resume) {
                    cell_path = inputs.workdir + "/" + sanitize(cell.strategy->name) + "__" +
                                sanitize(cell.task->id) + "__seed" + std::to_string(cell.seed) + ".jsonl";
                    if (auto cached = load_trace_jsonl(cell_path, inputs.budget, true_max)) {
                        run.trace = std::move(*cached);
                        runs[i] = std::move(run);
                        continue;
                    }
                }
                const std::uint64_t cell_seed =
                    mix_seed(cell.seed, fnv1a64(cell.strategy->name + "|" + cell.task->id));
                run.trace = run_bo(*cell.strategy, pool, inputs.budget, cell_seed);
                if (resume) save_trace_jsonl(run.trace, cell_path);
                runs[i] = std::move(run);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(cells.size());
                return;
            }
        }
    };

    const int workers = std::min<int>(worker_count_from_env(), static_cast<int>(cells.size()));
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool_threads;
        for (int w = 0; w < workers; ++w) pool_threads.emplace_back(work);
        for (auto& t : pool_threads) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    json strategies_meta = json::array();
    for (const auto& [strategy, ck_digest] : inputs.strategies)
        strategies_meta.push_back(json{{"name", strategy.name}, {"checkpoint_digest", ck_digest}});
    json meta;
    meta["dataset_digest"] = inputs.dataset_digest;
    meta["split"] = {{"source", inputs.split_spec.n_source},
                     {"validation", inputs.split_spec.n_validation},
                     {"target", inputs.split_spec.n_target},
                     {"seed", inputs.split_spec.seed}};
    meta["budget"] = inputs.budget;
    meta["seeds"] = inputs.seeds;
    meta["strategies"] = std::move(strategies_meta);
    return report_to_json(meta, runs, inputs.budget);
}

} // namespace ngpbo
