#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ngpbo/bayesopt.hpp"
#include "ngpbo/benchmark.hpp"
#include "ngpbo/checkpoint.hpp"
#include "ngpbo/data.hpp"
#include "ngpbo/rng.hpp"
#include "ngpbo/training.hpp"

using nlohmann::json;
using namespace ngpbo;

namespace {

struct GenerateArgs {
    int tasks = 0;
    std::uint64_t seed = 0;
    int points = 500;
    std::string out;
};

struct TrainArgs {
    std::string data;
    int n_source = 0, n_val = 0, n_target = 0;
    std::uint64_t split_seed = 0;
    bool use_r = false, use_m = false, use_k = false;
    std::string kernel = "rbf";
    int hidden = 32;
    int batch = 32;
    double lr = 1e-2;
    int epochs = 500;
    int patience = 20;
    std::uint64_t seed = 0;
    bool center_y = false;
    std::string out;
    std::string history;
};

struct BenchmarkArgs {
    std::string data;
    int n_source = 0, n_val = 0, n_target = 0;
    std::uint64_t split_seed = 0;
    std::vector<std::string> strategies;
    int budget = 0;
    std::vector<std::uint64_t> seeds{0};
    std::string out;
    std::string table;
    std::string regret;
    std::string workdir;
};

struct ReportArgs {
    std::vector<std::string> inputs;
    std::string table;
    std::string regret;
};

int cmd_generate(const GenerateArgs& a) {
    const Dataset ds = generate_synthetic(a.tasks, a.seed, a.points);
    save_dataset(ds, a.out);
    std::cout << "wrote " << ds.tasks.size() << " tasks to " << a.out << "\n";
    return 0;
}

int cmd_train(const TrainArgs& a) {
    const Dataset ds = load_dataset(a.data);
    const SplitSpec spec{a.n_source, a.n_val, a.n_target, a.split_seed};
    const TaskSplit split = split_tasks(ds, spec);
    if (split.source.empty() || split.validation.empty())
        throw ConfigError("train: split must provide source and validation tasks");

    const NgpConfig config = NgpConfig::make(a.use_r, a.use_m, a.use_k, ds.meta.m, ds.meta.s, a.hidden,
                                             kernel_kind_from_string(a.kernel));
    TrainConfig tc;
    tc.batch_size = a.batch;
    tc.learning_rate = a.lr;
    tc.max_epochs = a.epochs;
    tc.patience = a.patience;
    tc.seed = a.seed;
    tc.center_y = a.center_y;

    const auto [model, history] = train(config, split.source, split.validation, tc);

    json meta;
    meta["variant"] = config.variant_name();
    meta["dataset_digest"] = file_digest(a.data);
    meta["split"] = {{"source", spec.n_source},
                     {"validation", spec.n_validation},
                     {"target", spec.n_target},
                     {"seed", spec.seed}};
    meta["train_seed"] = tc.seed;
    meta["epochs_run"] = history.epochs.size();
    meta["best_epoch"] = history.best_epoch;
    meta["best_val_lml_per_obs"] = history.epochs[history.best_epoch - 1].val_lml_per_obs;
    save_model(model, a.out, meta);
    if (!a.history.empty()) save_history_csv(history, a.history);

    std::cout << config.variant_name() << ": best epoch " << history.best_epoch << "/"
              << history.epochs.size() << ", val lml/obs "
              << history.epochs[history.best_epoch - 1].val_lml_per_obs << "\n";
    return 0;
}

// Strategy item grammar: ngp=<ck.json> | tgp=<ck.json> | gp | nn | nn-r | random.
std::pair<Strategy, std::string> parse_strategy(const std::string& item, const TaskSplit& split,
                                                std::uint64_t nn_seed) {
    const auto eq = item.find('=');
    const std::string name = item.substr(0, eq);
    const std::string path = eq == std::string::npos ? "" : item.substr(eq + 1);

    auto load_checkpoint = [&](const std::string& kind) {
        if (path.empty()) throw ConfigError("strategy '" + kind + "' needs a checkpoint: " + kind + "=<file>");
        std::ifstream probe(path);
        if (!probe) throw ConfigError("strategy '" + kind + "': checkpoint '" + path + "' not found");
        return std::make_shared<const NgpModel>(load_model(path));
    };

    if (name == "ngp") return {Strategy::ngp(load_checkpoint("ngp")), file_digest(path)};
    if (name == "tgp") return {Strategy::tgp(load_checkpoint("tgp")), file_digest(path)};
    if (name == "gp") return {Strategy::gp(), ""};
    if (name == "random") return {Strategy::random_search(), ""};
    if (name == "nn" || name == "nn-r") {
        if (split.source.empty() || split.validation.empty())
            throw ConfigError("strategy '" + name + "' needs source and validation tasks in the split");
        const bool use_r = name == "nn-r";
        auto net = std::make_shared<const MlpParams>(
            nn_baseline_fit(split.source, split.validation, use_r, mix_seed(nn_seed, fnv1a64(name))));
        return {use_r ? Strategy::nn_r(net) : Strategy::nn(net), ""};
    }
    throw ConfigError("unknown strategy '" + name + "' (expected ngp=, tgp=, gp, nn, nn-r, random)");
}

int cmd_benchmark(const BenchmarkArgs& a) {
    const Dataset ds = load_dataset(a.data);
    const SplitSpec spec{a.n_source, a.n_val, a.n_target, a.split_seed};
    const TaskSplit split = split_tasks(ds, spec);

    BenchmarkInputs in;
    in.dataset = &ds;
    in.dataset_digest = file_digest(a.data);
    in.split_spec = spec;
    in.split = &split;
    in.budget = a.budget;
    in.seeds = a.seeds;
    in.workdir = a.workdir;
    for (const auto& item : a.strategies)
        in.strategies.push_back(parse_strategy(item, split, a.seeds.front()));

    const json report = run_benchmark(in);
    {
        std::ofstream out(a.out, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open '" + a.out + "' for writing");
        out << report.dump(2) << '\n';
    }

    const auto runs = runs_from_report(report);
    const auto rows = summarize_runs(runs, a.budget);
    if (!a.table.empty()) write_table_csv(rows, a.table);
    if (!a.regret.empty()) write_regret_csv(rows, a.regret);
    std::cout << format_table_text(rows);
    return 0;
}

int cmd_report(const ReportArgs& a) {
    std::vector<json> reports;
    for (const auto& path : a.inputs) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open report '" + path + "'");
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw ConfigError("report '" + path + "': invalid JSON: " + e.what());
        }
        reports.push_back(std::move(j));
    }
    const json merged = merge_reports(reports);
    const auto runs = runs_from_report(merged);
    const int budget = merged.at("meta").at("budget").get<int>();
    const auto rows = summarize_runs(runs, budget);
    if (!a.table.empty()) write_table_csv(rows, a.table);
    if (!a.regret.empty()) write_regret_csv(rows, a.regret);
    std::cout << format_table_text(rows);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Transfer Bayesian optimization with neural mean/covariance GP surrogates"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* sc_gen = app.add_subcommand("generate", "Generate a synthetic benchmark dataset");
    sc_gen->add_option("--tasks", gen.tasks, "Number of tasks")->required();
    sc_gen->add_option("--seed", gen.seed, "Generator seed")->required();
    sc_gen->add_option("--points", gen.points, "Design points per task (default 500)");
    sc_gen->add_option("--out", gen.out, "Output dataset JSON")->required();

    TrainArgs tr;
    auto* sc_tr = app.add_subcommand("train", "Train a surrogate on the source tasks of a split");
    sc_tr->add_option("--data", tr.data, "Dataset JSON")->required();
    sc_tr->add_option("--source", tr.n_source, "Source task count")->required();
    sc_tr->add_option("--val", tr.n_val, "Validation task count")->required();
    sc_tr->add_option("--target", tr.n_target, "Target task count")->required();
    sc_tr->add_option("--split-seed", tr.split_seed, "Split seed");
    sc_tr->add_flag("--use-r", tr.use_r, "Condition networks on the task descriptor");
    sc_tr->add_flag("--use-m", tr.use_m, "Enable the neural mean function");
    sc_tr->add_flag("--use-k", tr.use_k, "Enable the neural covariance embedding");
    sc_tr->add_option("--kernel", tr.kernel, "Kernel: rbf|linear (default rbf)");
    sc_tr->add_option("--hidden", tr.hidden, "Hidden units (default 32)");
    sc_tr->add_option("--batch", tr.batch, "Task minibatch size (default 32)");
    sc_tr->add_option("--lr", tr.lr, "Adam learning rate (default 1e-2)");
    sc_tr->add_option("--epochs", tr.epochs, "Maximum epochs (default 500)");
    sc_tr->add_option("--patience", tr.patience, "Early-stopping patience (default 20)");
    sc_tr->add_option("--seed", tr.seed, "Training seed");
    sc_tr->add_flag("--center-y", tr.center_y, "Center each task's values before training");
    sc_tr->add_option("--out", tr.out, "Checkpoint output path")->required();
    sc_tr->add_option("--history", tr.history, "Training-history CSV path");

    BenchmarkArgs bm;
    auto* sc_bm = app.add_subcommand("benchmark", "Run BO strategies over the target tasks of a split");
    sc_bm->add_option("--data", bm.data, "Dataset JSON")->required();
    sc_bm->add_option("--source", bm.n_source, "Source task count")->required();
    sc_bm->add_option("--val", bm.n_val, "Validation task count")->required();
    sc_bm->add_option("--target", bm.n_target, "Target task count")->required();
    sc_bm->add_option("--split-seed", bm.split_seed, "Split seed");
    sc_bm->add_option("--strategies", bm.strategies,
                      "Comma list: ngp=<ck>, tgp=<ck>, gp, nn, nn-r, random")
        ->required()
        ->delimiter(',');
    sc_bm->add_option("--budget", bm.budget, "Evaluations per run")->required();
    sc_bm->add_option("--seeds", bm.seeds, "Comma list of run seeds (default 0)")->delimiter(',');
    sc_bm->add_option("--out", bm.out, "Report JSON output")->required();
    sc_bm->add_option("--table", bm.table, "Summary table CSV output");
    sc_bm->add_option("--regret", bm.regret, "Regret-curve CSV output");
    sc_bm->add_option("--workdir", bm.workdir, "Per-cell trace dir; completed cells are reused");

    ReportArgs rp;
    auto* sc_rp = app.add_subcommand("report", "Merge benchmark reports and print a summary table");
    sc_rp->add_option("--in", rp.inputs, "Report JSON files")->required()->delimiter(',');
    sc_rp->add_option("--table", rp.table, "Summary table CSV output");
    sc_rp->add_option("--regret", rp.regret, "Regret-curve CSV output");

    try {
        app.parse(argc, argv);
        if (sc_gen->parsed()) return cmd_generate(gen);
        if (sc_tr->parsed()) return cmd_train(tr);
        if (sc_bm->parsed()) return cmd_benchmark(bm);
        if (sc_rp->parsed()) return cmd_report(rp);
        return 2;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
