#include "ngpbo/training.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>

#include "ngpbo/adam.hpp"
#include "ngpbo/rng.hpp"

namespace ngpbo {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void check_block_finite(const Eigen::VectorXd& g, const std::string& block, const std::string& where) {
    if (!g.allFinite())
        throw NumericError("non-finite gradient in " + block + " (" + where + ")");
}

// Sums LML gradients over a batch; returns the summed LML too.
double batch_gradient(const NgpModel& model, const std::vector<Task>& tasks,
                      const std::vector<int>& batch, Eigen::VectorXd& grad_out) {
    double lml_sum = 0.0;
    grad_out.setZero(model.param_count());
    for (int idx : batch) {
        const Task& t = tasks[idx];
        lml_sum += log_marginal_likelihood(model, t);
        const NgpGradient g = lml_gradient(model, t);
        if (model.config.use_mean_net) check_block_finite(g.mean.pack(), "mean net", "task '" + t.id + "'");
        if (model.config.use_embed_net) check_block_finite(g.embed.pack(), "embedding net", "task '" + t.id + "'");
        Eigen::Vector3d hyper(g.d_log_amplitude, g.d_log_lengthscale, g.d_log_noise);
        check_block_finite(hyper, "kernel/noise", "task '" + t.id + "'");
        grad_out += pack_gradient(model, g);
    }
    return lml_sum;
}

std::vector<Task> maybe_center(const std::vector<Task>& tasks, bool center) {
    if (!center) return tasks;
    std::vector<Task> out = tasks;
    for (auto& t : out) t.y.array() -= t.y.mean();
    return out;
}

struct InputScaler {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;
};

InputScaler fit_input_scaler(const NgpConfig& config, const std::vector<Task>& tasks) {
    const int d = config.input_dim();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(d);
    long n = 0;
    for (const auto& t : tasks) {
        const Eigen::MatrixXd u = task_inputs(config, t.x, t.r);
        sum += u.colwise().sum().transpose();
        sum_sq += u.array().square().colwise().sum().matrix().transpose();
        n += u.rows();
    }
    InputScaler s;
    s.mean = sum / static_cast<double>(n);
    Eigen::VectorXd var = sum_sq / static_cast<double>(n) - s.mean.array().square().matrix();
    s.std = var.cwiseMax(0.0).cwiseSqrt();
    for (Eigen::Index i = 0; i < s.std.size(); ++i)
        if (s.std(i) < 1e-12) s.std(i) = 1.0; // constant input dimension
    return s;
}

void standardize_tasks(const NgpConfig& config, const InputScaler& s, std::vector<Task>& tasks) {
    const int m = config.feature_dim;
    for (auto& t : tasks) {
        for (int j = 0; j < m; ++j) t.x.col(j) = (t.x.col(j).array() - s.mean(j)) / s.std(j);
        if (config.use_descriptor)
            for (int k = 0; k < config.descriptor_dim; ++k)
                t.r(k) = (t.r(k) - s.mean(m + k)) / s.std(m + k);
    }
}

} // namespace

double validation_score(const NgpModel& model, const std::vector<Task>& tasks) {
    if (tasks.empty()) throw ConfigError("validation_score: no tasks");
    double lml = 0.0;
    long n_obs = 0;
    for (const auto& t : tasks) {
        lml += log_marginal_likelihood(model, t);
        n_obs += t.n();
    }
    return lml / static_cast<double>(n_obs);
}

std::pair<NgpModel, TrainHistory> train(const NgpConfig& config, const std::vector<Task>& source_tasks,
                                        const std::vector<Task>& val_tasks, const TrainConfig& tc) {
    if (source_tasks.empty()) throw ConfigError("train: no source tasks");
    if (val_tasks.empty()) throw ConfigError("train: no validation tasks");
    for (const auto& t : source_tasks)
        if (t.n() < 2) throw ConfigError("train: task '" + t.id + "' has fewer than 2 observations");
    if (tc.batch_size < 1) throw ConfigError("train: batch_size must be positive");
    if (tc.max_epochs < 1) throw ConfigError("train: max_epochs must be positive");
    if (tc.patience < 1) throw ConfigError("train: patience must be positive");

    int batch_size = tc.batch_size;
    if (batch_size > static_cast<int>(source_tasks.size())) {
        batch_size = static_cast<int>(source_tasks.size());
        std::cerr << "train: batch size clamped to " << batch_size << " (source task count)\n";
    }

    std::vector<Task> src = maybe_center(source_tasks, tc.center_y);
    std::vector<Task> val = maybe_center(val_tasks, tc.center_y);

    // Networks train on standardized inputs; the scaler is folded back into
    // their first layers before returning, so the model consumes raw inputs.
    // Identity-embedding variants skip this: their kernel acts on the inputs
    // directly and a per-dimension rescale would change the model class.
    const bool standardize = config.use_embed_net;
    InputScaler scaler;
    if (standardize) {
        scaler = fit_input_scaler(config, src);
        standardize_tasks(config, scaler, src);
        standardize_tasks(config, scaler, val);
    }

    long total_obs = 0;
    for (const auto& t : src) total_obs += t.n();

    NgpModel model = init_ngp(config, mix_seed(tc.seed, 7));
    Eigen::VectorXd params = model.pack_params();
    AdamState adam = AdamState::create(params.size(), tc.learning_rate);
    Rng shuffle_rng(mix_seed(tc.seed, 11));

    std::vector<int> order(src.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    TrainHistory history;
    EarlyStopper stopper(tc.patience);
    Eigen::VectorXd best_params = params;
    Eigen::VectorXd grad(params.size());

    for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
        const auto t0 = Clock::now();
        shuffle_rng.shuffle(order);

        double epoch_lml = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t stop = std::min(order.size(), start + batch_size);
            const std::vector<int> batch(order.begin() + start, order.begin() + stop);
            epoch_lml += batch_gradient(model, src, batch, grad);
            grad = -grad; // ascend the likelihood
            adam_step(adam, params, grad);
            model.unpack_params(params);
        }

        EpochRecord rec;
        rec.train_lml_per_obs = epoch_lml / static_cast<double>(total_obs);
        rec.val_lml_per_obs = validation_score(model, val);
        rec.seconds = seconds_since(t0);
        history.epochs.push_back(rec);

        const bool stop = stopper.observe(rec.val_lml_per_obs);
        if (stopper.best_index == epoch) best_params = params;
        if (stop) break;
    }

    history.best_epoch = stopper.best_index;
    model.unpack_params(best_params);
    if (standardize) {
        if (config.use_mean_net) fold_input_standardization(model.mean_params, scaler.mean, scaler.std);
        fold_input_standardization(model.embed_params, scaler.mean, scaler.std);
    }
    return {std::move(model), std::move(history)};
}

std::vector<ProbeRow> complexity_probe(const std::vector<int>& task_sizes,
                                       const std::vector<int>& task_counts, std::uint64_t seed) {
    if (task_sizes.empty() || task_counts.empty())
        throw ConfigError("complexity_probe: empty grid");
    for (int n : task_sizes)
        if (n < 2) throw ConfigError("complexity_probe: task size must be at least 2");
    for (int d : task_counts)
        if (d < 1) throw ConfigError("complexity_probe: task count must be positive");

    const int max_d = *std::max_element(task_counts.begin(), task_counts.end());
    std::vector<ProbeRow> rows;
    for (int n : task_sizes) {
        // One shared pool of tasks per N; counts take prefixes of it.
        Dataset ds = generate_synthetic(max_d, mix_seed(seed, static_cast<std::uint64_t>(n)), n);
        for (int d : task_counts) {
            std::vector<Task> source(ds.tasks.begin(), ds.tasks.begin() + d);
            NgpConfig config = NgpConfig::make(true, true, true, ds.meta.m, ds.meta.s);
            NgpModel model = init_ngp(config, mix_seed(seed, 99));
            Eigen::VectorXd params = model.pack_params();
            AdamState adam = AdamState::create(params.size(), 1e-2);
            Eigen::VectorXd grad(params.size());
            std::vector<int> all(d);
            for (int i = 0; i < d; ++i) all[i] = i;

            // Warm up once, then repeat full epochs until the cell has
            // accumulated enough wall time for a stable estimate.
            batch_gradient(model, source, all, grad);
            int epochs = 0;
            double elapsed = 0.0;
            const auto t0 = Clock::now();
            while (epochs < 5 || elapsed < 0.25) {
                batch_gradient(model, source, all, grad);
                grad = -grad;
                adam_step(adam, params, grad);
                model.unpack_params(params);
                ++epochs;
                elapsed = seconds_since(t0);
            }
            rows.push_back(ProbeRow{n, d, elapsed / static_cast<double>(epochs)});
        }
    }
    return rows;
}

void save_history_csv(const TrainHistory& history, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << "epoch,train_lml_per_obs,val_lml_per_obs,seconds\n";
    out.precision(17);
    for (std::size_t i = 0; i < history.epochs.size(); ++i) {
        const auto& e = history.epochs[i];
        out << (i + 1) << ',' << e.train_lml_per_obs << ',' << e.val_lml_per_obs << ',' << e.seconds << '\n';
    }
}

} // namespace ngpbo
