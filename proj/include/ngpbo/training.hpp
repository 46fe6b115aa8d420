#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ngpbo/data.hpp"
#include "ngpbo/ngp.hpp"

namespace ngpbo {

struct TrainConfig {
    int batch_size = 32; // tasks per minibatch; clamped to the source count
    double learning_rate = 1e-2;
    int max_epochs = 500;
    int patience = 20;
    std::uint64_t seed = 0;
    bool center_y = false; // subtract each task's mean y before training
};

struct EpochRecord {
    double train_lml_per_obs = 0.0;
    double val_lml_per_obs = 0.0;
    double seconds = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs; // epochs.size() == epochs run
    int best_epoch = 0;              // 1-based index of the maximum validation score
};

/// Stops after `patience` observations without strict improvement.
struct EarlyStopper {
    int patience;
    int best_index = 0; // 1-based
    double best_score = -std::numeric_limits<double>::infinity();

    explicit EarlyStopper(int patience_) : patience(patience_) {}

    /// Feeds the next score; returns true when training should stop.
    bool observe(double score) {
        ++count_;
        if (score > best_score) {
            best_score = score;
            best_index = count_;
        }
        return count_ - best_index >= patience;
    }

private:
    int count_ = 0;
};

/// Maximizes the summed source-task log marginal likelihood with task
/// minibatches and Adam, early-stopping on the validation score. Returns the
/// parameters of the best validation epoch, not the last one.
std::pair<NgpModel, TrainHistory> train(const NgpConfig& config, const std::vector<Task>& source_tasks,
                                        const std::vector<Task>& val_tasks, const TrainConfig& tc);

/// Sum of task log likelihoods divided by the total observation count.
double validation_score(const NgpModel& model, const std::vector<Task>& tasks);

struct ProbeRow {
    int task_size = 0;   // observations per task (N)
    int task_count = 0;  // number of source tasks (D)
    double seconds_per_epoch = 0.0;
};

/// Measures per-epoch wall time of the training step over a grid of task
/// sizes and task counts; best-effort trend data, repeated until each cell
/// accumulates enough runtime to be stable.
std::vector<ProbeRow> complexity_probe(const std::vector<int>& task_sizes,
                                       const std::vector<int>& task_counts,
                                       std::uint64_t seed = 0);

/// CSV with header epoch,train_lml_per_obs,val_lml_per_obs,seconds.
void save_history_csv(const TrainHistory& history, const std::string& path);

} // namespace ngpbo
