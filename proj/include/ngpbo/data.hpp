#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "ngpbo/common.hpp"

namespace ngpbo {

/// One optimization task: N observed points, N values, one descriptor.
struct Task {
    std::string id;
    Eigen::MatrixXd x; // N x M feature rows
    Eigen::VectorXd y; // N values
    Eigen::VectorXd r; // S-dimensional task descriptor

    int n() const { return static_cast<int>(x.rows()); }
    int m() const { return static_cast<int>(x.cols()); }
    int s() const { return static_cast<int>(r.size()); }

    void validate() const; // shape + finiteness, throws with the task id
};

struct DatasetMeta {
    int m = 0;
    int s = 0;
    std::int64_t seed = 0;
    std::string generator;
};

struct Dataset {
    DatasetMeta meta;
    std::vector<Task> tasks;
};

struct SplitSpec {
    int n_source = 0;
    int n_validation = 0;
    int n_target = 0;
    std::uint64_t seed = 0;
};

struct TaskSplit {
    std::vector<Task> source;
    std::vector<Task> validation;
    std::vector<Task> target;
};

/// The generator's design grid: n_points evenly spaced values over [-5, 5]
/// with exact endpoints.
Eigen::VectorXd synthetic_grid(int n_points);

/// Synthetic benchmark generator. Per task: a scalar descriptor r ~ N(0,1);
/// the function is a GP sample over an n_points grid in [-5, 5] with a random
/// tanh-MLP mean and an RBF kernel on random tanh-MLP embeddings of (grid
/// value, r), plus observation noise of variance 1e-4. Features are a fixed
/// random MLP transform of the grid, shared across tasks. Deterministic in
/// seed; tasks draw from per-task substreams.
Dataset generate_synthetic(int n_tasks, std::uint64_t seed, int n_points = 500);

void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

/// Full-dataset consistency check: shared M/S, matching X/y lengths, finite
/// entries. Throws ConfigError naming the offending task and field.
void validate_dataset(const Dataset& ds);

/// Seeded disjoint random partition into (source, validation, target).
TaskSplit split_tasks(const Dataset& ds, const SplitSpec& spec);

} // namespace ngpbo
