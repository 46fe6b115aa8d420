#include "ngpbo/data.hpp"

#include <fstream>

#include <json.hpp>

#include "ngpbo/kernels.hpp"
#include "ngpbo/mlp.hpp"
#include "ngpbo/ngp.hpp"
#include "ngpbo/rng.hpp"

namespace ngpbo {

using nlohmann::json;

void Task::validate() const {
    if (n() < 1) throw ConfigError("task '" + id + "': needs at least one observation");
    if (y.size() != x.rows())
        throw ConfigError("task '" + id + "': x has " + std::to_string(x.rows()) + " rows but y has " +
                          std::to_string(y.size()) + " values");
    if (!x.allFinite()) throw ConfigError("task '" + id + "': non-finite entry in x");
    if (!y.allFinite()) throw ConfigError("task '" + id + "': non-finite entry in y");
    if (!r.allFinite()) throw ConfigError("task '" + id + "': non-finite entry in r");
}

void validate_dataset(const Dataset& ds) {
    for (const auto& t : ds.tasks) {
        t.validate();
        if (t.m() != ds.meta.m)
            throw ConfigError("task '" + t.id + "': feature dim " + std::to_string(t.m()) +
                              " != dataset m " + std::to_string(ds.meta.m));
        if (t.s() != ds.meta.s)
            throw ConfigError("task '" + t.id + "': descriptor dim " + std::to_string(t.s()) +
                              " != dataset s " + std::to_string(ds.meta.s));
    }
}

namespace {

// All parameters U(-1, 1), matching the synthetic benchmark recipe.
MlpParams random_uniform_params(const MlpArch& arch, Rng& rng) {
    MlpParams p;
    p.arch = arch;
    for (int l = 0; l < arch.num_weight_layers(); ++l) {
        Eigen::MatrixXd w(arch.layer_sizes[l + 1], arch.layer_sizes[l]);
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-1.0, 1.0);
        Eigen::VectorXd b(arch.layer_sizes[l + 1]);
        for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rng.uniform(-1.0, 1.0);
        p.weights.push_back(std::move(w));
        p.biases.push_back(std::move(b));
    }
    return p;
}

} // namespace

Eigen::VectorXd synthetic_grid(int n_points) {
    if (n_points < 2) throw ConfigError("synthetic_grid: n_points must be at least 2");
    Eigen::VectorXd grid(n_points);
    for (int i = 0; i < n_points; ++i)
        grid(i) = -5.0 + static_cast<double>(i) * 10.0 / static_cast<double>(n_points - 1);
    return grid;
}

Dataset generate_synthetic(int n_tasks, std::uint64_t seed, int n_points) {
    if (n_tasks < 1) throw ConfigError("generate_synthetic: n_tasks must be positive");

    const Eigen::VectorXd grid = synthetic_grid(n_points);

    const MlpArch deep_scalar{{1, 32, 32, 32, 1}, Activation::Tanh};
    const MlpArch deep_pair{{2, 32, 32, 32, 1}, Activation::Tanh};

    Rng feat_rng(mix_seed(seed, 1));
    Rng mean_rng(mix_seed(seed, 2));
    Rng embed_rng(mix_seed(seed, 3));
    const MlpParams feature_net = random_uniform_params(deep_scalar, feat_rng);
    const MlpParams mean_net = random_uniform_params(deep_pair, mean_rng);
    const MlpParams embed_net = random_uniform_params(deep_pair, embed_rng);
    const KernelParams kp{0.0, 0.0, KernelKind::Rbf};
    const double noise_sd = 1e-2; // observation noise variance 1e-4

    // Features are a fixed transform of the grid, shared by every task.
    Eigen::MatrixXd features(n_points, 1);
    Eigen::VectorXd in1(1);
    for (int i = 0; i < n_points; ++i) {
        in1(0) = grid(i);
        features(i, 0) = mlp_forward(feature_net, in1)(0);
    }

    Dataset ds;
    ds.meta = DatasetMeta{1, 1, static_cast<std::int64_t>(seed), "synthetic"};
    ds.tasks.reserve(n_tasks);
    Eigen::VectorXd in2(2);
    for (int d = 0; d < n_tasks; ++d) {
        Rng trng(mix_seed(seed, 1000 + static_cast<std::uint64_t>(d)));
        const double r = trng.normal();

        Eigen::VectorXd mean(n_points);
        Eigen::MatrixXd embedded(n_points, 1);
        for (int i = 0; i < n_points; ++i) {
            in2 << grid(i), r;
            mean(i) = mlp_forward(mean_net, in2)(0);
            embedded(i, 0) = mlp_forward(embed_net, in2)(0);
        }
        const Eigen::MatrixXd k = kernel_matrix(kp, embedded, embedded);
        const auto llt = cholesky_with_jitter(k, "synthetic task " + std::to_string(d));

        Eigen::VectorXd eps(n_points);
        for (int i = 0; i < n_points; ++i) eps(i) = trng.normal();
        Eigen::VectorXd y = mean + Eigen::MatrixXd(llt.matrixL()) * eps;
        for (int i = 0; i < n_points; ++i) y(i) += noise_sd * trng.normal();

        Task t;
        t.id = "task-" + std::to_string(d);
        t.x = features;
        t.y = std::move(y);
        t.r = Eigen::VectorXd::Constant(1, r);
        ds.tasks.push_back(std::move(t));
    }
    validate_dataset(ds);
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    json j;
    j["meta"] = {{"m", ds.meta.m}, {"s", ds.meta.s}, {"seed", ds.meta.seed}, {"generator", ds.meta.generator}};
    json tasks = json::array();
    for (const auto& t : ds.tasks) {
        json jt;
        jt["id"] = t.id;
        jt["r"] = std::vector<double>(t.r.data(), t.r.data() + t.r.size());
        json rows = json::array();
        for (Eigen::Index i = 0; i < t.x.rows(); ++i) {
            json row = json::array();
            for (Eigen::Index c = 0; c < t.x.cols(); ++c) row.push_back(t.x(i, c));
            rows.push_back(std::move(row));
        }
        jt["x"] = std::move(rows);
        jt["y"] = std::vector<double>(t.y.data(), t.y.data() + t.y.size());
        tasks.push_back(std::move(jt));
    }
    j["tasks"] = std::move(tasks);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << j.dump();
    out << '\n';
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("dataset '" + path + "': invalid JSON: " + e.what());
    }

    Dataset ds;
    try {
        ds.meta.m = j.at("meta").at("m").get<int>();
        ds.meta.s = j.at("meta").at("s").get<int>();
        ds.meta.seed = j.at("meta").value("seed", std::int64_t{0});
        ds.meta.generator = j.at("meta").value("generator", std::string{});
    } catch (const json::exception& e) {
        throw ConfigError("dataset '" + path + "': bad meta: " + e.what());
    }

    for (const auto& jt : j.at("tasks")) {
        Task t;
        t.id = jt.value("id", "unnamed");
        try {
            const auto& rv = jt.at("r");
            t.r.resize(rv.size());
            for (std::size_t i = 0; i < rv.size(); ++i) t.r(i) = rv[i].get<double>();

            const auto& xv = jt.at("x");
            const std::size_t rows = xv.size();
            const std::size_t cols = rows > 0 ? xv[0].size() : 0;
            t.x.resize(rows, cols);
            for (std::size_t i = 0; i < rows; ++i) {
                if (xv[i].size() != cols)
                    throw ConfigError("task '" + t.id + "': ragged x rows");
                for (std::size_t c = 0; c < cols; ++c) t.x(i, c) = xv[i][c].get<double>();
            }
            const auto& yv = jt.at("y");
            t.y.resize(yv.size());
            for (std::size_t i = 0; i < yv.size(); ++i) t.y(i) = yv[i].get<double>();
        } catch (const json::exception& e) {
            throw ConfigError("task '" + t.id + "': malformed field: " + e.what());
        }
        ds.tasks.push_back(std::move(t));
    }
    validate_dataset(ds);
    return ds;
}

TaskSplit split_tasks(const Dataset& ds, const SplitSpec& spec) {
    if (spec.n_source < 0 || spec.n_validation < 0 || spec.n_target < 0)
        throw ConfigError("split_tasks: negative split count");
    const int total = spec.n_source + spec.n_validation + spec.n_target;
    if (total > static_cast<int>(ds.tasks.size()))
        throw ConfigError("split_tasks: requested " + std::to_string(total) + " tasks but dataset has " +
                          std::to_string(ds.tasks.size()));

    std::vector<int> order(ds.tasks.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng rng(mix_seed(spec.seed, 42));
    rng.shuffle(order);

    TaskSplit split;
    int at = 0;
    for (int i = 0; i < spec.n_source; ++i) split.source.push_back(ds.tasks[order[at++]]);
    for (int i = 0; i < spec.n_validation; ++i) split.validation.push_back(ds.tasks[order[at++]]);
    for (int i = 0; i < spec.n_target; ++i) split.target.push_back(ds.tasks[order[at++]]);
    return split;
}

} // namespace ngpbo
