#include "ngpbo/bayesopt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ngpbo/adam.hpp"
#include "ngpbo/rng.hpp"
#include "ngpbo/training.hpp"

namespace ngpbo {

namespace {

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

} // namespace

void CandidatePool::validate() const {
    if (size() < 1) throw ConfigError("candidate pool is empty");
    if (y_true.size() != x.rows()) throw ShapeError("candidate pool: y_true length != candidate count");
    if (!x.allFinite() || !y_true.allFinite() || !r.allFinite())
        throw ConfigError("candidate pool: non-finite entry");
}

CandidatePool CandidatePool::from_task(const Task& task) {
    return CandidatePool{task.x, task.y, task.r};
}

double expected_improvement(double mu, double sigma, double y_best) {
    if (sigma < 0.0) throw ContractError("expected_improvement: negative sigma");
    const double delta = mu - y_best;
    if (sigma == 0.0) return std::max(delta, 0.0);
    const double z = delta / sigma;
    return delta * normal_cdf(z) + sigma * normal_pdf(z);
}

std::optional<int> select_next(const Eigen::Ref<const Eigen::VectorXd>& acq_values,
                               const std::vector<char>& evaluated) {
    if (evaluated.size() != static_cast<std::size_t>(acq_values.size()))
        throw ShapeError("select_next: mask length != acquisition length");
    int best = -1;
    double best_val = 0.0;
    for (Eigen::Index i = 0; i < acq_values.size(); ++i) {
        if (evaluated[i]) continue;
        if (best < 0 || acq_values(i) > best_val) {
            best = static_cast<int>(i);
            best_val = acq_values(i);
        }
    }
    if (best < 0) return std::nullopt;
    return best;
}

Strategy Strategy::ngp(std::shared_ptr<const NgpModel> model) {
    if (!model) throw ConfigError("Strategy::ngp: missing model");
    std::string name = model->config.variant_name();
    return Strategy{Kind::Ngp, std::move(model), nullptr, std::move(name)};
}
Strategy Strategy::gp() { return Strategy{Kind::Gp, nullptr, nullptr, "GP"}; }
Strategy Strategy::tgp(std::shared_ptr<const NgpModel> model) {
    if (!model) throw ConfigError("Strategy::tgp: missing model");
    return Strategy{Kind::Tgp, std::move(model), nullptr, "TGP"};
}
Strategy Strategy::nn(std::shared_ptr<const MlpParams> net) {
    if (!net) throw ConfigError("Strategy::nn: missing net");
    return Strategy{Kind::Nn, nullptr, std::move(net), "NN"};
}
Strategy Strategy::nn_r(std::shared_ptr<const MlpParams> net) {
    if (!net) throw ConfigError("Strategy::nn_r: missing net");
    return Strategy{Kind::NnR, nullptr, std::move(net), "NN-R"};
}
Strategy Strategy::random_search() { return Strategy{Kind::Random, nullptr, nullptr, "Random"}; }

// ---------------------------------------------------------------------------
// Matern-5/2 baseline GP.

double matern52(double distance, double amplitude, double lengthscale) {
    if (distance < 0.0) throw ContractError("matern52: negative distance");
    const double u = std::sqrt(5.0) * distance / lengthscale;
    return amplitude * (1.0 + u + u * u / 3.0) * std::exp(-u);
}

namespace {

Eigen::MatrixXd matern_matrix(const MaternGpParams& p, const Eigen::Ref<const Eigen::MatrixXd>& a,
                              const Eigen::Ref<const Eigen::MatrixXd>& b) {
    const double amp = std::exp(p.log_amplitude);
    const double ell = std::exp(p.log_lengthscale);
    Eigen::MatrixXd k(a.rows(), b.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < b.rows(); ++j)
            k(i, j) = matern52((a.row(i) - b.row(j)).norm(), amp, ell);
    return k;
}

// LML of the zero-mean Matern GP with its gradient in the log-parameters.
double matern_lml(const MaternGpParams& p, const Eigen::Ref<const Eigen::MatrixXd>& x,
                  const Eigen::Ref<const Eigen::VectorXd>& y, Eigen::Vector3d* grad) {
    const Eigen::Index n = x.rows();
    const double amp = std::exp(p.log_amplitude);
    const double noise = std::exp(p.log_noise_variance);
    const double inv_ell = std::exp(-p.log_lengthscale);

    Eigen::MatrixXd k(n, n);
    Eigen::MatrixXd dk_dlog_ell(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            const double u = std::sqrt(5.0) * (x.row(i) - x.row(j)).norm() * inv_ell;
            const double e = std::exp(-u);
            k(i, j) = amp * (1.0 + u + u * u / 3.0) * e;
            dk_dlog_ell(i, j) = amp / 3.0 * u * u * (1.0 + u) * e;
        }
    Eigen::MatrixXd c = k;
    c.diagonal().array() += noise;
    const auto llt = cholesky_with_jitter(c, "matern baseline");
    const Eigen::VectorXd alpha = llt.solve(y);
    const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const double lml = -0.5 * (static_cast<double>(n) * std::log(2.0 * M_PI) + log_det + y.dot(alpha));
    if (grad) {
        const Eigen::MatrixXd a_inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
        const Eigen::MatrixXd g = 0.5 * (alpha * alpha.transpose() - a_inv);
        (*grad)(0) = (g.array() * k.array()).sum();           // d/dlog_amplitude
        (*grad)(1) = (g.array() * dk_dlog_ell.array()).sum(); // d/dlog_lengthscale
        (*grad)(2) = g.trace() * noise;                       // d/dlog_noise_variance
    }
    return lml;
}

double median_pairwise_distance(const Eigen::Ref<const Eigen::MatrixXd>& x) {
    const Eigen::Index n = x.rows();
    if (n < 2) return 1.0;
    std::vector<double> dists;
    dists.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) dists.push_back((x.row(i) - x.row(j)).norm());
    std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
    const double med = dists[dists.size() / 2];
    return med > 0.0 ? med : 1.0;
}

} // namespace

MaternGpParams matern_fit(const Eigen::Ref<const Eigen::MatrixXd>& x_obs,
                          const Eigen::Ref<const Eigen::VectorXd>& y_obs, double default_lengthscale,
                          std::uint64_t seed) {
    const MaternGpParams start{0.0, std::log(default_lengthscale), std::log(1e-4)};
    MaternGpParams best = start;
    double best_lml = -std::numeric_limits<double>::infinity();
    Rng rng(mix_seed(seed, 313));

    for (int restart = 0; restart < 4; ++restart) {
        Eigen::VectorXd params(3);
        params << start.log_amplitude, start.log_lengthscale, start.log_noise_variance;
        if (restart > 0)
            for (int i = 0; i < 3; ++i) params(i) += 0.5 * rng.normal();

        AdamState adam = AdamState::create(3, 0.1);
        Eigen::Vector3d grad;
        bool ok = true;
        for (int step = 0; step < 100; ++step) {
            MaternGpParams p{params(0), params(1), params(2)};
            try {
                matern_lml(p, x_obs, y_obs, &grad);
            } catch (const NumericError&) {
                ok = false;
                break;
            }
            Eigen::VectorXd neg = -grad;
            adam_step(adam, params, neg);
            // Soft box keeps the ascent away from degenerate scales.
            params(0) = std::clamp(params(0), -8.0, 5.0);
            params(1) = std::clamp(params(1), std::log(default_lengthscale) - 6.0,
                                   std::log(default_lengthscale) + 6.0);
            params(2) = std::clamp(params(2), std::log(1e-8), std::log(1e2));
        }
        if (!ok) continue;
        const MaternGpParams p{params(0), params(1), params(2)};
        try {
            const double lml = matern_lml(p, x_obs, y_obs, nullptr);
            if (lml > best_lml) {
                best_lml = lml;
                best = p;
            }
        } catch (const NumericError&) {
        }
    }
    return best;
}

Posterior matern_gp_posterior(const MaternGpParams& p, const Eigen::Ref<const Eigen::MatrixXd>& x_obs,
                              const Eigen::Ref<const Eigen::VectorXd>& y_obs,
                              const Eigen::Ref<const Eigen::MatrixXd>& x_query) {
    const double amp = std::exp(p.log_amplitude);
    Posterior post;
    if (x_obs.rows() == 0) {
        post.mean = Eigen::VectorXd::Zero(x_query.rows());
        post.variance = Eigen::VectorXd::Constant(x_query.rows(), amp);
        return post;
    }
    Eigen::MatrixXd c = matern_matrix(p, x_obs, x_obs);
    c.diagonal().array() += std::exp(p.log_noise_variance);
    const auto llt = cholesky_with_jitter(c, "matern posterior");
    const Eigen::MatrixXd k_cross = matern_matrix(p, x_obs, x_query);
    post.mean = k_cross.transpose() * llt.solve(y_obs);
    const Eigen::MatrixXd v = llt.matrixL().solve(k_cross);
    post.variance = Eigen::VectorXd::Constant(x_query.rows(), amp) - v.colwise().squaredNorm().transpose();
    for (Eigen::Index i = 0; i < post.variance.size(); ++i)
        if (post.variance(i) < 0.0) {
            if (post.variance(i) < -1e-10)
                throw NumericError("matern posterior: variance below clamp threshold");
            post.variance(i) = 0.0;
        }
    return post;
}

Posterior gp_baseline_posterior(const Eigen::Ref<const Eigen::MatrixXd>& x_obs,
                                const Eigen::Ref<const Eigen::VectorXd>& y_obs,
                                const Eigen::Ref<const Eigen::MatrixXd>& x_query, std::uint64_t seed) {
    if (x_obs.rows() != y_obs.size()) throw ShapeError("gp_baseline_posterior: rows != values");
    Eigen::MatrixXd all(x_obs.rows() + x_query.rows(), x_query.cols());
    if (x_obs.rows() > 0) all.topRows(x_obs.rows()) = x_obs;
    all.bottomRows(x_query.rows()) = x_query;
    const double default_ell = median_pairwise_distance(all);

    MaternGpParams p{0.0, std::log(default_ell), std::log(1e-4)};
    if (x_obs.rows() >= 3) p = matern_fit(x_obs, y_obs, default_ell, seed);
    return matern_gp_posterior(p, x_obs, y_obs, x_query);
}

// ---------------------------------------------------------------------------
// NN / NN-R regression baseline.

namespace {

// Pooled (input, y) design over every observation of every task.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> pool_observations(const std::vector<Task>& tasks,
                                                              bool use_descriptor) {
    long rows = 0;
    for (const auto& t : tasks) rows += t.n();
    const int m = tasks.front().m();
    const int s = tasks.front().s();
    Eigen::MatrixXd x(rows, m + (use_descriptor ? s : 0));
    Eigen::VectorXd y(rows);
    long at = 0;
    for (const auto& t : tasks) {
        for (int i = 0; i < t.n(); ++i) {
            x.block(at, 0, 1, m) = t.x.row(i);
            if (use_descriptor) x.block(at, m, 1, s) = t.r.transpose();
            y(at) = t.y(i);
            ++at;
        }
    }
    return {std::move(x), std::move(y)};
}

double pooled_mse(const MlpParams& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    double sse = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double pred = mlp_forward(net, x.row(i))(0);
        sse += (pred - y(i)) * (pred - y(i));
    }
    return sse / static_cast<double>(x.rows());
}

} // namespace

MlpParams nn_baseline_fit(const std::vector<Task>& source_tasks, const std::vector<Task>& val_tasks,
                          bool use_descriptor, std::uint64_t seed) {
    if (source_tasks.empty()) throw ConfigError("nn_baseline_fit: no source tasks");
    if (val_tasks.empty()) throw ConfigError("nn_baseline_fit: no validation tasks");

    auto [x, y] = pool_observations(source_tasks, use_descriptor);
    auto [xv, yv] = pool_observations(val_tasks, use_descriptor);

    // Train on standardized inputs, fold the scaler into the first layer at
    // the end (same scheme as the surrogate training loop).
    Eigen::VectorXd in_mean = x.colwise().mean().transpose();
    Eigen::VectorXd in_std =
        ((x.rowwise() - in_mean.transpose()).array().square().colwise().mean()).sqrt().transpose();
    for (Eigen::Index i = 0; i < in_std.size(); ++i)
        if (in_std(i) < 1e-12) in_std(i) = 1.0;
    x = (x.rowwise() - in_mean.transpose()).array().rowwise() / in_std.transpose().array();
    xv = (xv.rowwise() - in_mean.transpose()).array().rowwise() / in_std.transpose().array();

    const MlpArch arch{{static_cast<int>(x.cols()), 32, 32, 1}, Activation::Tanh};
    MlpParams net = init_params(arch, mix_seed(seed, 21));
    Eigen::VectorXd params = net.pack();
    AdamState adam = AdamState::create(params.size(), 1e-2);
    Rng shuffle_rng(mix_seed(seed, 22));

    const int batch = 256;
    const int max_epochs = 200;
    EarlyStopper stopper(20);
    Eigen::VectorXd best_params = params;

    std::vector<int> order(x.rows());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t stop = std::min(order.size(), start + batch);
            MlpGrads grads = MlpGrads::zeros_like(net);
            Eigen::VectorXd g_out(1);
            for (std::size_t k = start; k < stop; ++k) {
                const int i = order[k];
                MlpForwardCache cache;
                const double pred = mlp_forward(net, x.row(i), &cache)(0);
                g_out(0) = 2.0 * (pred - y(i)) / static_cast<double>(stop - start);
                auto [g, g_in] = mlp_backward(net, cache, g_out);
                grads.accumulate(g);
            }
            Eigen::VectorXd flat = grads.pack();
            try {
                adam_step(adam, params, flat);
            } catch (const NumericError& e) {
                Eigen::Index idx = 0;
                for (; idx < flat.size(); ++idx)
                    if (!std::isfinite(flat(idx))) break;
                throw NumericError(std::string(e.what()) + " [" + param_block_at(arch, idx) + "]");
            }
            net.unpack(params);
        }
        const bool stop = stopper.observe(-pooled_mse(net, xv, yv));
        if (stopper.best_index == epoch) best_params = params;
        if (stop) break;
    }
    net.unpack(best_params);
    fold_input_standardization(net, in_mean, in_std);
    return net;
}

// ---------------------------------------------------------------------------
// The BO loop.

namespace {

int argmax_lowest_tie(const Eigen::VectorXd& v) {
    int best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
        if (v(i) > v(best)) best = static_cast<int>(i);
    return best;
}

// Query order for the value-blind strategies (prediction descending, then
// index ascending).
std::vector<int> prediction_order(const MlpParams& net, const CandidatePool& pool, bool use_descriptor) {
    const int p = pool.size();
    Eigen::VectorXd pred(p);
    for (int i = 0; i < p; ++i) {
        Eigen::VectorXd in;
        if (use_descriptor) {
            in.resize(pool.x.cols() + pool.r.size());
            in << pool.x.row(i).transpose(), pool.r;
        } else {
            in = pool.x.row(i);
        }
        pred(i) = mlp_forward(net, in)(0);
    }
    std::vector<int> order(p);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return pred(a) > pred(b); });
    return order;
}

BoTrace walk_fixed_order(const std::vector<int>& order, const CandidatePool& pool, int budget) {
    BoTrace trace;
    const double true_max = pool.y_true.maxCoeff();
    double best = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < budget; ++it) {
        const int idx = order[it];
        const double y = pool.y_true(idx);
        best = std::max(best, y);
        trace.queried_indices.push_back(idx);
        trace.observed_values.push_back(y);
        trace.best_so_far.push_back(best);
        if (!trace.evals_to_max && y >= true_max) trace.evals_to_max = it + 1;
    }
    return trace;
}

} // namespace

BoTrace run_bo(const Strategy& strategy, const CandidatePool& pool, int budget, std::uint64_t seed) {
    pool.validate();
    const int p = pool.size();
    if (budget < 1 || budget > p)
        throw ConfigError("run_bo: budget must be in [1, pool size]");

    Rng rng(mix_seed(seed, 77));

    if (strategy.kind == Strategy::Kind::Random) {
        std::vector<int> order(p);
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        return walk_fixed_order(order, pool, budget);
    }
    if (strategy.kind == Strategy::Kind::Nn || strategy.kind == Strategy::Kind::NnR)
        return walk_fixed_order(
            prediction_order(*strategy.net, pool, strategy.kind == Strategy::Kind::NnR), pool, budget);

    // Surrogate strategies: NGP variants, TGP, plain GP.
    const bool is_gp = strategy.kind == Strategy::Kind::Gp;
    const NgpModel* model = strategy.model.get();

    BoTrace trace;
    const double true_max = pool.y_true.maxCoeff();
    std::vector<char> evaluated(p, 0);
    std::vector<int> obs_idx;
    double best = -std::numeric_limits<double>::infinity();

    for (int it = 0; it < budget; ++it) {
        int idx;
        if (obs_idx.empty()) {
            if (!is_gp && model->config.use_mean_net) {
                idx = argmax_lowest_tie(mean_vector(*model, pool.x, pool.r));
            } else {
                idx = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(p)));
            }
        } else {
            Eigen::MatrixXd x_obs(obs_idx.size(), pool.x.cols());
            Eigen::VectorXd y_obs(obs_idx.size());
            for (std::size_t k = 0; k < obs_idx.size(); ++k) {
                x_obs.row(k) = pool.x.row(obs_idx[k]);
                y_obs(k) = pool.y_true(obs_idx[k]);
            }
            Posterior post;
            try {
                post = is_gp ? gp_baseline_posterior(x_obs, y_obs, pool.x,
                                                     mix_seed(seed, 500 + static_cast<std::uint64_t>(it)))
                             : posterior(*model, pool.r, x_obs, y_obs, pool.x);
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " [BO iteration " + std::to_string(it) + "]");
            }
            Eigen::VectorXd acq(p);
            for (int i = 0; i < p; ++i)
                acq(i) = expected_improvement(post.mean(i), std::sqrt(post.variance(i)), best);
            const auto next = select_next(acq, evaluated);
            if (!next) break; // budget <= p, so unreachable in practice
            idx = *next;
        }

        const double y = pool.y_true(idx);
        evaluated[idx] = 1;
        obs_idx.push_back(idx);
        best = std::max(best, y);
        trace.queried_indices.push_back(idx);
        trace.observed_values.push_back(y);
        trace.best_so_far.push_back(best);
        if (!trace.evals_to_max && y >= true_max) trace.evals_to_max = it + 1;
    }
    return trace;
}

} // namespace ngpbo
