#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ngpbo/data.hpp"
#include "ngpbo/ngp.hpp"

namespace ngpbo {

/// Finite design space: P candidate rows with hidden true values, revealed
/// one index at a time by the BO loop.
struct CandidatePool {
    Eigen::MatrixXd x;      // P x M
    Eigen::VectorXd y_true; // P
    Eigen::VectorXd r;      // target task descriptor

    int size() const { return static_cast<int>(x.rows()); }
    void validate() const;

    static CandidatePool from_task(const Task& task);
};

/// Ordered record of one BO run. best_so_far is the running maximum;
/// evals_to_max is the 1-based count of the first query attaining the pool
/// maximum, or empty if the budget ran out first.
struct BoTrace {
    std::vector<int> queried_indices;
    std::vector<double> observed_values;
    std::vector<double> best_so_far;
    std::optional<int> evals_to_max;
};

/// Closed-form expected improvement E[max(f - y_best, 0)] for f ~ N(mu,
/// sigma^2); the sigma = 0 limit is max(mu - y_best, 0).
double expected_improvement(double mu, double sigma, double y_best);

/// Argmax over unevaluated indices, ties broken by lowest index; empty when
/// everything has been evaluated.
std::optional<int> select_next(const Eigen::Ref<const Eigen::VectorXd>& acq_values,
                               const std::vector<char>& evaluated);

/// Query strategy. NGP variants and TGP carry a trained model; NN / NN-R
/// carry a regression net whose query order never looks at observed target
/// values; Random is a seeded permutation.
struct Strategy {
    enum class Kind { Ngp, Gp, Tgp, Nn, NnR, Random };

    Kind kind = Kind::Random;
    std::shared_ptr<const NgpModel> model; // Ngp / Tgp
    std::shared_ptr<const MlpParams> net;  // Nn / NnR
    std::string name;

    static Strategy ngp(std::shared_ptr<const NgpModel> model);
    static Strategy gp();
    static Strategy tgp(std::shared_ptr<const NgpModel> model);
    static Strategy nn(std::shared_ptr<const MlpParams> net);
    static Strategy nn_r(std::shared_ptr<const MlpParams> net);
    static Strategy random_search();
};

/// Runs `budget` evaluations on the pool. Surrogate strategies score the
/// unevaluated candidates with expected improvement against the incumbent;
/// a model with a neural mean spends its first query on the prior-mean
/// argmax, zero-mean surrogates start at a seeded random candidate.
BoTrace run_bo(const Strategy& strategy, const CandidatePool& pool, int budget, std::uint64_t seed);

/// Matern-5/2 covariance value at a given input distance.
double matern52(double distance, double amplitude, double lengthscale);

struct MaternGpParams {
    double log_amplitude = 0.0;
    double log_lengthscale = 0.0;
    double log_noise_variance = -9.2103403719761836; // log(1e-4)
};

/// Multi-restart gradient ascent (4 restarts, 100 steps) of the zero-mean
/// Matern marginal likelihood; deterministic in seed.
MaternGpParams matern_fit(const Eigen::Ref<const Eigen::MatrixXd>& x_obs,
                          const Eigen::Ref<const Eigen::VectorXd>& y_obs, double default_lengthscale,
                          std::uint64_t seed);

/// Zero-mean Matern-5/2 conditioning with the shared jitter policy.
Posterior matern_gp_posterior(const MaternGpParams& params,
                              const Eigen::Ref<const Eigen::MatrixXd>& x_obs,
                              const Eigen::Ref<const Eigen::VectorXd>& y_obs,
                              const Eigen::Ref<const Eigen::MatrixXd>& x_query);

/// The no-transfer baseline: defaults (amplitude 1, lengthscale = median
/// pairwise distance over observed and query rows, noise 1e-4) until three
/// observations exist, then refit via matern_fit before conditioning.
Posterior gp_baseline_posterior(const Eigen::Ref<const Eigen::MatrixXd>& x_obs,
                                const Eigen::Ref<const Eigen::VectorXd>& y_obs,
                                const Eigen::Ref<const Eigen::MatrixXd>& x_query,
                                std::uint64_t seed = 0);

/// Pooled regression net over all source observations (squared error, Adam,
/// early stopping on the validation tasks). With use_descriptor the input is
/// x ++ r, giving the NN-R variant.
MlpParams nn_baseline_fit(const std::vector<Task>& source_tasks, const std::vector<Task>& val_tasks,
                          bool use_descriptor, std::uint64_t seed);

} // namespace ngpbo
