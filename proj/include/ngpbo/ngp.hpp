#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "ngpbo/data.hpp"
#include "ngpbo/kernels.hpp"
#include "ngpbo/mlp.hpp"

namespace ngpbo {

/// Model variant switches. The descriptor flag ('R') appends the task
/// descriptor to every network input; the mean flag ('M') enables the neural
/// mean (zero mean otherwise); the embedding flag ('K') enables the neural
/// covariance embedding (identity otherwise).
struct NgpConfig {
    bool use_descriptor = true;
    bool use_mean_net = true;
    bool use_embed_net = true;
    int feature_dim = 0;
    int descriptor_dim = 0;
    MlpArch mean_arch;
    MlpArch embed_arch;
    KernelKind kernel = KernelKind::Rbf;
    bool learn_amplitude = true;

    int input_dim() const { return feature_dim + (use_descriptor ? descriptor_dim : 0); }
    int embed_dim() const { return use_embed_net ? embed_arch.output_dim() : input_dim(); }

    void validate() const;

    /// Default architectures: mean [in, hidden, hidden, 1]; embedding
    /// [in, hidden, hidden] with a `hidden`-unit output layer.
    static NgpConfig make(bool use_r, bool use_m, bool use_k, int feature_dim, int descriptor_dim,
                          int hidden = 32, KernelKind kernel = KernelKind::Rbf);

    /// "NGP-RMK", "NGP-RM", ... ; "TGP" when all three flags are off.
    std::string variant_name() const;
};

/// Trained surrogate: mean network, embedding network, kernel parameters and
/// a log observation-noise variance added to the kernel diagonal. Immutable
/// once training finishes.
struct NgpModel {
    NgpConfig config;
    MlpParams mean_params;  // unused when !use_mean_net
    MlpParams embed_params; // unused when !use_embed_net
    KernelParams kernel_params;
    double log_noise_variance = std::log(1e-2);

    double noise_variance() const { return std::exp(log_noise_variance); }

    Eigen::Index param_count() const;
    Eigen::VectorXd pack_params() const;
    void unpack_params(const Eigen::Ref<const Eigen::VectorXd>& flat);
};

/// Fresh model with seeded network init and unit kernel parameters.
NgpModel init_ngp(const NgpConfig& config, std::uint64_t seed);

/// Per-query predictive mean and latent-function variance.
struct Posterior {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;
};

/// Gradient of a task log marginal likelihood with respect to every trained
/// parameter; blocks for disabled networks stay empty.
struct NgpGradient {
    MlpGrads mean;
    MlpGrads embed;
    double d_log_amplitude = 0.0;
    double d_log_lengthscale = 0.0;
    double d_log_noise = 0.0;
};

/// Packs a gradient in the same order as NgpModel::pack_params.
Eigen::VectorXd pack_gradient(const NgpModel& model, const NgpGradient& grad);

/// x, or x ++ r when the descriptor flag is on.
Eigen::VectorXd task_input(const NgpConfig& config, const Eigen::Ref<const Eigen::VectorXd>& x,
                           const Eigen::Ref<const Eigen::VectorXd>& r);

/// Row-wise task_input over a feature matrix.
Eigen::MatrixXd task_inputs(const NgpConfig& config, const Eigen::Ref<const Eigen::MatrixXd>& x,
                            const Eigen::Ref<const Eigen::VectorXd>& r);

/// Row-wise mean network; identically zero when the mean net is off.
Eigen::VectorXd mean_vector(const NgpModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x,
                            const Eigen::Ref<const Eigen::VectorXd>& r);

/// Row-wise covariance embedding; identity pass-through when the embedding
/// net is off.
Eigen::MatrixXd embed_matrix(const NgpModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x,
                             const Eigen::Ref<const Eigen::VectorXd>& r);

/// Cholesky of a + jitter * I. Jitter starts at 1e-8 and escalates by tens up
/// to 1e-4; past that a NumericError carrying `context` is thrown.
Eigen::LLT<Eigen::MatrixXd> cholesky_with_jitter(const Eigen::MatrixXd& a, const std::string& context);

/// Gaussian log marginal likelihood of one task under the model:
/// -1/2 (N log 2pi + log|K + s2 I| + (y - m)^T (K + s2 I)^{-1} (y - m)).
double log_marginal_likelihood(const NgpModel& model, const Task& task);

/// Full parameter gradient of log_marginal_likelihood. With
/// A = (K + s2 I)^{-1} and alpha = A (y - m): the mean-net gradient
/// backpropagates alpha through each mean row, the kernel/embedding gradients
/// chain dL/dK = (alpha alpha^T - A) / 2 through the Gram matrix into the
/// embedding rows and kernel hyperparameters, and the noise gradient is
/// tr(dL/dK) * s2 in log-noise coordinates.
NgpGradient lml_gradient(const NgpModel& model, const Task& task);

/// Closed-form posterior over query rows given observations of the target
/// task. Zero observations is legal and yields the prior. Variance is the
/// latent-function variance unless include_observation_noise is set.
/// Negative variances in [-1e-10, 0) clamp to zero; anything lower throws.
Posterior posterior(const NgpModel& model, const Eigen::Ref<const Eigen::VectorXd>& r_target,
                    const Eigen::Ref<const Eigen::MatrixXd>& x_obs,
                    const Eigen::Ref<const Eigen::VectorXd>& y_obs,
                    const Eigen::Ref<const Eigen::MatrixXd>& x_query,
                    bool include_observation_noise = false);

} // namespace ngpbo
