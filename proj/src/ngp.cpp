#include "ngpbo/ngp.hpp"

#include <cmath>

#include "ngpbo/rng.hpp"

namespace ngpbo {

namespace {
constexpr double kJitterStart = 1e-8;
constexpr double kJitterMax = 1e-4;
constexpr double kVarianceClamp = -1e-10;
} // namespace

void NgpConfig::validate() const {
    if (feature_dim < 1) throw ConfigError("NgpConfig: feature_dim must be positive");
    if (use_descriptor && descriptor_dim < 1)
        throw ConfigError("NgpConfig: descriptor flag set but descriptor_dim is zero");
    if (use_mean_net) {
        mean_arch.validate();
        if (mean_arch.input_dim() != input_dim())
            throw ConfigError("NgpConfig: mean net input dim " + std::to_string(mean_arch.input_dim()) +
                              " != expected " + std::to_string(input_dim()));
        if (mean_arch.output_dim() != 1) throw ConfigError("NgpConfig: mean net must have one output");
    }
    if (use_embed_net) {
        embed_arch.validate();
        if (embed_arch.input_dim() != input_dim())
            throw ConfigError("NgpConfig: embedding net input dim " + std::to_string(embed_arch.input_dim()) +
                              " != expected " + std::to_string(input_dim()));
    }
}

NgpConfig NgpConfig::make(bool use_r, bool use_m, bool use_k, int feature_dim, int descriptor_dim,
                          int hidden, KernelKind kernel) {
    NgpConfig c;
    c.use_descriptor = use_r;
    c.use_mean_net = use_m;
    c.use_embed_net = use_k;
    c.feature_dim = feature_dim;
    c.descriptor_dim = descriptor_dim;
    c.kernel = kernel;
    const int in = c.input_dim();
    c.mean_arch = MlpArch{{in, hidden, hidden, 1}, Activation::Tanh};
    c.embed_arch = MlpArch{{in, hidden, hidden}, Activation::Tanh};
    c.validate();
    return c;
}

std::string NgpConfig::variant_name() const {
    if (!use_descriptor && !use_mean_net && !use_embed_net) return "TGP";
    std::string flags;
    if (use_descriptor) flags += 'R';
    if (use_mean_net) flags += 'M';
    if (use_embed_net) flags += 'K';
    return "NGP-" + flags;
}

Eigen::Index NgpModel::param_count() const {
    Eigen::Index n = 0;
    if (config.use_mean_net) n += mean_params.param_count();
    if (config.use_embed_net) n += embed_params.param_count();
    if (config.learn_amplitude) n += 1;
    n += 2; // log lengthscale, log noise
    return n;
}

Eigen::VectorXd NgpModel::pack_params() const {
    Eigen::VectorXd flat(param_count());
    Eigen::Index at = 0;
    if (config.use_mean_net) {
        flat.segment(at, mean_params.param_count()) = mean_params.pack();
        at += mean_params.param_count();
    }
    if (config.use_embed_net) {
        flat.segment(at, embed_params.param_count()) = embed_params.pack();
        at += embed_params.param_count();
    }
    if (config.learn_amplitude) flat(at++) = kernel_params.log_amplitude;
    flat(at++) = kernel_params.log_lengthscale;
    flat(at++) = log_noise_variance;
    return flat;
}

void NgpModel::unpack_params(const Eigen::Ref<const Eigen::VectorXd>& flat) {
    if (flat.size() != param_count()) throw ShapeError("NgpModel::unpack_params: wrong length");
    Eigen::Index at = 0;
    if (config.use_mean_net) {
        mean_params.unpack(flat.segment(at, mean_params.param_count()));
        at += mean_params.param_count();
    }
    if (config.use_embed_net) {
        embed_params.unpack(flat.segment(at, embed_params.param_count()));
        at += embed_params.param_count();
    }
    if (config.learn_amplitude) kernel_params.log_amplitude = flat(at++);
    kernel_params.log_lengthscale = flat(at++);
    log_noise_variance = flat(at++);
}

Eigen::VectorXd pack_gradient(const NgpModel& model, const NgpGradient& grad) {
    Eigen::VectorXd flat(model.param_count());
    Eigen::Index at = 0;
    if (model.config.use_mean_net) {
        const Eigen::VectorXd g = grad.mean.pack();
        flat.segment(at, g.size()) = g;
        at += g.size();
    }
    if (model.config.use_embed_net) {
        const Eigen::VectorXd g = grad.embed.pack();
        flat.segment(at, g.size()) = g;
        at += g.size();
    }
    if (model.config.learn_amplitude) flat(at++) = grad.d_log_amplitude;
    flat(at++) = grad.d_log_lengthscale;
    flat(at++) = grad.d_log_noise;
    return flat;
}

NgpModel init_ngp(const NgpConfig& config, std::uint64_t seed) {
    config.validate();
    NgpModel m;
    m.config = config;
    if (config.use_mean_net) m.mean_params = init_params(config.mean_arch, mix_seed(seed, 101));
    if (config.use_embed_net) m.embed_params = init_params(config.embed_arch, mix_seed(seed, 202));
    m.kernel_params.kind = config.kernel;
    return m;
}

Eigen::VectorXd task_input(const NgpConfig& config, const Eigen::Ref<const Eigen::VectorXd>& x,
                           const Eigen::Ref<const Eigen::VectorXd>& r) {
    if (x.size() != config.feature_dim)
        throw ShapeError("task_input: feature length " + std::to_string(x.size()) + " != feature_dim " +
                         std::to_string(config.feature_dim));
    if (!config.use_descriptor) return x;
    if (r.size() != config.descriptor_dim)
        throw ConfigError("task_input: descriptor required (dim " + std::to_string(config.descriptor_dim) +
                          ") but got length " + std::to_string(r.size()));
    Eigen::VectorXd u(x.size() + r.size());
    u << x, r;
    return u;
}

Eigen::MatrixXd task_inputs(const NgpConfig& config, const Eigen::Ref<const Eigen::MatrixXd>& x,
                            const Eigen::Ref<const Eigen::VectorXd>& r) {
    if (x.cols() != config.feature_dim)
        throw ShapeError("task_inputs: feature dim " + std::to_string(x.cols()) + " != feature_dim " +
                         std::to_string(config.feature_dim));
    if (!config.use_descriptor) return x;
    if (r.size() != config.descriptor_dim)
        throw ConfigError("task_inputs: descriptor required (dim " + std::to_string(config.descriptor_dim) +
                          ") but got length " + std::to_string(r.size()));
    Eigen::MatrixXd u(x.rows(), x.cols() + r.size());
    u.leftCols(x.cols()) = x;
    u.rightCols(r.size()).rowwise() = r.transpose();
    return u;
}

Eigen::VectorXd mean_vector(const NgpModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x,
                            const Eigen::Ref<const Eigen::VectorXd>& r) {
    if (!model.config.use_mean_net) return Eigen::VectorXd::Zero(x.rows());
    const Eigen::MatrixXd u = task_inputs(model.config, x, r);
    Eigen::VectorXd m(x.rows());
    for (Eigen::Index i = 0; i < u.rows(); ++i) m(i) = mlp_forward(model.mean_params, u.row(i))(0);
    return m;
}

Eigen::MatrixXd embed_matrix(const NgpModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x,
                             const Eigen::Ref<const Eigen::VectorXd>& r) {
    const Eigen::MatrixXd u = task_inputs(model.config, x, r);
    if (!model.config.use_embed_net) return u;
    Eigen::MatrixXd z(u.rows(), model.config.embed_arch.output_dim());
    for (Eigen::Index i = 0; i < u.rows(); ++i) z.row(i) = mlp_forward(model.embed_params, u.row(i)).transpose();
    return z;
}

Eigen::LLT<Eigen::MatrixXd> cholesky_with_jitter(const Eigen::MatrixXd& a, const std::string& context) {
    Eigen::MatrixXd jittered = a;
    double jitter = kJitterStart;
    while (jitter <= kJitterMax) {
        jittered = a;
        jittered.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(jittered);
        if (llt.info() == Eigen::Success) return llt;
        jitter *= 10.0;
    }
    throw NumericError("Cholesky failed after jitter escalation to 1e-4 (" + context + ")");
}

namespace {

struct TaskForward {
    Eigen::MatrixXd inputs;  // n x input_dim
    Eigen::VectorXd mean;    // n
    Eigen::MatrixXd embed;   // n x embed_dim
    std::vector<MlpForwardCache> mean_caches;
    std::vector<MlpForwardCache> embed_caches;
};

TaskForward forward_task(const NgpModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x,
                         const Eigen::Ref<const Eigen::VectorXd>& r, bool keep_caches) {
    const auto& cfg = model.config;
    TaskForward f;
    f.inputs = task_inputs(cfg, x, r);
    const Eigen::Index n = f.inputs.rows();
    f.mean = Eigen::VectorXd::Zero(n);
    if (cfg.use_mean_net) {
        if (keep_caches) f.mean_caches.resize(n);
        for (Eigen::Index i = 0; i < n; ++i)
            f.mean(i) = mlp_forward(model.mean_params, f.inputs.row(i),
                                    keep_caches ? &f.mean_caches[i] : nullptr)(0);
    }
    if (cfg.use_embed_net) {
        f.embed.resize(n, cfg.embed_arch.output_dim());
        if (keep_caches) f.embed_caches.resize(n);
        for (Eigen::Index i = 0; i < n; ++i)
            f.embed.row(i) = mlp_forward(model.embed_params, f.inputs.row(i),
                                         keep_caches ? &f.embed_caches[i] : nullptr)
                                 .transpose();
    } else {
        f.embed = f.inputs;
    }
    return f;
}

void check_task_dims(const NgpModel& model, const Task& task) {
    if (task.m() != model.config.feature_dim)
        throw ShapeError("task '" + task.id + "': feature dim " + std::to_string(task.m()) +
                         " != model feature_dim " + std::to_string(model.config.feature_dim));
    if (model.config.use_descriptor && task.s() != model.config.descriptor_dim)
        throw ConfigError("task '" + task.id + "': descriptor dim " + std::to_string(task.s()) +
                          " != model descriptor_dim " + std::to_string(model.config.descriptor_dim));
}

} // namespace

double log_marginal_likelihood(const NgpModel& model, const Task& task) {
    check_task_dims(model, task);
    const Eigen::Index n = task.n();
    if (n < 1) throw ContractError("log_marginal_likelihood: task has no observations");

    const TaskForward f = forward_task(model, task.x, task.r, false);
    Eigen::MatrixXd c = kernel_matrix(model.kernel_params, f.embed, f.embed);
    c.diagonal().array() += model.noise_variance();
    const auto llt = cholesky_with_jitter(c, "task '" + task.id + "'");

    const Eigen::VectorXd resid = task.y - f.mean;
    const Eigen::VectorXd alpha = llt.solve(resid);
    const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    return -0.5 * (static_cast<double>(n) * std::log(2.0 * M_PI) + log_det + resid.dot(alpha));
}

NgpGradient lml_gradient(const NgpModel& model, const Task& task) {
    check_task_dims(model, task);
    const Eigen::Index n = task.n();
    if (n < 1) throw ContractError("lml_gradient: task has no observations");
    const auto& cfg = model.config;

    const TaskForward f = forward_task(model, task.x, task.r, true);
    Eigen::MatrixXd c = kernel_matrix(model.kernel_params, f.embed, f.embed);
    const double noise = model.noise_variance();
    c.diagonal().array() += noise;
    const auto llt = cholesky_with_jitter(c, "task '" + task.id + "'");

    const Eigen::VectorXd resid = task.y - f.mean;
    const Eigen::VectorXd alpha = llt.solve(resid);
    const Eigen::MatrixXd a_inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
    const Eigen::MatrixXd dl_dk = 0.5 * (alpha * alpha.transpose() - a_inv);

    NgpGradient grad;
    if (cfg.use_mean_net) {
        grad.mean = MlpGrads::zeros_like(model.mean_params);
        Eigen::VectorXd g_out(1);
        for (Eigen::Index i = 0; i < n; ++i) {
            g_out(0) = alpha(i); // dL/dm_i
            auto [g, g_in] = mlp_backward(model.mean_params, f.mean_caches[i], g_out);
            grad.mean.accumulate(g);
        }
    }

    const KernelMatrixGrads kg = kernel_matrix_grads(model.kernel_params, f.embed, dl_dk);
    grad.d_log_amplitude = cfg.learn_amplitude ? kg.d_log_amplitude : 0.0;
    grad.d_log_lengthscale = kg.d_log_lengthscale;
    if (cfg.use_embed_net) {
        grad.embed = MlpGrads::zeros_like(model.embed_params);
        for (Eigen::Index i = 0; i < n; ++i) {
            auto [g, g_in] = mlp_backward(model.embed_params, f.embed_caches[i], kg.d_z.row(i).transpose());
            grad.embed.accumulate(g);
        }
    }
    grad.d_log_noise = dl_dk.trace() * noise;
    return grad;
}

Posterior posterior(const NgpModel& model, const Eigen::Ref<const Eigen::VectorXd>& r_target,
                    const Eigen::Ref<const Eigen::MatrixXd>& x_obs,
                    const Eigen::Ref<const Eigen::VectorXd>& y_obs,
                    const Eigen::Ref<const Eigen::MatrixXd>& x_query, bool include_observation_noise) {
    if (x_obs.rows() != y_obs.size()) throw ShapeError("posterior: observation rows != value count");
    if (x_obs.rows() > 0 && x_obs.cols() != x_query.cols())
        throw ShapeError("posterior: observation and query dims differ");

    const TaskForward fq = forward_task(model, x_query, r_target, false);
    Eigen::VectorXd prior_var = kernel_diag(model.kernel_params, fq.embed);

    Posterior post;
    const Eigen::Index n = x_obs.rows();
    if (n == 0) {
        post.mean = fq.mean;
        post.variance = prior_var;
    } else {
        const TaskForward fo = forward_task(model, x_obs, r_target, false);
        Eigen::MatrixXd c = kernel_matrix(model.kernel_params, fo.embed, fo.embed);
        c.diagonal().array() += model.noise_variance();
        const auto llt = cholesky_with_jitter(c, "posterior conditioning");

        const Eigen::MatrixXd k_cross = kernel_matrix(model.kernel_params, fo.embed, fq.embed); // n x q
        const Eigen::VectorXd alpha = llt.solve(y_obs - fo.mean);
        post.mean = fq.mean + k_cross.transpose() * alpha;

        const Eigen::MatrixXd v = llt.matrixL().solve(k_cross);
        post.variance = prior_var - v.colwise().squaredNorm().transpose();
    }

    for (Eigen::Index i = 0; i < post.variance.size(); ++i) {
        if (post.variance(i) < 0.0) {
            if (post.variance(i) < kVarianceClamp)
                throw NumericError("posterior: variance " + std::to_string(post.variance(i)) +
                                   " below clamp threshold at query " + std::to_string(i));
            post.variance(i) = 0.0;
        }
    }
    if (include_observation_noise) post.variance.array() += model.noise_variance();
    return post;
}

} // namespace ngpbo
