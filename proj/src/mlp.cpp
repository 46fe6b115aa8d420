#include "ngpbo/mlp.hpp"

#include <cmath>

#include "ngpbo/rng.hpp"

namespace ngpbo {

Activation activation_from_string(const std::string& name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    if (name == "linear") return Activation::Linear;
    throw ConfigError("unknown activation '" + name + "'");
}

std::string to_string(Activation a) {
    switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Linear: return "linear";
    }
    throw ConfigError("invalid activation enum value");
}

void MlpArch::validate() const {
    if (layer_sizes.size() < 2) throw ConfigError("MlpArch needs at least input and output sizes");
    for (int s : layer_sizes)
        if (s < 1) throw ConfigError("MlpArch layer sizes must be positive");
}

Eigen::Index MlpParams::param_count() const {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
}

Eigen::VectorXd MlpParams::pack() const {
    Eigen::VectorXd flat(param_count());
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        const auto& w = weights[l];
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) flat(at++) = w(i, j);
        for (Eigen::Index i = 0; i < biases[l].size(); ++i) flat(at++) = biases[l](i);
    }
    return flat;
}

void MlpParams::unpack(const Eigen::Ref<const Eigen::VectorXd>& flat) {
    if (flat.size() != param_count()) throw ShapeError("flat parameter vector has wrong length");
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        auto& w = weights[l];
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = flat(at++);
        for (Eigen::Index i = 0; i < biases[l].size(); ++i) biases[l](i) = flat(at++);
    }
}

void MlpParams::validate() const {
    arch.validate();
    const std::size_t layers = static_cast<std::size_t>(arch.num_weight_layers());
    if (weights.size() != layers || biases.size() != layers)
        throw ShapeError("MlpParams layer count does not match arch");
    for (std::size_t l = 0; l < layers; ++l) {
        if (weights[l].rows() != arch.layer_sizes[l + 1] || weights[l].cols() != arch.layer_sizes[l])
            throw ShapeError("weight matrix " + std::to_string(l) + " has wrong shape");
        if (biases[l].size() != arch.layer_sizes[l + 1])
            throw ShapeError("bias vector " + std::to_string(l) + " has wrong length");
        if (!weights[l].allFinite() || !biases[l].allFinite())
            throw NumericError("non-finite parameter in layer " + std::to_string(l));
    }
}

MlpGrads MlpGrads::zeros_like(const MlpParams& p) {
    MlpGrads g;
    g.d_weights.reserve(p.weights.size());
    g.d_biases.reserve(p.biases.size());
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        g.d_weights.push_back(Eigen::MatrixXd::Zero(p.weights[l].rows(), p.weights[l].cols()));
        g.d_biases.push_back(Eigen::VectorXd::Zero(p.biases[l].size()));
    }
    return g;
}

void MlpGrads::accumulate(const MlpGrads& other) {
    for (std::size_t l = 0; l < d_weights.size(); ++l) {
        d_weights[l] += other.d_weights[l];
        d_biases[l] += other.d_biases[l];
    }
}

Eigen::VectorXd MlpGrads::pack() const {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < d_weights.size(); ++l) n += d_weights[l].size() + d_biases[l].size();
    Eigen::VectorXd flat(n);
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < d_weights.size(); ++l) {
        const auto& w = d_weights[l];
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) flat(at++) = w(i, j);
        for (Eigen::Index i = 0; i < d_biases[l].size(); ++i) flat(at++) = d_biases[l](i);
    }
    return flat;
}

MlpParams init_params(const MlpArch& arch, std::uint64_t seed) {
    arch.validate();
    Rng rng(seed);
    MlpParams p;
    p.arch = arch;
    for (int l = 0; l < arch.num_weight_layers(); ++l) {
        const int fan_in = arch.layer_sizes[l];
        const int fan_out = arch.layer_sizes[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Eigen::MatrixXd w(fan_out, fan_in);
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-bound, bound);
        p.weights.push_back(std::move(w));
        p.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    return p;
}

namespace {

inline Eigen::VectorXd apply_activation(Activation a, const Eigen::VectorXd& z) {
    switch (a) {
    case Activation::Tanh: return z.array().tanh();
    case Activation::Relu: return z.cwiseMax(0.0);
    case Activation::Linear: return z;
    }
    throw ConfigError("invalid activation enum value");
}

// Derivative in terms of the cached pre/post activations.
inline Eigen::VectorXd activation_grad(Activation a, const Eigen::VectorXd& pre,
                                       const Eigen::VectorXd& post) {
    switch (a) {
    case Activation::Tanh: return 1.0 - post.array().square();
    case Activation::Relu: return (pre.array() > 0.0).cast<double>();
    case Activation::Linear: return Eigen::VectorXd::Ones(pre.size());
    }
    throw ConfigError("invalid activation enum value");
}

} // namespace

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::Ref<const Eigen::VectorXd>& input,
                            MlpForwardCache* cache) {
    const auto& arch = params.arch;
    if (input.size() != arch.input_dim())
        throw ShapeError("mlp_forward: input length " + std::to_string(input.size()) +
                         " != arch input dim " + std::to_string(arch.input_dim()));
    const int layers = arch.num_weight_layers();
    if (cache) {
        cache->input = input;
        cache->pre.assign(static_cast<std::size_t>(layers), {});
        cache->post.assign(static_cast<std::size_t>(layers), {});
    }
    Eigen::VectorXd a = input;
    for (int l = 0; l < layers; ++l) {
        Eigen::VectorXd z = params.weights[l] * a + params.biases[l];
        a = (l + 1 < layers) ? apply_activation(arch.activation, z) : z;
        if (cache) {
            cache->pre[l] = z;
            cache->post[l] = a;
        }
    }
    return a;
}

std::pair<MlpGrads, Eigen::VectorXd> mlp_backward(const MlpParams& params, const MlpForwardCache& cache,
                                                  const Eigen::Ref<const Eigen::VectorXd>& grad_output) {
    const auto& arch = params.arch;
    const int layers = arch.num_weight_layers();
    if (static_cast<int>(cache.pre.size()) != layers || static_cast<int>(cache.post.size()) != layers ||
        cache.input.size() != arch.input_dim())
        throw ContractError("mlp_backward: cache does not match params");
    for (int l = 0; l < layers; ++l)
        if (cache.pre[l].size() != arch.layer_sizes[l + 1])
            throw ContractError("mlp_backward: cache layer " + std::to_string(l) + " has wrong width");
    if (grad_output.size() != arch.output_dim())
        throw ShapeError("mlp_backward: grad_output length != output dim");

    MlpGrads grads = MlpGrads::zeros_like(params);
    Eigen::VectorXd delta = grad_output; // output layer is linear
    for (int l = layers - 1; l >= 0; --l) {
        const Eigen::VectorXd& layer_in = (l == 0) ? cache.input : cache.post[l - 1];
        grads.d_weights[l] = delta * layer_in.transpose();
        grads.d_biases[l] = delta;
        if (l > 0) {
            Eigen::VectorXd upstream = params.weights[l].transpose() * delta;
            delta = upstream.cwiseProduct(activation_grad(arch.activation, cache.pre[l - 1], cache.post[l - 1]));
        } else {
            delta = params.weights[0].transpose() * delta;
        }
    }
    return {std::move(grads), std::move(delta)};
}

void fold_input_standardization(MlpParams& params, const Eigen::Ref<const Eigen::VectorXd>& input_mean,
                                const Eigen::Ref<const Eigen::VectorXd>& input_std) {
    if (input_mean.size() != params.arch.input_dim() || input_std.size() != params.arch.input_dim())
        throw ShapeError("fold_input_standardization: scaler length != input dim");
    if ((input_std.array() <= 0.0).any())
        throw ContractError("fold_input_standardization: non-positive std entry");
    Eigen::MatrixXd& w = params.weights.front();
    w = w * input_std.cwiseInverse().asDiagonal();
    params.biases.front() -= w * input_mean;
}

std::string param_block_at(const MlpArch& arch, Eigen::Index flat_index) {
    Eigen::Index at = 0;
    for (int l = 0; l < arch.num_weight_layers(); ++l) {
        const Eigen::Index w_len = static_cast<Eigen::Index>(arch.layer_sizes[l]) * arch.layer_sizes[l + 1];
        if (flat_index < at + w_len) return "layer " + std::to_string(l) + " weights";
        at += w_len;
        if (flat_index < at + arch.layer_sizes[l + 1]) return "layer " + std::to_string(l) + " biases";
        at += arch.layer_sizes[l + 1];
    }
    return "out of range";
}

} // namespace ngpbo
