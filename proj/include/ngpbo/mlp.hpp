#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ngpbo/common.hpp"

namespace ngpbo {

enum class Activation { Tanh, Relu, Linear };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);

/// Feedforward architecture. layer_sizes runs input -> hidden... -> output;
/// `activation` applies to hidden layers only, the output layer is linear.
struct MlpArch {
    std::vector<int> layer_sizes;
    Activation activation = Activation::Tanh;

    int input_dim() const { return layer_sizes.front(); }
    int output_dim() const { return layer_sizes.back(); }
    int num_weight_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }

    void validate() const; // throws ConfigError
    bool operator==(const MlpArch&) const = default;
};

/// Weights are out x in per layer; biases one vector per layer.
struct MlpParams {
    MlpArch arch;
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    Eigen::Index param_count() const;
    Eigen::VectorXd pack() const;               // layer by layer: W row-major, then b
    void unpack(const Eigen::Ref<const Eigen::VectorXd>& flat);
    void validate() const;
};

/// Gradient holder with the same layout as MlpParams.
struct MlpGrads {
    std::vector<Eigen::MatrixXd> d_weights;
    std::vector<Eigen::VectorXd> d_biases;

    static MlpGrads zeros_like(const MlpParams& p);
    void accumulate(const MlpGrads& other);
    Eigen::VectorXd pack() const;
};

/// Per-layer pre/post activations kept by mlp_forward for the backward pass.
struct MlpForwardCache {
    Eigen::VectorXd input;
    std::vector<Eigen::VectorXd> pre;  // affine outputs z_l
    std::vector<Eigen::VectorXd> post; // activations a_l; post.back() is the output
};

/// Uniform Glorot-style init: weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
/// biases zero. Deterministic in (arch, seed).
MlpParams init_params(const MlpArch& arch, std::uint64_t seed);

/// Forward pass; fills `cache` when non-null.
Eigen::VectorXd mlp_forward(const MlpParams& params,
                            const Eigen::Ref<const Eigen::VectorXd>& input,
                            MlpForwardCache* cache = nullptr);

/// Exact reverse-mode pass: returns (d(grad_output . output)/d params,
/// d(grad_output . output)/d input) for a cache produced by mlp_forward
/// with these params.
std::pair<MlpGrads, Eigen::VectorXd> mlp_backward(const MlpParams& params,
                                                  const MlpForwardCache& cache,
                                                  const Eigen::Ref<const Eigen::VectorXd>& grad_output);

/// Label like "layer 1 weights" for a flat pack() index; used in error messages.
std::string param_block_at(const MlpArch& arch, Eigen::Index flat_index);

/// Rewrites the first layer in place so the net consumes raw inputs while
/// computing exactly what it computed on (input - mean) / std. Exact because
/// the first layer is affine.
void fold_input_standardization(MlpParams& params, const Eigen::Ref<const Eigen::VectorXd>& input_mean,
                                const Eigen::Ref<const Eigen::VectorXd>& input_std);

} // namespace ngpbo
