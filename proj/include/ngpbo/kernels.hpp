#pragma once

#include <Eigen/Dense>
#include <string>

#include "ngpbo/common.hpp"

namespace ngpbo {

enum class KernelKind { Rbf, Linear };

KernelKind kernel_kind_from_string(const std::string& name);
std::string to_string(KernelKind k);

/// Log-parameterized so amplitude and lengthscale stay positive under
/// unconstrained training. The lengthscale is ignored by the linear kernel.
struct KernelParams {
    double log_amplitude = 0.0;
    double log_lengthscale = 0.0;
    KernelKind kind = KernelKind::Rbf;

    double amplitude() const { return std::exp(log_amplitude); }
    double lengthscale() const { return std::exp(log_lengthscale); }
};

/// rbf: amp * exp(-||z-z2||^2 / (2 l^2)); linear: amp * (z . z2).
double kernel_eval(const KernelParams& p, const Eigen::Ref<const Eigen::VectorXd>& z,
                   const Eigen::Ref<const Eigen::VectorXd>& z2);

/// Gram matrix with entry (i, j) = k(row i of z, row j of z2).
Eigen::MatrixXd kernel_matrix(const KernelParams& p, const Eigen::Ref<const Eigen::MatrixXd>& z,
                              const Eigen::Ref<const Eigen::MatrixXd>& z2);

/// k(z_i, z_i) per row; cheaper than the full Gram diagonal.
Eigen::VectorXd kernel_diag(const KernelParams& p, const Eigen::Ref<const Eigen::MatrixXd>& z);

struct KernelGrads {
    Eigen::VectorXd d_z;
    Eigen::VectorXd d_z2;
    double d_log_amplitude = 0.0;
    double d_log_lengthscale = 0.0;
};

/// Exact partials of kernel_eval with respect to both inputs and both
/// log-parameters.
KernelGrads kernel_grads(const KernelParams& p, const Eigen::Ref<const Eigen::VectorXd>& z,
                         const Eigen::Ref<const Eigen::VectorXd>& z2);

struct KernelMatrixGrads {
    Eigen::MatrixXd d_z; // same shape as z
    double d_log_amplitude = 0.0;
    double d_log_lengthscale = 0.0;
};

/// Chains an upstream gradient g = dL/dK through the symmetric Gram matrix
/// K(z, z): returns dL/dz and the hyperparameter partials. `g` must be
/// symmetric (as the marginal-likelihood gradient is).
KernelMatrixGrads kernel_matrix_grads(const KernelParams& p,
                                      const Eigen::Ref<const Eigen::MatrixXd>& z,
                                      const Eigen::Ref<const Eigen::MatrixXd>& g);

} // namespace ngpbo
