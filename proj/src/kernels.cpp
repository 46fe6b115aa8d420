#include "ngpbo/kernels.hpp"

#include <cmath>

namespace ngpbo {

KernelKind kernel_kind_from_string(const std::string& name) {
    if (name == "rbf") return KernelKind::Rbf;
    if (name == "linear") return KernelKind::Linear;
    throw ConfigError("unknown kernel kind '" + name + "'");
}

std::string to_string(KernelKind k) {
    return k == KernelKind::Rbf ? "rbf" : "linear";
}

double kernel_eval(const KernelParams& p, const Eigen::Ref<const Eigen::VectorXd>& z,
                   const Eigen::Ref<const Eigen::VectorXd>& z2) {
    if (z.size() != z2.size()) throw ShapeError("kernel_eval: input lengths differ");
    const double amp = p.amplitude();
    if (p.kind == KernelKind::Linear) return amp * z.dot(z2);
    const double ell = p.lengthscale();
    return amp * std::exp(-(z - z2).squaredNorm() / (2.0 * ell * ell));
}

Eigen::MatrixXd kernel_matrix(const KernelParams& p, const Eigen::Ref<const Eigen::MatrixXd>& z,
                              const Eigen::Ref<const Eigen::MatrixXd>& z2) {
    if (z.cols() != z2.cols()) throw ShapeError("kernel_matrix: column counts differ");
    const double amp = p.amplitude();
    const bool self = z.data() == z2.data() && z.rows() == z2.rows();

    if (p.kind == KernelKind::Linear) {
        if (!self) return amp * (z * z2.transpose());
        Eigen::MatrixXd k = amp * (z * z.transpose());
        return ((k + k.transpose()) / 2.0).eval(); // exact symmetry
    }

    const double inv_two_ell2 = 1.0 / (2.0 * p.lengthscale() * p.lengthscale());
    if (self) {
        // Mirror the upper triangle so the Gram matrix is exactly symmetric.
        const Eigen::Index n = z.rows();
        Eigen::MatrixXd k(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            k(i, i) = amp;
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const double v = amp * std::exp(-(z.row(i) - z.row(j)).squaredNorm() * inv_two_ell2);
                k(i, j) = v;
                k(j, i) = v;
            }
        }
        return k;
    }
    // ||zi - zj||^2 = |zi|^2 + |zj|^2 - 2 zi.zj
    Eigen::VectorXd zn = z.rowwise().squaredNorm();
    Eigen::VectorXd z2n = z2.rowwise().squaredNorm();
    Eigen::MatrixXd sq = (-2.0 * (z * z2.transpose())).colwise() + zn;
    sq.rowwise() += z2n.transpose();
    return amp * (-(sq.cwiseMax(0.0)) * inv_two_ell2).array().exp();
}

Eigen::VectorXd kernel_diag(const KernelParams& p, const Eigen::Ref<const Eigen::MatrixXd>& z) {
    const double amp = p.amplitude();
    if (p.kind == KernelKind::Linear) return amp * z.rowwise().squaredNorm();
    return Eigen::VectorXd::Constant(z.rows(), amp);
}

KernelGrads kernel_grads(const KernelParams& p, const Eigen::Ref<const Eigen::VectorXd>& z,
                         const Eigen::Ref<const Eigen::VectorXd>& z2) {
    if (z.size() != z2.size()) throw ShapeError("kernel_grads: input lengths differ");
    KernelGrads g;
    const double value = kernel_eval(p, z, z2);
    g.d_log_amplitude = value; // value is linear in exp(log_amplitude)
    if (p.kind == KernelKind::Linear) {
        const double amp = p.amplitude();
        g.d_z = amp * z2;
        g.d_z2 = amp * z;
        g.d_log_lengthscale = 0.0;
        return g;
    }
    const double ell2 = p.lengthscale() * p.lengthscale();
    const Eigen::VectorXd diff = z - z2;
    g.d_z = -(value / ell2) * diff;
    g.d_z2 = (value / ell2) * diff;
    g.d_log_lengthscale = value * diff.squaredNorm() / ell2;
    return g;
}

KernelMatrixGrads kernel_matrix_grads(const KernelParams& p,
                                      const Eigen::Ref<const Eigen::MatrixXd>& z,
                                      const Eigen::Ref<const Eigen::MatrixXd>& g) {
    if (g.rows() != z.rows() || g.cols() != z.rows())
        throw ShapeError("kernel_matrix_grads: upstream gradient must be n x n");
    KernelMatrixGrads out;
    const Eigen::MatrixXd k = kernel_matrix(p, z, z);

    if (p.kind == KernelKind::Linear) {
        const double amp = p.amplitude();
        out.d_z = 2.0 * amp * (g * z); // relies on g symmetric
        out.d_log_amplitude = (g.array() * k.array()).sum();
        out.d_log_lengthscale = 0.0;
        return out;
    }

    const double ell2 = p.lengthscale() * p.lengthscale();
    const Eigen::MatrixXd w = g.cwiseProduct(k); // w_ij = g_ij k_ij, symmetric
    // dL/dz_p = 2/ell^2 sum_j w_pj (z_j - z_p)
    const Eigen::VectorXd row_sums = w.rowwise().sum();
    out.d_z = (2.0 / ell2) * (w * z - row_sums.asDiagonal() * z);
    out.d_log_amplitude = w.sum();

    Eigen::VectorXd zn = z.rowwise().squaredNorm();
    Eigen::MatrixXd sq = (-2.0 * (z * z.transpose())).colwise() + zn;
    sq.rowwise() += zn.transpose();
    out.d_log_lengthscale = (w.array() * sq.cwiseMax(0.0).array()).sum() / ell2;
    return out;
}

} // namespace ngpbo
