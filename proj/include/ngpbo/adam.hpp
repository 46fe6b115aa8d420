#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "ngpbo/common.hpp"

namespace ngpbo {

/// Adam optimizer state over a flat parameter vector. Moments have the same
/// length as the parameters they track; step_count increments by exactly one
/// per adam_step.
struct AdamState {
    std::int64_t step_count = 0;
    Eigen::VectorXd first_moment;
    Eigen::VectorXd second_moment;
    double lr = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState create(Eigen::Index dim, double lr = 1e-2);
};

/// One bias-corrected Adam update, minimizing. Throws NumericError naming the
/// offending index if any gradient entry is non-finite.
void adam_step(AdamState& state, Eigen::VectorXd& params,
               const Eigen::Ref<const Eigen::VectorXd>& grads);

} // namespace ngpbo
