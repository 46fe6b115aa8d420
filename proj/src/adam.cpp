#include "ngpbo/adam.hpp"

#include <cmath>
#include <string>

namespace ngpbo {

AdamState AdamState::create(Eigen::Index dim, double lr) {
    AdamState s;
    s.first_moment = Eigen::VectorXd::Zero(dim);
    s.second_moment = Eigen::VectorXd::Zero(dim);
    s.lr = lr;
    return s;
}

void adam_step(AdamState& state, Eigen::VectorXd& params,
               const Eigen::Ref<const Eigen::VectorXd>& grads) {
    if (params.size() != state.first_moment.size() || grads.size() != params.size())
        throw ShapeError("adam_step: params/grads/state sizes disagree");
    for (Eigen::Index i = 0; i < grads.size(); ++i)
        if (!std::isfinite(grads(i)))
            throw NumericError("adam_step: non-finite gradient entry at flat index " + std::to_string(i));

    state.step_count += 1;
    state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads;
    state.second_moment =
        (state.beta2 * state.second_moment.array() + (1.0 - state.beta2) * grads.array().square()).matrix();

    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    params.array() -= state.lr * (state.first_moment.array() / bc1) /
                      ((state.second_moment.array() / bc2).sqrt() + state.epsilon);
}

} // namespace ngpbo
