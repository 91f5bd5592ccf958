#include "amnce/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace amnce {

AdamState make_adam(const std::vector<const Tensor*>& params, double lr) {
    if (lr <= 0.0) throw std::runtime_error("adam: learning rate must be positive");
    AdamState state;
    state.lr = lr;
    state.first_moment.reserve(params.size());
    state.second_moment.reserve(params.size());
    for (const Tensor* p : params) {
        state.first_moment.push_back(Tensor::zeros(p->shape));
        state.second_moment.push_back(Tensor::zeros(p->shape));
    }
    return state;
}

void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
        throw std::runtime_error("adam: parameter/gradient/moment count mismatch");
    }
    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = *params[pi];
        const Tensor& g = grads[pi];
        Tensor& m = state.first_moment[pi];
        Tensor& v = state.second_moment[pi];
        if (!p.same_shape(g) || !p.same_shape(m)) {
            throw std::runtime_error("adam: shape mismatch at parameter " + std::to_string(pi));
        }
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            m.data[i] = state.beta1 * m.data[i] + (1.0 - state.beta1) * g.data[i];
            v.data[i] = state.beta2 * v.data[i] + (1.0 - state.beta2) * g.data[i] * g.data[i];
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            p.data[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
        require_finite(p, "adam: updated parameter " + std::to_string(pi));
    }
}

}  // namespace amnce
