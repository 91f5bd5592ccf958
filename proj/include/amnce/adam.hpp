#ifndef AMNCE_ADAM_HPP
#define AMNCE_ADAM_HPP

#include <vector>

#include "amnce/tensor.hpp"

namespace amnce {

struct AdamState {
    std::size_t step_count = 0;
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Zeroed moments shaped like `params`.
AdamState make_adam(const std::vector<const Tensor*>& params, double lr);

// Standard Adam update with bias correction; increments step_count.
void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, AdamState& state);

}  // namespace amnce

#endif
