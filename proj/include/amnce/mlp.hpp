#ifndef AMNCE_MLP_HPP
#define AMNCE_MLP_HPP

#include <functional>
#include <vector>

#include "amnce/rng.hpp"
#include "amnce/tensor.hpp"

namespace amnce {

enum class Activation { LeakyRelu, Tanh, Identity };

struct LinearLayer {
    Tensor weight;  // [out, in]
    Tensor bias;    // [out]
    Activation activation = Activation::Identity;
    double leaky_slope = 0.1;

    std::size_t in_dim() const { return weight.cols(); }
    std::size_t out_dim() const { return weight.rows(); }
};

// Fixed-topology fully connected network: affine + activation per layer.
struct Mlp {
    std::vector<LinearLayer> layers;

    std::size_t in_dim() const;
    std::size_t out_dim() const;
    std::size_t param_count() const;

    // Parameter tensors in fixed order: w0, b0, w1, b1, ...
    std::vector<Tensor*> params();
    std::vector<const Tensor*> params() const;

    void validate() const;  // consecutive layer dims must chain
};

// dims = {in, hidden..., out}; hidden layers use `hidden`, last layer `output`.
Mlp make_mlp(const std::vector<std::size_t>& dims, Activation hidden, double hidden_slope,
             Activation output);

// Cached activations from one forward call; consumed by mlp_backward.
struct ForwardTape {
    Tensor input;
    std::vector<Tensor> preacts;  // per layer, [batch, out]
    std::vector<Tensor> outputs;  // per layer, post-activation
};

struct MlpGrads {
    std::vector<Tensor> params;  // same order as Mlp::params()
    Tensor input;                // [batch, in]
};

// Applies the affine+activation chain row-wise; fills `tape` when given.
Tensor mlp_forward(const Mlp& net, const Tensor& input, ForwardTape* tape = nullptr);

// Exact reverse-mode gradients of sum_b <output[b], output_grad[b]> with
// respect to all parameters and the input. The leaky-ReLU derivative at
// exactly zero is taken as the positive branch (1.0).
MlpGrads mlp_backward(const Mlp& net, const ForwardTape& tape, const Tensor& output_grad);

// Weights uniform on +-sqrt(6 / (fan_in + fan_out)); biases zero.
void xavier_init(Mlp& net, Rng& rng);

// Max over coordinates of |central_diff - analytic| / (|analytic| + 1e-8).
double finite_difference_check(const std::function<double(const Tensor&)>& fn, const Tensor& point,
                               const Tensor& analytic_grad, double h);

// Validates mlp_backward against central differences (h = 1e-5) over
// `num_configs` random networks covering all activation kinds, dims up to 32
// and depth up to 3; returns the worst relative error seen across parameter
// and input gradients.
double gradient_suite_max_rel_error(std::uint64_t seed, std::size_t num_configs);

}  // namespace amnce

#endif
