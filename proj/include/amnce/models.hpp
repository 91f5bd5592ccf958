#ifndef AMNCE_MODELS_HPP
#define AMNCE_MODELS_HPP

#include <vector>

#include "amnce/mlp.hpp"

namespace amnce {

// Scalar-output network f; the modeled density ratio is exp(f), positive by
// construction. Once frozen at a stage transition the parameters never change.
struct RatioEstimator {
    Mlp net;
    bool frozen = false;
    mutable std::size_t eval_count = 0;  // forward invocations, for diagnostics

    // f(z) per row -> [batch].
    Tensor log_ratio(const Tensor& z) const;
    // d f(z) / d z -> [batch, d].
    Tensor log_ratio_grad_z(const Tensor& z) const;

    std::size_t latent_dim() const { return net.in_dim(); }
};

RatioEstimator make_ratio_estimator(std::size_t latent_dim, const std::vector<std::size_t>& hidden,
                                    double leaky_slope, Rng& rng);

// Unit-Gaussian base times an ordered product of frozen per-stage ratios.
struct StackedPrior {
    std::size_t latent_dim = 0;
    std::vector<RatioEstimator> stages;

    std::size_t num_stages() const { return stages.size(); }
    void push_stage(RatioEstimator estimator);  // estimator must be frozen
    StackedPrior truncated(std::size_t k) const;
};

// Sum of stage outputs plus the normalized Gaussian base term:
// sum_i f_i(z) - |z|^2 / 2 - (d/2) log(2 pi), per row. Unnormalized once any
// stage is present; only differences and ratios of these values are ever
// interpreted downstream.
Tensor prior_log_density_unnorm(const StackedPrior& prior, const Tensor& z);

// Gradient of prior_log_density_unnorm in z: -z plus the stage input-grads.
Tensor prior_grad_z(const StackedPrior& prior, const Tensor& z);

// Decoder with isotropic Gaussian observation noise of fixed std sigma.
struct GeneratorModel {
    Mlp decoder;
    double sigma = 0.3;

    std::size_t latent_dim() const { return decoder.in_dim(); }
    std::size_t data_dim() const { return decoder.out_dim(); }
    Tensor decode(const Tensor& z, ForwardTape* tape = nullptr) const;
};

GeneratorModel make_generator(std::size_t latent_dim, const std::vector<std::size_t>& hidden,
                              std::size_t data_dim, double leaky_slope, double sigma, Rng& rng);

// -|x - g(z)|^2 / (2 sigma^2) - (D/2) log(2 pi sigma^2), per row.
Tensor decoder_log_likelihood(const GeneratorModel& gen, const Tensor& x, const Tensor& z);

Tensor log_joint(const GeneratorModel& gen, const StackedPrior& prior, const Tensor& x, const Tensor& z);

// Gradient of log_joint in z: prior score plus J_g(z)^T (x - g(z)) / sigma^2.
Tensor posterior_grad_z(const GeneratorModel& gen, const StackedPrior& prior, const Tensor& x,
                        const Tensor& z);

}  // namespace amnce

#endif
