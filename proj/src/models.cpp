#include "amnce/models.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace amnce {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)

void require_latent(const Tensor& z, std::size_t d, const char* what) {
    if (z.rank() != 2 || z.cols() != d) {
        throw std::runtime_error(std::string(what) + ": expected [batch," + std::to_string(d) + "], got " +
                                 shape_string(z.shape));
    }
}
}  // namespace

Tensor RatioEstimator::log_ratio(const Tensor& z) const {
    ++eval_count;
    const Tensor out = mlp_forward(net, z);
    if (out.cols() != 1) throw std::runtime_error("ratio estimator: network output must be scalar");
    Tensor f({out.rows()});
    for (std::size_t b = 0; b < out.rows(); ++b) f.data[b] = out.data[b];
    return f;
}

Tensor RatioEstimator::log_ratio_grad_z(const Tensor& z) const {
    ++eval_count;
    ForwardTape tape;
    const Tensor out = mlp_forward(net, z, &tape);
    if (out.cols() != 1) throw std::runtime_error("ratio estimator: network output must be scalar");
    const Tensor ones = Tensor::full({z.rows(), 1}, 1.0);
    return mlp_backward(net, tape, ones).input;
}

RatioEstimator make_ratio_estimator(std::size_t latent_dim, const std::vector<std::size_t>& hidden,
                                    double leaky_slope, Rng& rng) {
    std::vector<std::size_t> dims;
    dims.push_back(latent_dim);
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(1);
    RatioEstimator est;
    est.net = make_mlp(dims, Activation::LeakyRelu, leaky_slope, Activation::Identity);
    xavier_init(est.net, rng);
    return est;
}

void StackedPrior::push_stage(RatioEstimator estimator) {
    if (!estimator.frozen) throw std::runtime_error("stacked prior: stage estimator must be frozen");
    if (estimator.latent_dim() != latent_dim) {
        throw std::runtime_error("stacked prior: stage latent dim mismatch");
    }
    stages.push_back(std::move(estimator));
}

StackedPrior StackedPrior::truncated(std::size_t k) const {
    if (k > stages.size()) throw std::runtime_error("stacked prior: truncation beyond stage count");
    StackedPrior out;
    out.latent_dim = latent_dim;
    out.stages.assign(stages.begin(), stages.begin() + static_cast<std::ptrdiff_t>(k));
    return out;
}

Tensor prior_log_density_unnorm(const StackedPrior& prior, const Tensor& z) {
    require_latent(z, prior.latent_dim, "prior log density");
    const std::size_t batch = z.rows();
    const double d = static_cast<double>(prior.latent_dim);
    Tensor out({batch});
    for (std::size_t b = 0; b < batch; ++b) {
        double sq = 0.0;
        for (std::size_t j = 0; j < prior.latent_dim; ++j) {
            const double v = z.at(b, j);
            sq += v * v;
        }
        out.data[b] = -0.5 * sq - 0.5 * d * kLog2Pi;
    }
    for (const auto& stage : prior.stages) {
        const Tensor f = stage.log_ratio(z);
        for (std::size_t b = 0; b < batch; ++b) out.data[b] += f.data[b];
    }
    require_finite(out, "prior log density");
    return out;
}

Tensor prior_grad_z(const StackedPrior& prior, const Tensor& z) {
    require_latent(z, prior.latent_dim, "prior grad");
    Tensor grad = -1.0 * z;
    for (const auto& stage : prior.stages) grad += stage.log_ratio_grad_z(z);
    require_finite(grad, "prior grad");
    return grad;
}

Tensor GeneratorModel::decode(const Tensor& z, ForwardTape* tape) const {
    return mlp_forward(decoder, z, tape);
}

GeneratorModel make_generator(std::size_t latent_dim, const std::vector<std::size_t>& hidden,
                              std::size_t data_dim, double leaky_slope, double sigma, Rng& rng) {
    if (sigma <= 0.0) throw std::runtime_error("generator: sigma must be positive");
    std::vector<std::size_t> dims;
    dims.push_back(latent_dim);
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(data_dim);
    GeneratorModel gen;
    gen.decoder = make_mlp(dims, Activation::LeakyRelu, leaky_slope, Activation::Tanh);
    gen.sigma = sigma;
    xavier_init(gen.decoder, rng);
    return gen;
}

Tensor decoder_log_likelihood(const GeneratorModel& gen, const Tensor& x, const Tensor& z) {
    require_latent(z, gen.latent_dim(), "decoder log likelihood");
    if (x.rank() != 2 || x.cols() != gen.data_dim() || x.rows() != z.rows()) {
        throw std::runtime_error("decoder log likelihood: x " + shape_string(x.shape) +
                                 " incompatible with z " + shape_string(z.shape));
    }
    const Tensor gx = gen.decode(z);
    const double var = gen.sigma * gen.sigma;
    const double norm = 0.5 * static_cast<double>(gen.data_dim()) * (kLog2Pi + 2.0 * std::log(gen.sigma));
    Tensor out({x.rows()});
    for (std::size_t b = 0; b < x.rows(); ++b) {
        double sq = 0.0;
        for (std::size_t j = 0; j < gen.data_dim(); ++j) {
            const double r = x.at(b, j) - gx.at(b, j);
            sq += r * r;
        }
        out.data[b] = -0.5 * sq / var - norm;
    }
    require_finite(out, "decoder log likelihood");
    return out;
}

Tensor log_joint(const GeneratorModel& gen, const StackedPrior& prior, const Tensor& x, const Tensor& z) {
    return prior_log_density_unnorm(prior, z) + decoder_log_likelihood(gen, x, z);
}

Tensor posterior_grad_z(const GeneratorModel& gen, const StackedPrior& prior, const Tensor& x,
                        const Tensor& z) {
    require_latent(z, gen.latent_dim(), "posterior grad");
    ForwardTape tape;
    const Tensor gx = mlp_forward(gen.decoder, z, &tape);
    const double inv_var = 1.0 / (gen.sigma * gen.sigma);
    Tensor residual_grad({z.rows(), gen.data_dim()});
    for (std::size_t i = 0; i < residual_grad.data.size(); ++i) {
        residual_grad.data[i] = (x.data[i] - gx.data[i]) * inv_var;
    }
    Tensor grad = prior_grad_z(prior, z);
    grad += mlp_backward(gen.decoder, tape, residual_grad).input;
    require_finite(grad, "posterior grad");
    return grad;
}

}  // namespace amnce
