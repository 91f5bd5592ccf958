#include "amnce/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace amnce {

std::size_t Mlp::in_dim() const {
    if (layers.empty()) throw std::runtime_error("mlp: empty network");
    return layers.front().in_dim();
}

std::size_t Mlp::out_dim() const {
    if (layers.empty()) throw std::runtime_error("mlp: empty network");
    return layers.back().out_dim();
}

std::size_t Mlp::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
}

std::vector<Tensor*> Mlp::params() {
    std::vector<Tensor*> out;
    out.reserve(layers.size() * 2);
    for (auto& l : layers) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    return out;
}

std::vector<const Tensor*> Mlp::params() const {
    std::vector<const Tensor*> out;
    out.reserve(layers.size() * 2);
    for (const auto& l : layers) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    return out;
}

void Mlp::validate() const {
    if (layers.empty()) throw std::runtime_error("mlp: empty network");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (l.weight.rank() != 2 || l.bias.rank() != 1 || l.bias.shape[0] != l.out_dim()) {
            throw std::runtime_error("mlp: inconsistent layer " + std::to_string(i));
        }
        if (i > 0 && layers[i - 1].out_dim() != l.in_dim()) {
            throw std::runtime_error("mlp: layer " + std::to_string(i - 1) + " out dim " +
                                     std::to_string(layers[i - 1].out_dim()) + " != layer " +
                                     std::to_string(i) + " in dim " + std::to_string(l.in_dim()));
        }
    }
}

Mlp make_mlp(const std::vector<std::size_t>& dims, Activation hidden, double hidden_slope,
             Activation output) {
    if (dims.size() < 2) throw std::runtime_error("mlp: need at least input and output dims");
    Mlp net;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        LinearLayer l;
        l.weight = Tensor({dims[i + 1], dims[i]});
        l.bias = Tensor({dims[i + 1]});
        const bool last = (i + 2 == dims.size());
        l.activation = last ? output : hidden;
        l.leaky_slope = hidden_slope;
        net.layers.push_back(std::move(l));
    }
    return net;
}

namespace {

double activate(Activation a, double slope, double u) {
    switch (a) {
        case Activation::LeakyRelu: return u >= 0.0 ? u : slope * u;
        case Activation::Tanh: return std::tanh(u);
        case Activation::Identity: return u;
    }
    return u;
}

// Derivative from the pre-activation u and post-activation y.
double activate_grad(Activation a, double slope, double u, double y) {
    switch (a) {
        case Activation::LeakyRelu: return u >= 0.0 ? 1.0 : slope;
        case Activation::Tanh: return 1.0 - y * y;
        case Activation::Identity: return 1.0;
    }
    return 1.0;
}

}  // namespace

Tensor mlp_forward(const Mlp& net, const Tensor& input, ForwardTape* tape) {
    net.validate();
    if (input.rank() != 2 || input.cols() != net.in_dim()) {
        throw std::runtime_error("mlp forward: input " + shape_string(input.shape) + " incompatible with in dim " +
                                 std::to_string(net.in_dim()));
    }
    if (input.rows() == 0) throw std::runtime_error("mlp forward: empty batch");

    if (tape) {
        tape->input = input;
        tape->preacts.clear();
        tape->outputs.clear();
    }

    const std::size_t batch = input.rows();
    Tensor cur = input;
    for (const auto& layer : net.layers) {
        const std::size_t out_dim = layer.out_dim();
        Tensor pre({batch, out_dim});
        for (std::size_t b = 0; b < batch; ++b) {
            const double* row = cur.data.data() + b * layer.in_dim();
            double* prow = pre.data.data() + b * out_dim;
            for (std::size_t o = 0; o < out_dim; ++o) {
                const double* wrow = layer.weight.data.data() + o * layer.in_dim();
                double acc = layer.bias.data[o];
                for (std::size_t i = 0; i < layer.in_dim(); ++i) acc += wrow[i] * row[i];
                prow[o] = acc;
            }
        }
        Tensor post = pre;
        if (layer.activation != Activation::Identity) {
            for (std::size_t i = 0; i < post.data.size(); ++i) {
                post.data[i] = activate(layer.activation, layer.leaky_slope, pre.data[i]);
            }
        }
        if (tape) {
            tape->preacts.push_back(std::move(pre));
            tape->outputs.push_back(post);
        }
        cur = std::move(post);
    }
    require_finite(cur, "mlp forward output");
    return cur;
}

MlpGrads mlp_backward(const Mlp& net, const ForwardTape& tape, const Tensor& output_grad) {
    net.validate();
    const std::size_t n_layers = net.layers.size();
    if (tape.preacts.size() != n_layers || tape.outputs.size() != n_layers) {
        throw std::runtime_error("mlp backward: tape does not match network depth");
    }
    if (tape.input.rank() != 2 || tape.input.cols() != net.in_dim()) {
        throw std::runtime_error("mlp backward: tape input does not match network");
    }
    const std::size_t batch = tape.input.rows();
    if (output_grad.rank() != 2 || output_grad.rows() != batch || output_grad.cols() != net.out_dim()) {
        throw std::runtime_error("mlp backward: output_grad " + shape_string(output_grad.shape) +
                                 " does not match tape");
    }
    for (std::size_t li = 0; li < n_layers; ++li) {
        if (tape.preacts[li].rows() != batch || tape.preacts[li].cols() != net.layers[li].out_dim()) {
            throw std::runtime_error("mlp backward: stale tape at layer " + std::to_string(li));
        }
    }

    MlpGrads grads;
    grads.params.resize(2 * n_layers);

    Tensor delta = output_grad;  // d objective / d post-activation of current layer
    for (std::size_t li = n_layers; li-- > 0;) {
        const auto& layer = net.layers[li];
        const std::size_t out_dim = layer.out_dim();
        const std::size_t in_dim = layer.in_dim();
        const Tensor& pre = tape.preacts[li];
        const Tensor& post = tape.outputs[li];

        // d/d pre-activation.
        if (layer.activation != Activation::Identity) {
            for (std::size_t i = 0; i < delta.data.size(); ++i) {
                delta.data[i] *= activate_grad(layer.activation, layer.leaky_slope, pre.data[i], post.data[i]);
            }
        }

        const Tensor& layer_in = (li == 0) ? tape.input : tape.outputs[li - 1];

        Tensor wgrad({out_dim, in_dim});
        Tensor bgrad({out_dim});
        // Summation over the batch runs in fixed row order.
        for (std::size_t b = 0; b < batch; ++b) {
            const double* drow = delta.data.data() + b * out_dim;
            const double* irow = layer_in.data.data() + b * in_dim;
            for (std::size_t o = 0; o < out_dim; ++o) {
                const double d = drow[o];
                if (d == 0.0) continue;
                bgrad.data[o] += d;
                double* wrow = wgrad.data.data() + o * in_dim;
                for (std::size_t i = 0; i < in_dim; ++i) wrow[i] += d * irow[i];
            }
        }
        grads.params[2 * li] = std::move(wgrad);
        grads.params[2 * li + 1] = std::move(bgrad);

        // Propagate to the layer input: delta_in = delta * W.
        Tensor next({batch, in_dim});
        for (std::size_t b = 0; b < batch; ++b) {
            const double* drow = delta.data.data() + b * out_dim;
            double* nrow = next.data.data() + b * in_dim;
            for (std::size_t o = 0; o < out_dim; ++o) {
                const double d = drow[o];
                if (d == 0.0) continue;
                const double* wrow = layer.weight.data.data() + o * in_dim;
                for (std::size_t i = 0; i < in_dim; ++i) nrow[i] += d * wrow[i];
            }
        }
        delta = std::move(next);
    }
    grads.input = std::move(delta);
    return grads;
}

void xavier_init(Mlp& net, Rng& rng) {
    for (auto& layer : net.layers) {
        const double bound = std::sqrt(6.0 / static_cast<double>(layer.in_dim() + layer.out_dim()));
        for (double& w : layer.weight.data) w = (2.0 * rng.uniform() - 1.0) * bound;
        for (double& b : layer.bias.data) b = 0.0;
    }
}

double gradient_suite_max_rel_error(std::uint64_t seed, std::size_t num_configs) {
    Rng rng(seed);
    constexpr double kH = 1e-5;
    const Activation kinds[] = {Activation::LeakyRelu, Activation::Tanh, Activation::Identity};
    double worst = 0.0;

    for (std::size_t cfg = 0; cfg < num_configs; ++cfg) {
        const std::size_t depth = 1 + rng.uniform_index(3);
        std::vector<std::size_t> dims(depth + 1);
        for (auto& d : dims) d = 1 + rng.uniform_index(32);

        Mlp net;
        for (std::size_t li = 0; li < depth; ++li) {
            LinearLayer layer;
            layer.weight = Tensor({dims[li + 1], dims[li]});
            layer.bias = Tensor({dims[li + 1]});
            layer.activation = kinds[(cfg + li) % 3];
            layer.leaky_slope = (cfg % 2 == 0) ? 0.1 : 0.2;
            net.layers.push_back(std::move(layer));
        }
        xavier_init(net, rng);

        const std::size_t batch = 1 + rng.uniform_index(4);
        const Tensor input = rng.normal_tensor({batch, dims.front()});
        const Tensor output_grad = rng.normal_tensor({batch, dims.back()});

        ForwardTape tape;
        mlp_forward(net, input, &tape);
        const MlpGrads grads = mlp_backward(net, tape, output_grad);

        const auto objective = [&output_grad](const Mlp& n, const Tensor& in) {
            return dot(mlp_forward(n, in), output_grad);
        };

        worst = std::max(worst, finite_difference_check(
                                    [&](const Tensor& probe) { return objective(net, probe); }, input,
                                    grads.input, kH));

        Mlp probe_net = net;
        const auto probe_params = probe_net.params();
        const auto orig_params = std::as_const(net).params();
        for (std::size_t pi = 0; pi < probe_params.size(); ++pi) {
            worst = std::max(worst, finite_difference_check(
                                        [&](const Tensor& probe) {
                                            *probe_params[pi] = probe;
                                            return objective(probe_net, input);
                                        },
                                        *orig_params[pi], grads.params[pi], kH));
            *probe_params[pi] = *orig_params[pi];
        }
    }
    return worst;
}

double finite_difference_check(const std::function<double(const Tensor&)>& fn, const Tensor& point,
                               const Tensor& analytic_grad, double h) {
    if (h <= 0.0) throw std::runtime_error("finite_difference_check: h must be positive");
    if (!point.same_shape(analytic_grad)) {
        throw std::runtime_error("finite_difference_check: gradient shape mismatch");
    }
    double max_rel = 0.0;
    Tensor probe = point;
    for (std::size_t i = 0; i < probe.data.size(); ++i) {
        const double orig = probe.data[i];
        probe.data[i] = orig + h;
        const double fp = fn(probe);
        probe.data[i] = orig - h;
        const double fm = fn(probe);
        probe.data[i] = orig;
        require_finite(fp, "finite_difference_check fn(+h)");
        require_finite(fm, "finite_difference_check fn(-h)");
        const double cd = (fp - fm) / (2.0 * h);
        const double rel = std::abs(cd - analytic_grad.data[i]) / (std::abs(analytic_grad.data[i]) + 1e-8);
        if (rel > max_rel) max_rel = rel;
    }
    return max_rel;
}

}  // namespace amnce
