#include "amnce/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace amnce {

Tensor langevin(const ScoreFn& score, Tensor z0, const LangevinConfig& cfg, Rng& rng) {
    if (cfg.step_size <= 0.0) throw std::runtime_error("langevin: step size must be positive");
    if (z0.rank() != 2) throw std::runtime_error("langevin: state must be [batch, d]");
    const double half_step = 0.5 * cfg.step_size;
    const double noise_scale = std::sqrt(cfg.step_size);
    Tensor z = std::move(z0);
    for (std::size_t step = 0; step < cfg.num_steps; ++step) {
        const Tensor drift = score(z);
        if (!drift.same_shape(z)) throw std::runtime_error("langevin: score shape mismatch");
        for (std::size_t i = 0; i < z.data.size(); ++i) {
            z.data[i] += half_step * drift.data[i] + noise_scale * rng.normal();
        }
        for (double v : z.data) {
            if (!std::isfinite(v)) {
                throw std::runtime_error("langevin: non-finite state at step " + std::to_string(step));
            }
        }
    }
    return z;
}

PersistentMemory::PersistentMemory(std::size_t n_data, std::size_t latent_dim, Rng& rng)
    : samples_(rng.normal_tensor({n_data, latent_dim})) {
    if (n_data == 0 || latent_dim == 0) throw std::runtime_error("memory: empty dimensions");
}

PersistentMemory::PersistentMemory(Tensor samples, std::optional<Tensor> snapshot)
    : samples_(std::move(samples)), snapshot_(std::move(snapshot)) {
    if (samples_.rank() != 2) throw std::runtime_error("memory: samples must be [n, d]");
    if (snapshot_ && !snapshot_->same_shape(samples_)) {
        throw std::runtime_error("memory: snapshot shape mismatch");
    }
}

Tensor PersistentMemory::rows(const std::vector<std::size_t>& indices) const {
    Tensor out({indices.size(), latent_dim()});
    for (std::size_t b = 0; b < indices.size(); ++b) {
        if (indices[b] >= num_rows()) {
            throw std::runtime_error("memory: index " + std::to_string(indices[b]) + " out of range");
        }
        for (std::size_t j = 0; j < latent_dim(); ++j) out.at(b, j) = samples_.at(indices[b], j);
    }
    return out;
}

void PersistentMemory::update(const std::vector<std::size_t>& indices, const Tensor& z_batch) {
    if (z_batch.rank() != 2 || z_batch.rows() != indices.size() || z_batch.cols() != latent_dim()) {
        throw std::runtime_error("memory: update batch shape mismatch");
    }
    for (std::size_t b = 0; b < indices.size(); ++b) {
        if (indices[b] >= num_rows()) {
            throw std::runtime_error("memory: index " + std::to_string(indices[b]) + " out of range");
        }
        for (std::size_t j = 0; j < latent_dim(); ++j) samples_.at(indices[b], j) = z_batch.at(b, j);
    }
}

void PersistentMemory::take_snapshot() { snapshot_ = samples_; }

const Tensor& PersistentMemory::snapshot() const {
    if (!snapshot_) throw std::runtime_error("memory: no snapshot taken");
    return *snapshot_;
}

Tensor sample_posterior(const GeneratorModel& gen, const StackedPrior& prior, const Tensor& x_batch,
                        const LangevinConfig& cfg, Rng& rng, const PosteriorInit& init) {
    if (cfg.num_steps < 1) throw std::runtime_error("sample_posterior: needs at least one step");
    const std::size_t batch = x_batch.rows();
    Tensor z0;
    if (init.kind == PosteriorInit::Kind::Warm) {
        if (!init.memory || !init.indices) {
            throw std::runtime_error("sample_posterior: warm init requires memory and indices");
        }
        z0 = init.memory->rows(*init.indices);
    } else {
        z0 = rng.normal_tensor({batch, gen.latent_dim()});
    }
    const ScoreFn score = [&](const Tensor& z) { return posterior_grad_z(gen, prior, x_batch, z); };
    return langevin(score, std::move(z0), cfg, rng);
}

Tensor sample_prior(const StackedPrior& prior, const PriorSampleSpec& spec, std::size_t batch, Rng& rng) {
    switch (spec.mode) {
        case PriorSampleSpec::Mode::Base:
            if (prior.num_stages() > 0) {
                throw std::runtime_error("sample_prior: base mode is exact only for a 0-stage prior");
            }
            return rng.normal_tensor({batch, prior.latent_dim});
        case PriorSampleSpec::Mode::Langevin: {
            Tensor z0 = rng.normal_tensor({batch, prior.latent_dim});
            const ScoreFn score = [&](const Tensor& z) { return prior_grad_z(prior, z); };
            return langevin(score, std::move(z0), spec.langevin, rng);
        }
        case PriorSampleSpec::Mode::Persistent: {
            if (!spec.memory || !spec.memory->has_snapshot()) {
                throw std::runtime_error("sample_prior: persistent mode requires a memory snapshot");
            }
            const Tensor& snap = spec.memory->snapshot();
            Tensor out({batch, prior.latent_dim});
            for (std::size_t b = 0; b < batch; ++b) {
                const std::size_t r = rng.uniform_index(snap.rows());
                for (std::size_t j = 0; j < prior.latent_dim; ++j) out.at(b, j) = snap.at(r, j);
            }
            return out;
        }
    }
    throw std::runtime_error("sample_prior: unknown mode");
}

SirResult sir_sample(const StackedPrior& prior, std::size_t num_samples, std::size_t num_proposals,
                     Rng& rng) {
    if (num_proposals < num_samples || num_proposals == 0) {
        throw std::runtime_error("sir_sample: need at least as many proposals as samples");
    }
    const Tensor proposals = rng.normal_tensor({num_proposals, prior.latent_dim});

    // Importance log-weights: the base terms of target and proposal cancel,
    // leaving the sum of stage outputs.
    std::vector<double> logw(num_proposals, 0.0);
    for (const auto& stage : prior.stages) {
        const Tensor f = stage.log_ratio(proposals);
        for (std::size_t i = 0; i < num_proposals; ++i) logw[i] += f.data[i];
    }

    const double max_logw = *std::max_element(logw.begin(), logw.end());
    double total = 0.0;
    std::vector<double> w(num_proposals);
    for (std::size_t i = 0; i < num_proposals; ++i) {
        w[i] = std::exp(logw[i] - max_logw);
        total += w[i];
    }
    if (!(total > 0.0) || !std::isfinite(total)) {
        throw std::runtime_error("sir_sample: importance weights underflowed (effective sample size 0)");
    }

    double sumsq = 0.0;
    std::vector<double> cdf(num_proposals);
    double acc = 0.0;
    for (std::size_t i = 0; i < num_proposals; ++i) {
        w[i] /= total;
        sumsq += w[i] * w[i];
        acc += w[i];
        cdf[i] = acc;
    }
    cdf.back() = 1.0;

    SirResult result;
    result.effective_sample_size = 1.0 / sumsq;
    result.samples = Tensor({num_samples, prior.latent_dim});
    for (std::size_t s = 0; s < num_samples; ++s) {
        const double u = rng.uniform();
        const std::size_t idx = static_cast<std::size_t>(
            std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        for (std::size_t j = 0; j < prior.latent_dim; ++j) {
            result.samples.at(s, j) = proposals.at(idx, j);
        }
    }
    return result;
}

}  // namespace amnce
