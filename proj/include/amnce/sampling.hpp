#ifndef AMNCE_SAMPLING_HPP
#define AMNCE_SAMPLING_HPP

#include <functional>
#include <optional>
#include <vector>

#include "amnce/models.hpp"

namespace amnce {

struct LangevinConfig {
    std::size_t num_steps = 30;
    double step_size = 0.1;
};

using ScoreFn = std::function<Tensor(const Tensor&)>;

// z <- z + (s/2) * score(z) + sqrt(s) * eps, for exactly num_steps steps,
// eps ~ N(0, I). A non-finite state aborts with the offending step index.
Tensor langevin(const ScoreFn& score, Tensor z0, const LangevinConfig& cfg, Rng& rng);

// Latest posterior latent per training example, indexed by dataset position.
// The snapshot, once taken at a stage transition, is immutable for the stage.
class PersistentMemory {
public:
    PersistentMemory(std::size_t n_data, std::size_t latent_dim, Rng& rng);  // rows ~ N(0, I)
    explicit PersistentMemory(Tensor samples, std::optional<Tensor> snapshot = std::nullopt);

    std::size_t num_rows() const { return samples_.rows(); }
    std::size_t latent_dim() const { return samples_.cols(); }

    Tensor rows(const std::vector<std::size_t>& indices) const;
    void update(const std::vector<std::size_t>& indices, const Tensor& z_batch);

    void take_snapshot();
    bool has_snapshot() const { return snapshot_.has_value(); }
    const Tensor& snapshot() const;
    const Tensor& samples() const { return samples_; }
    const std::optional<Tensor>& snapshot_opt() const { return snapshot_; }

private:
    Tensor samples_;
    std::optional<Tensor> snapshot_;
};

struct PosteriorInit {
    enum class Kind { Noise, Warm } kind = Kind::Noise;
    const PersistentMemory* memory = nullptr;          // Warm only
    const std::vector<std::size_t>* indices = nullptr;  // Warm only
};

// Short-run Langevin targeting p(z | x) under the given prior and decoder.
Tensor sample_posterior(const GeneratorModel& gen, const StackedPrior& prior, const Tensor& x_batch,
                        const LangevinConfig& cfg, Rng& rng, const PosteriorInit& init = {});

struct PriorSampleSpec {
    enum class Mode { Base, Langevin, Persistent } mode = Mode::Base;
    LangevinConfig langevin;                  // Langevin only
    const PersistentMemory* memory = nullptr;  // Persistent only
};

// Base: exact N(0, I) draws, valid only with zero stages. Langevin: short-run
// chain on the stacked prior from a N(0, I) init. Persistent: rows drawn
// uniformly with replacement from the memory snapshot.
Tensor sample_prior(const StackedPrior& prior, const PriorSampleSpec& spec, std::size_t batch, Rng& rng);

struct SirResult {
    Tensor samples;
    double effective_sample_size = 0.0;  // 1 / sum of squared normalized weights
};

// Propose from N(0, I), weight by exp(sum of stage outputs) normalized with
// log-sum-exp, resample with replacement.
SirResult sir_sample(const StackedPrior& prior, std::size_t num_samples, std::size_t num_proposals,
                     Rng& rng);

}  // namespace amnce

#endif
