#ifndef AMNCE_TRAINING_HPP
#define AMNCE_TRAINING_HPP

#include <cstdint>
#include <limits>
#include <string>

#include "amnce/adam.hpp"
#include "amnce/sampling.hpp"

namespace amnce {

// Stage boundaries fall at positive multiples of total_iters / num_stages;
// remainder iterations stay in the last stage.
struct StageSchedule {
    std::size_t total_iters = 0;
    std::size_t num_stages = 1;

    std::size_t period() const;
    std::size_t stage_at(std::size_t iter) const;  // clamped to num_stages - 1
    bool is_boundary(std::size_t iter) const;      // true when a transition fires before iter runs
    void validate() const;
};

enum class PriorMode { Langevin, Persistent };
enum class PosteriorInitMode { Noise, Warm };

struct TrainConfig {
    std::size_t latent_dim = 2;
    std::size_t batch_size = 64;
    double lr_generator = 1e-4;
    double lr_ratio = 5e-5;
    LangevinConfig posterior_ld{30, 0.1};
    LangevinConfig prior_ld{30, 0.1};
    PriorMode prior_mode = PriorMode::Persistent;
    PosteriorInitMode posterior_init = PosteriorInitMode::Noise;
    bool adaptive = true;
    double sigma = 0.3;
    std::uint64_t seed = 1;
    std::vector<std::size_t> decoder_hidden{256, 256};
    double decoder_slope = 0.2;
    std::vector<std::size_t> estimator_hidden{200, 200};
    double estimator_slope = 0.1;

    void validate() const;
};

struct TrainRecord {
    std::size_t iter = 0;
    std::size_t stage = 0;
    double nce_loss = 0.0;
    double recon_loss = 0.0;
    double gen_gradnorm = 0.0;
    double ratio_gradnorm = 0.0;
    double m_eff = std::numeric_limits<double>::quiet_NaN();  // only set by SIR-based prior draws
    double wall_ms = 0.0;
};

struct StageSummary {
    std::size_t stage = 0;
    std::size_t frozen_at_iter = 0;
    double final_nce_loss = 0.0;  // mean over the stage's trailing records
    std::size_t estimator_evals_at_freeze = 0;
};

struct TrainLog {
    std::vector<TrainRecord> records;
    std::vector<StageSummary> stages;

    static std::string csv_header();  // iter,stage,nce_loss,...
    static std::string csv_row(const TrainRecord& r);
};

// Mean NCE loss over the trailing quarter (at most 25 records) of one stage.
double stage_final_nce_loss(const TrainLog& log, std::size_t stage);

struct NceResult {
    double loss = 0.0;
    std::vector<Tensor> param_grads;  // order of estimator net params
};

// Logistic binary classification loss between posterior (positive class) and
// prior (negative class) samples of the estimator f, with r = exp(f):
// loss = -mean_post log sigmoid(f) - mean_prior log sigmoid(-f).
NceResult nce_loss_and_grads(const RatioEstimator& estimator, const Tensor& z_posterior,
                             const Tensor& z_prior);

struct GeneratorStepStats {
    double recon_mse = 0.0;  // mean over batch and dims of squared residual
    double grad_norm = 0.0;
};

// One Adam step on theta maximizing the batch-mean complete-data log
// likelihood; only the reconstruction term depends on theta.
GeneratorStepStats generator_step(GeneratorModel& gen, const Tensor& x_batch, const Tensor& z_posterior,
                                  AdamState& adam);

// Stage-scheduled training loop. Owns all mutable state so that a run can be
// checkpointed at any iteration and resumed bit-exactly.
class Trainer {
public:
    Trainer(Tensor examples, TrainConfig cfg, StageSchedule schedule);

    // Raw state for checkpoint restore.
    struct Resume {
        std::uint64_t iteration = 0;
        GeneratorModel generator;
        StackedPrior prior;
        bool has_current_estimator = false;
        RatioEstimator current_estimator;
        AdamState adam_generator;
        AdamState adam_ratio;
        Tensor memory_samples;
        std::optional<Tensor> memory_snapshot;
        std::string rng_state;
        bool finalized = false;
    };
    Trainer(Tensor examples, TrainConfig cfg, StageSchedule schedule, Resume state);
    Resume export_state() const;

    void run();                            // to completion; freezes the final stage
    void run_until(std::size_t iter);      // stops before finalizing
    bool finished() const;

    std::size_t iteration() const { return iter_; }
    std::size_t current_stage() const { return schedule_.stage_at(iter_); }
    const TrainConfig& config() const { return cfg_; }
    const StageSchedule& schedule() const { return schedule_; }
    const GeneratorModel& generator() const { return generator_; }
    const StackedPrior& prior() const { return prior_; }
    const PersistentMemory& memory() const { return memory_; }
    const TrainLog& log() const { return log_; }
    bool finalized() const { return finalized_; }

private:
    void step_once();
    void stage_transition();
    void finalize();
    std::vector<std::size_t> draw_batch_indices();

    Tensor examples_;
    TrainConfig cfg_;
    StageSchedule schedule_;
    Rng rng_;
    GeneratorModel generator_;
    StackedPrior prior_;
    RatioEstimator current_estimator_;
    bool has_current_estimator_ = true;
    AdamState adam_generator_;
    AdamState adam_ratio_;
    PersistentMemory memory_;
    TrainLog log_;
    std::size_t iter_ = 0;
    bool finalized_ = false;
};

struct TrainResult {
    GeneratorModel generator;
    StackedPrior prior;
    TrainLog log;
};

// Adaptive multi-stage run per the stage schedule; returns exactly
// schedule.num_stages frozen stages.
TrainResult train(const Tensor& examples, const TrainConfig& cfg, const StageSchedule& schedule);

// Ablation: the posterior target never incorporates learned stages, and each
// stage's estimator classifies base-prior samples against those fixed-target
// posterior samples. Equivalent to setting cfg.adaptive = false.
TrainResult train_nonadaptive(const Tensor& examples, TrainConfig cfg, const StageSchedule& schedule);

}  // namespace amnce

#endif
