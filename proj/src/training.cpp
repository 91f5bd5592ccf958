#include "amnce/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace amnce {

std::size_t StageSchedule::period() const {
    validate();
    return std::max<std::size_t>(1, total_iters / num_stages);
}

std::size_t StageSchedule::stage_at(std::size_t iter) const {
    return std::min(iter / period(), num_stages - 1);
}

bool StageSchedule::is_boundary(std::size_t iter) const {
    return iter > 0 && iter % period() == 0 && iter / period() <= num_stages - 1;
}

void StageSchedule::validate() const {
    if (num_stages == 0) throw std::runtime_error("schedule: need at least one stage");
    if (total_iters < num_stages) throw std::runtime_error("schedule: fewer iterations than stages");
}

void TrainConfig::validate() const {
    if (latent_dim == 0) throw std::runtime_error("config: latent_dim must be positive");
    if (batch_size < 2) throw std::runtime_error("config: batch_size must be at least 2");
    if (lr_generator <= 0.0 || lr_ratio <= 0.0) throw std::runtime_error("config: learning rates must be positive");
    if (sigma <= 0.0) throw std::runtime_error("config: sigma must be positive");
    if (posterior_ld.num_steps < 1) throw std::runtime_error("config: posterior sampling needs steps");
}

std::string TrainLog::csv_header() {
    return "iter,stage,nce_loss,recon_loss,gen_gradnorm,ratio_gradnorm,m_eff,wall_ms";
}

std::string TrainLog::csv_row(const TrainRecord& r) {
    std::ostringstream os;
    os.precision(10);
    os << r.iter << ',' << r.stage << ',' << r.nce_loss << ',' << r.recon_loss << ',' << r.gen_gradnorm
       << ',' << r.ratio_gradnorm << ',' << r.m_eff << ',' << r.wall_ms;
    return os.str();
}

double stage_final_nce_loss(const TrainLog& log, std::size_t stage) {
    std::vector<double> losses;
    for (const auto& r : log.records) {
        if (r.stage == stage) losses.push_back(r.nce_loss);
    }
    if (losses.empty()) throw std::runtime_error("log: no records for stage " + std::to_string(stage));
    const std::size_t tail = std::min<std::size_t>(std::max<std::size_t>(1, losses.size() / 4), 25);
    double sum = 0.0;
    for (std::size_t i = losses.size() - tail; i < losses.size(); ++i) sum += losses[i];
    return sum / static_cast<double>(tail);
}

NceResult nce_loss_and_grads(const RatioEstimator& estimator, const Tensor& z_posterior,
                             const Tensor& z_prior) {
    if (z_posterior.rank() != 2 || z_prior.rank() != 2 || z_posterior.rows() == 0 || z_prior.rows() == 0) {
        throw std::runtime_error("nce: both class batches must be nonempty [n, d]");
    }
    if (z_posterior.cols() != estimator.latent_dim() || z_prior.cols() != estimator.latent_dim()) {
        throw std::runtime_error("nce: latent width mismatch");
    }

    // log sigmoid(t) = -softplus(-t), computed overflow-free.
    const auto log_sigmoid = [](double t) {
        return t >= 0.0 ? -std::log1p(std::exp(-t)) : t - std::log1p(std::exp(t));
    };
    const auto sigmoid = [](double t) {
        return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
    };

    ++estimator.eval_count;
    NceResult result;
    double loss = 0.0;
    std::vector<Tensor> grads;

    const auto accumulate = [&](const Tensor& z, bool posterior_class) {
        const double inv_n = 1.0 / static_cast<double>(z.rows());
        ForwardTape tape;
        const Tensor f = mlp_forward(estimator.net, z, &tape);
        Tensor fgrad({z.rows(), 1});
        for (std::size_t b = 0; b < z.rows(); ++b) {
            const double fb = f.data[b];
            if (posterior_class) {
                loss -= inv_n * log_sigmoid(fb);
                fgrad.data[b] = -sigmoid(-fb) * inv_n;
            } else {
                loss -= inv_n * log_sigmoid(-fb);
                fgrad.data[b] = sigmoid(fb) * inv_n;
            }
        }
        MlpGrads g = mlp_backward(estimator.net, tape, fgrad);
        if (grads.empty()) {
            grads = std::move(g.params);
        } else {
            for (std::size_t i = 0; i < grads.size(); ++i) grads[i] += g.params[i];
        }
    };

    accumulate(z_posterior, true);
    accumulate(z_prior, false);

    if (!std::isfinite(loss)) throw std::runtime_error("nce: non-finite loss");
    result.loss = loss;
    result.param_grads = std::move(grads);
    return result;
}

namespace {
double grads_norm(const std::vector<Tensor>& grads) {
    double sq = 0.0;
    for (const auto& g : grads) sq += squared_norm(g);
    return std::sqrt(sq);
}
}  // namespace

GeneratorStepStats generator_step(GeneratorModel& gen, const Tensor& x_batch, const Tensor& z_posterior,
                                  AdamState& adam) {
    if (x_batch.rows() != z_posterior.rows()) throw std::runtime_error("generator step: batch mismatch");
    const std::size_t n = x_batch.rows();
    const double inv_var = 1.0 / (gen.sigma * gen.sigma);

    ForwardTape tape;
    const Tensor gx = mlp_forward(gen.decoder, z_posterior, &tape);

    // Minimize mean |x - g(z)|^2 / (2 sigma^2): d/d g = (g - x) / (sigma^2 n).
    GeneratorStepStats stats;
    Tensor out_grad({n, gen.data_dim()});
    double sq = 0.0;
    for (std::size_t i = 0; i < out_grad.data.size(); ++i) {
        const double r = gx.data[i] - x_batch.data[i];
        sq += r * r;
        out_grad.data[i] = r * inv_var / static_cast<double>(n);
    }
    stats.recon_mse = sq / static_cast<double>(out_grad.data.size());

    MlpGrads grads = mlp_backward(gen.decoder, tape, out_grad);
    stats.grad_norm = grads_norm(grads.params);
    adam_step(gen.decoder.params(), grads.params, adam);
    return stats;
}

Trainer::Trainer(Tensor examples, TrainConfig cfg, StageSchedule schedule)
    : examples_(std::move(examples)),
      cfg_(std::move(cfg)),
      schedule_(schedule),
      rng_(cfg_.seed),
      generator_(make_generator(cfg_.latent_dim, cfg_.decoder_hidden, examples_.cols(), cfg_.decoder_slope,
                                cfg_.sigma, rng_)),
      current_estimator_(make_ratio_estimator(cfg_.latent_dim, cfg_.estimator_hidden, cfg_.estimator_slope,
                                              rng_)),
      adam_generator_(make_adam(std::as_const(generator_.decoder).params(), cfg_.lr_generator)),
      adam_ratio_(make_adam(std::as_const(current_estimator_.net).params(), cfg_.lr_ratio)),
      memory_(examples_.rows(), cfg_.latent_dim, rng_) {
    cfg_.validate();
    schedule_.validate();
    if (examples_.rank() != 2 || examples_.rows() == 0) {
        throw std::runtime_error("train: dataset must be a nonempty [n, D] tensor");
    }
    prior_.latent_dim = cfg_.latent_dim;
}

Trainer::Trainer(Tensor examples, TrainConfig cfg, StageSchedule schedule, Resume state)
    : examples_(std::move(examples)),
      cfg_(std::move(cfg)),
      schedule_(schedule),
      rng_(cfg_.seed),
      generator_(std::move(state.generator)),
      prior_(std::move(state.prior)),
      current_estimator_(std::move(state.current_estimator)),
      has_current_estimator_(state.has_current_estimator),
      adam_generator_(std::move(state.adam_generator)),
      adam_ratio_(std::move(state.adam_ratio)),
      memory_(std::move(state.memory_samples), std::move(state.memory_snapshot)),
      iter_(state.iteration),
      finalized_(state.finalized) {
    cfg_.validate();
    schedule_.validate();
    if (memory_.num_rows() != examples_.rows()) {
        throw std::runtime_error("train resume: memory rows do not match dataset size");
    }
    rng_.restore_state(state.rng_state);
}

Trainer::Resume Trainer::export_state() const {
    Resume state;
    state.iteration = iter_;
    state.generator = generator_;
    state.prior = prior_;
    state.has_current_estimator = has_current_estimator_;
    state.current_estimator = current_estimator_;
    state.adam_generator = adam_generator_;
    state.adam_ratio = adam_ratio_;
    state.memory_samples = memory_.samples();
    state.memory_snapshot = memory_.snapshot_opt();
    state.rng_state = rng_.serialize_state();
    state.finalized = finalized_;
    return state;
}

std::vector<std::size_t> Trainer::draw_batch_indices() {
    const std::size_t n = std::min(cfg_.batch_size, examples_.rows());
    std::vector<std::size_t> indices(n);
    for (auto& idx : indices) idx = rng_.uniform_index(examples_.rows());
    return indices;
}

namespace {
// A resumed run's log holds only post-resume records, so the tail mean for an
// already-finished stage may be unavailable.
double tail_loss_or_nan(const TrainLog& log, std::size_t stage) {
    for (const auto& r : log.records) {
        if (r.stage == stage) return stage_final_nce_loss(log, stage);
    }
    return std::numeric_limits<double>::quiet_NaN();
}
}  // namespace

void Trainer::stage_transition() {
    current_estimator_.frozen = true;
    log_.stages.push_back({prior_.num_stages(), iter_, tail_loss_or_nan(log_, prior_.num_stages()),
                           current_estimator_.eval_count});
    prior_.push_stage(std::move(current_estimator_));
    memory_.take_snapshot();
    current_estimator_ = make_ratio_estimator(cfg_.latent_dim, cfg_.estimator_hidden, cfg_.estimator_slope,
                                              rng_);
    adam_ratio_ = make_adam(std::as_const(current_estimator_.net).params(), cfg_.lr_ratio);
}

void Trainer::step_once() {
    const auto t0 = std::chrono::steady_clock::now();
    if (schedule_.is_boundary(iter_)) stage_transition();

    TrainRecord rec;
    rec.iter = iter_;
    rec.stage = current_stage();

    // 1. Mini-batch.
    const std::vector<std::size_t> indices = draw_batch_indices();
    Tensor x_batch({indices.size(), examples_.cols()});
    for (std::size_t b = 0; b < indices.size(); ++b) {
        for (std::size_t j = 0; j < examples_.cols(); ++j) x_batch.at(b, j) = examples_.at(indices[b], j);
    }

    // 2. Posterior sampling under the current prior (the base prior in the
    //    non-adaptive ablation).
    StackedPrior base_prior;
    base_prior.latent_dim = cfg_.latent_dim;
    const StackedPrior& posterior_prior = cfg_.adaptive ? prior_ : base_prior;
    PosteriorInit init;
    if (cfg_.posterior_init == PosteriorInitMode::Warm) {
        init.kind = PosteriorInit::Kind::Warm;
        init.memory = &memory_;
        init.indices = &indices;
    }
    const Tensor z_post = sample_posterior(generator_, posterior_prior, x_batch, cfg_.posterior_ld, rng_, init);
    memory_.update(indices, z_post);

    // 3. NCE update of the current estimator against prior samples.
    PriorSampleSpec prior_spec;
    const StackedPrior& nce_prior = cfg_.adaptive ? prior_ : base_prior;
    if (nce_prior.num_stages() == 0) {
        prior_spec.mode = PriorSampleSpec::Mode::Base;
    } else if (cfg_.prior_mode == PriorMode::Persistent) {
        prior_spec.mode = PriorSampleSpec::Mode::Persistent;
        prior_spec.memory = &memory_;
    } else {
        prior_spec.mode = PriorSampleSpec::Mode::Langevin;
        prior_spec.langevin = cfg_.prior_ld;
    }
    const Tensor z_prior = sample_prior(nce_prior, prior_spec, indices.size(), rng_);

    NceResult nce = nce_loss_and_grads(current_estimator_, z_post, z_prior);
    rec.nce_loss = nce.loss;
    rec.ratio_gradnorm = grads_norm(nce.param_grads);
    adam_step(current_estimator_.net.params(), nce.param_grads, adam_ratio_);

    // 4. Generator update, reusing the posterior samples.
    const GeneratorStepStats gs = generator_step(generator_, x_batch, z_post, adam_generator_);
    rec.recon_loss = gs.recon_mse;
    rec.gen_gradnorm = gs.grad_norm;

    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    log_.records.push_back(rec);
    ++iter_;
}

void Trainer::run_until(std::size_t iter) {
    const std::size_t stop = std::min(iter, schedule_.total_iters);
    while (iter_ < stop) step_once();
}

void Trainer::finalize() {
    if (finalized_) return;
    current_estimator_.frozen = true;
    log_.stages.push_back({prior_.num_stages(), iter_, tail_loss_or_nan(log_, prior_.num_stages()),
                           current_estimator_.eval_count});
    prior_.push_stage(std::move(current_estimator_));
    memory_.take_snapshot();
    has_current_estimator_ = false;
    current_estimator_ = RatioEstimator{};
    adam_ratio_ = AdamState{};
    adam_ratio_.lr = cfg_.lr_ratio;
    finalized_ = true;
}

void Trainer::run() {
    run_until(schedule_.total_iters);
    finalize();
}

bool Trainer::finished() const { return iter_ >= schedule_.total_iters && finalized_; }

TrainResult train(const Tensor& examples, const TrainConfig& cfg, const StageSchedule& schedule) {
    Trainer trainer(examples, cfg, schedule);
    trainer.run();
    return {trainer.generator(), trainer.prior(), trainer.log()};
}

TrainResult train_nonadaptive(const Tensor& examples, TrainConfig cfg, const StageSchedule& schedule) {
    cfg.adaptive = false;
    return train(examples, cfg, schedule);
}

}  // namespace amnce
