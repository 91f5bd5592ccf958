#include "amnce.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <exception>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "amnce/checkpoint.hpp"
#include "amnce/config.hpp"
#include "amnce/dataset.hpp"
#include "amnce/eval.hpp"
#include "amnce/training.hpp"

struct amnce_config {
    amnce::RunConfig cfg;
};

struct amnce_dataset {
    amnce::Dataset ds;
};

struct amnce_model {
    amnce::Checkpoint ckpt;
};

namespace {

thread_local std::string g_last_error;

void set_last_error(const std::string& msg) { g_last_error = msg; }

amnce_status classify(const std::exception& e) {
    const std::string msg = e.what();
    set_last_error(msg);
    if (msg.find("non-finite") != std::string::npos) return AMNCE_ERROR_NUMERIC;
    if (msg.find("cannot open") != std::string::npos || msg.find("write failed") != std::string::npos) {
        return AMNCE_ERROR_IO;
    }
    if (msg.rfind("idx:", 0) == 0 || msg.rfind("checkpoint:", 0) == 0 || msg.rfind("config:", 0) == 0) {
        return AMNCE_ERROR_FORMAT;
    }
    return AMNCE_ERROR_INVALID_ARGUMENT;
}

template <typename Fn>
amnce_status guarded(Fn&& fn) {
    try {
        fn();
        return AMNCE_OK;
    } catch (const std::exception& e) {
        return classify(e);
    } catch (...) {
        set_last_error("unknown error");
        return AMNCE_ERROR_STATE;
    }
}

amnce_status require(bool cond, const char* msg) {
    if (cond) return AMNCE_OK;
    set_last_error(msg);
    return AMNCE_ERROR_INVALID_ARGUMENT;
}

void write_log_csv(const char* path, const amnce::TrainLog& log) {
    if (!path || !*path) return;
    std::ofstream out(path);
    if (!out) throw std::runtime_error(std::string("train log: cannot open ") + path);
    out << amnce::TrainLog::csv_header() << "\n";
    for (const auto& r : log.records) out << amnce::TrainLog::csv_row(r) << "\n";
}

amnce::Trainer make_trainer(const amnce::RunConfig& cfg, const amnce::Dataset& data) {
    return amnce::Trainer(data.examples, cfg.train, cfg.schedule_for(data.size()));
}

amnce_status copy_string(const std::string& value, char* buf, size_t cap, const char* what) {
    if (!buf || cap == 0 || value.size() + 1 > cap) {
        set_last_error(std::string(what) + ": buffer too small (" + std::to_string(value.size() + 1) +
                       " bytes needed)");
        return AMNCE_ERROR_INVALID_ARGUMENT;
    }
    std::memcpy(buf, value.c_str(), value.size() + 1);
    return AMNCE_OK;
}

}  // namespace

extern "C" {

const char* amnce_last_error(void) { return g_last_error.c_str(); }

const char* amnce_version(void) { return "1.0.0"; }

amnce_status amnce_config_create(amnce_config** out) {
    if (auto rc = require(out != nullptr, "config_create: out is null")) return rc;
    return guarded([&] { *out = new amnce_config{}; });
}

amnce_status amnce_config_load(const char* path, amnce_config** out) {
    if (auto rc = require(path && out, "config_load: null argument")) return rc;
    return guarded([&] { *out = new amnce_config{amnce::RunConfig::from_file(path)}; });
}

amnce_status amnce_config_parse(const char* text, amnce_config** out) {
    if (auto rc = require(text && out, "config_parse: null argument")) return rc;
    return guarded([&] { *out = new amnce_config{amnce::RunConfig::from_text(text)}; });
}

amnce_status amnce_config_set(amnce_config* cfg, const char* key, const char* value) {
    if (auto rc = require(cfg && key && value, "config_set: null argument")) return rc;
    return guarded([&] { cfg->cfg.set(key, value); });
}

amnce_status amnce_config_get(const amnce_config* cfg, const char* key, char* buf, size_t cap) {
    if (auto rc = require(cfg && key, "config_get: null argument")) return rc;
    amnce_status rc = AMNCE_OK;
    const amnce_status outer = guarded([&] {
        const std::string text = cfg->cfg.serialize();
        const std::string needle = std::string(key) + " = ";
        const auto pos = text.find(needle);
        if (pos == std::string::npos || (pos != 0 && text[pos - 1] != '\n')) {
            throw std::runtime_error("config: unknown key '" + std::string(key) + "'");
        }
        const auto end = text.find('\n', pos);
        const std::string value = text.substr(pos + needle.size(), end - pos - needle.size());
        rc = copy_string(value, buf, cap, "config_get");
    });
    return outer != AMNCE_OK ? outer : rc;
}

void amnce_config_free(amnce_config* cfg) { delete cfg; }

amnce_status amnce_dataset_load_idx(const char* images_path, const char* labels_path,
                                    amnce_dataset** out) {
    if (auto rc = require(images_path && out, "dataset_load_idx: null argument")) return rc;
    return guarded([&] {
        auto ds = amnce::load_idx(images_path, labels_path ? labels_path : "");
        ds.validate();
        *out = new amnce_dataset{std::move(ds)};
    });
}

amnce_status amnce_dataset_synth(const char* kind, int64_t n, uint64_t seed, amnce_dataset** out) {
    if (auto rc = require(kind && out && n > 0, "dataset_synth: bad argument")) return rc;
    return guarded([&] {
        amnce::Rng rng(seed);
        auto ds = amnce::synth_dataset(amnce::parse_synth_kind(kind), static_cast<std::size_t>(n), rng);
        ds.validate();
        *out = new amnce_dataset{std::move(ds)};
    });
}

amnce_status amnce_dataset_from_config(const amnce_config* cfg, amnce_dataset** out) {
    if (auto rc = require(cfg && out, "dataset_from_config: null argument")) return rc;
    return guarded([&] { *out = new amnce_dataset{amnce::load_config_dataset(cfg->cfg)}; });
}

int64_t amnce_dataset_size(const amnce_dataset* ds) {
    return ds ? static_cast<int64_t>(ds->ds.size()) : 0;
}

int64_t amnce_dataset_dim(const amnce_dataset* ds) {
    return ds ? static_cast<int64_t>(ds->ds.dim()) : 0;
}

int amnce_dataset_has_labels(const amnce_dataset* ds) {
    return ds && ds->ds.labels.has_value() ? 1 : 0;
}

amnce_status amnce_dataset_labels(const amnce_dataset* ds, int* out, int64_t cap) {
    if (auto rc = require(ds && out, "dataset_labels: null argument")) return rc;
    if (auto rc = require(ds->ds.labels.has_value(), "dataset_labels: dataset has no labels")) return rc;
    if (auto rc = require(cap >= static_cast<int64_t>(ds->ds.size()), "dataset_labels: buffer too small")) {
        return rc;
    }
    for (std::size_t i = 0; i < ds->ds.size(); ++i) out[i] = (*ds->ds.labels)[i];
    return AMNCE_OK;
}

amnce_status amnce_dataset_examples(const amnce_dataset* ds, double* out, int64_t cap) {
    if (auto rc = require(ds && out, "dataset_examples: null argument")) return rc;
    const auto n = static_cast<int64_t>(ds->ds.examples.size());
    if (auto rc = require(cap >= n, "dataset_examples: buffer too small")) return rc;
    std::memcpy(out, ds->ds.examples.data.data(), static_cast<std::size_t>(n) * sizeof(double));
    return AMNCE_OK;
}

amnce_status amnce_dataset_filter_label(const amnce_dataset* ds, int label, int keep,
                                        amnce_dataset** out) {
    if (auto rc = require(ds && out, "dataset_filter_label: null argument")) return rc;
    return guarded([&] { *out = new amnce_dataset{ds->ds.filter_label(label, keep != 0)}; });
}

amnce_status amnce_dataset_slice(const amnce_dataset* ds, int64_t start, int64_t count,
                                 amnce_dataset** out) {
    if (auto rc = require(ds && out && start >= 0 && count > 0, "dataset_slice: bad argument")) return rc;
    return guarded([&] {
        *out = new amnce_dataset{
            ds->ds.slice(static_cast<std::size_t>(start), static_cast<std::size_t>(count))};
    });
}

void amnce_dataset_free(amnce_dataset* ds) { delete ds; }

amnce_status amnce_train(const amnce_config* cfg, const amnce_dataset* data, const char* log_csv_path,
                         amnce_model** out) {
    if (auto rc = require(cfg && data && out, "train: null argument")) return rc;
    return guarded([&] {
        amnce::RunConfig run = cfg->cfg;
        amnce::apply_seed_fallback(run);
        amnce::Trainer trainer = make_trainer(run, data->ds);
        trainer.run();
        write_log_csv(log_csv_path, trainer.log());
        *out = new amnce_model{amnce::Checkpoint{run.serialize(), trainer.export_state()}};
    });
}

amnce_status amnce_train_until(const amnce_config* cfg, const amnce_dataset* data, uint64_t stop_iter,
                               const char* log_csv_path, amnce_model** out) {
    if (auto rc = require(cfg && data && out, "train_until: null argument")) return rc;
    return guarded([&] {
        amnce::RunConfig run = cfg->cfg;
        amnce::apply_seed_fallback(run);
        amnce::Trainer trainer = make_trainer(run, data->ds);
        trainer.run_until(stop_iter);
        write_log_csv(log_csv_path, trainer.log());
        *out = new amnce_model{amnce::Checkpoint{run.serialize(), trainer.export_state()}};
    });
}

amnce_status amnce_resume(amnce_model* model, const amnce_dataset* data, const char* log_csv_path) {
    if (auto rc = require(model && data, "resume: null argument")) return rc;
    return guarded([&] {
        const amnce::RunConfig run = amnce::RunConfig::from_text(model->ckpt.config_echo);
        // Copy the state so a failed resume leaves the handle intact.
        amnce::Trainer trainer(data->ds.examples, run.train, run.schedule_for(data->ds.size()),
                               amnce::Trainer::Resume(model->ckpt.state));
        trainer.run();
        write_log_csv(log_csv_path, trainer.log());
        model->ckpt.state = trainer.export_state();
    });
}

amnce_status amnce_model_save(const amnce_model* m, const char* path) {
    if (auto rc = require(m && path, "model_save: null argument")) return rc;
    return guarded([&] { amnce::save_checkpoint(path, m->ckpt); });
}

amnce_status amnce_model_load(const char* path, amnce_model** out) {
    if (auto rc = require(path && out, "model_load: null argument")) return rc;
    return guarded([&] { *out = new amnce_model{amnce::load_checkpoint(path)}; });
}

int amnce_model_num_stages(const amnce_model* m) {
    return m ? static_cast<int>(m->ckpt.state.prior.num_stages()) : -1;
}

uint64_t amnce_model_iteration(const amnce_model* m) { return m ? m->ckpt.state.iteration : 0; }

int64_t amnce_model_latent_dim(const amnce_model* m) {
    return m ? static_cast<int64_t>(m->ckpt.state.prior.latent_dim) : 0;
}

int64_t amnce_model_data_dim(const amnce_model* m) {
    return m ? static_cast<int64_t>(m->ckpt.state.generator.data_dim()) : 0;
}

int64_t amnce_model_param_count(const amnce_model* m, int which) {
    if (!m) return -1;
    if (which == 0) return static_cast<int64_t>(m->ckpt.state.generator.decoder.param_count());
    if (which == 1) {
        std::size_t n = 0;
        for (const auto& stage : m->ckpt.state.prior.stages) n += stage.net.param_count();
        return static_cast<int64_t>(n);
    }
    return -1;
}

amnce_status amnce_model_config(const amnce_model* m, char* buf, size_t cap) {
    if (auto rc = require(m != nullptr, "model_config: null model")) return rc;
    return copy_string(m->ckpt.config_echo, buf, cap, "model_config");
}

void amnce_model_free(amnce_model* m) { delete m; }

amnce_status amnce_sample(const amnce_model* m, const char* method, int64_t count, int64_t steps,
                          double step_size, int64_t sir_proposals, uint64_t seed, double* out_x,
                          int64_t cap) {
    if (auto rc = require(m && method && out_x && count > 0, "sample: bad argument")) return rc;
    return guarded([&] {
        const auto& state = m->ckpt.state;
        const int64_t needed = count * static_cast<int64_t>(state.generator.data_dim());
        if (cap < needed) throw std::runtime_error("sample: output buffer too small");
        amnce::Rng rng(seed);
        amnce::Tensor z;
        const std::string mode = method;
        if (mode == "langevin") {
            if (steps < 0 || step_size <= 0.0) throw std::runtime_error("sample: bad langevin settings");
            amnce::PriorSampleSpec spec;
            if (state.prior.num_stages() == 0 && steps == 0) {
                spec.mode = amnce::PriorSampleSpec::Mode::Base;
            } else {
                spec.mode = amnce::PriorSampleSpec::Mode::Langevin;
                spec.langevin = {static_cast<std::size_t>(steps), step_size};
            }
            z = amnce::sample_prior(state.prior, spec, static_cast<std::size_t>(count), rng);
        } else if (mode == "sir") {
            if (sir_proposals < count) throw std::runtime_error("sample: sir needs proposals >= count");
            z = amnce::sir_sample(state.prior, static_cast<std::size_t>(count),
                                  static_cast<std::size_t>(sir_proposals), rng)
                    .samples;
        } else {
            throw std::runtime_error("sample: method must be langevin or sir");
        }
        const amnce::Tensor x = state.generator.decode(z);
        std::memcpy(out_x, x.data.data(), x.data.size() * sizeof(double));
    });
}

amnce_status amnce_reconstruct(const amnce_model* m, const amnce_dataset* data, int64_t steps,
                               double step_size, uint64_t seed, double* out_x, int64_t cap,
                               double* out_mse) {
    if (auto rc = require(m && data && out_mse, "reconstruct: null argument")) return rc;
    if (auto rc = require(steps > 0 && step_size > 0.0, "reconstruct: bad langevin settings")) return rc;
    return guarded([&] {
        const auto& state = m->ckpt.state;
        amnce::Rng rng(seed);
        amnce::Tensor recon;
        const amnce::LangevinConfig cfg{static_cast<std::size_t>(steps), step_size};
        *out_mse = amnce::reconstruction_mse(state.generator, state.prior, data->ds.examples, cfg, rng,
                                             out_x ? &recon : nullptr);
        if (out_x) {
            if (cap < static_cast<int64_t>(recon.size())) {
                throw std::runtime_error("reconstruct: output buffer too small");
            }
            std::memcpy(out_x, recon.data.data(), recon.size() * sizeof(double));
        }
    });
}

amnce_status amnce_anomaly_scores(const amnce_model* m, const amnce_dataset* data, int64_t steps,
                                  double step_size, int64_t chains, uint64_t seed, double* out_scores,
                                  int64_t cap) {
    if (auto rc = require(m && data && out_scores, "anomaly_scores: null argument")) return rc;
    if (auto rc = require(steps > 0 && step_size > 0.0 && chains > 0, "anomaly_scores: bad settings")) {
        return rc;
    }
    if (auto rc = require(cap >= static_cast<int64_t>(data->ds.size()), "anomaly_scores: buffer too small")) {
        return rc;
    }
    return guarded([&] {
        const auto& state = m->ckpt.state;
        amnce::Rng rng(seed);
        amnce::AnomalyConfig cfg;
        cfg.posterior_ld = {static_cast<std::size_t>(steps), step_size};
        cfg.num_chains = static_cast<std::size_t>(chains);
        const auto scores =
            amnce::anomaly_scores(state.generator, state.prior, data->ds.examples, cfg, rng);
        std::memcpy(out_scores, scores.data(), scores.size() * sizeof(double));
    });
}

amnce_status amnce_auprc(const double* log_joint_scores, const int* is_anomalous, int64_t n,
                         double* out) {
    if (auto rc = require(log_joint_scores && is_anomalous && out && n > 1, "auprc: bad argument")) {
        return rc;
    }
    return guarded([&] {
        std::vector<amnce::ScoredExample> scored(static_cast<std::size_t>(n));
        for (int64_t i = 0; i < n; ++i) {
            scored[static_cast<std::size_t>(i)] = {
                log_joint_scores[i],
                is_anomalous[i] ? amnce::ExampleLabel::Anomalous : amnce::ExampleLabel::Normal};
        }
        *out = amnce::auprc(scored);
    });
}

amnce_status amnce_write_pgm_grid(const double* x, int64_t count, int64_t width, int64_t height,
                                  int64_t grid_cols, const char* path) {
    if (auto rc = require(x && path && count > 0 && width > 0 && height > 0 && grid_cols > 0,
                          "write_pgm_grid: bad argument")) {
        return rc;
    }
    return guarded([&] {
        amnce::Tensor images({static_cast<std::size_t>(count),
                              static_cast<std::size_t>(width) * static_cast<std::size_t>(height)},
                             std::vector<double>(x, x + count * width * height));
        amnce::emit_samples_pgm(images, static_cast<std::size_t>(width), static_cast<std::size_t>(height),
                                static_cast<std::size_t>(grid_cols), path);
    });
}

amnce_status amnce_gradcheck(uint64_t seed, int64_t num_configs, double* out_max_rel_err) {
    if (auto rc = require(out_max_rel_err && num_configs > 0, "gradcheck: bad argument")) return rc;
    return guarded([&] {
        *out_max_rel_err =
            amnce::gradient_suite_max_rel_error(seed, static_cast<std::size_t>(num_configs));
    });
}

amnce_status amnce_ratio_benchmark(uint64_t seed, int64_t train_samples, int64_t eval_points,
                                   double* out_mae) {
    if (auto rc = require(out_mae && train_samples > 100 && eval_points > 0, "ratio_benchmark: bad argument")) {
        return rc;
    }
    return guarded([&] {
        amnce::Rng rng(seed);
        const std::size_t n_train = static_cast<std::size_t>(train_samples);
        const std::size_t d = 2;

        // Positive class ("posterior" role): N((1,1), I); negative: N(0, I).
        amnce::Tensor target = rng.normal_tensor({n_train, d});
        for (std::size_t i = 0; i < target.data.size(); ++i) target.data[i] += 1.0;
        amnce::Tensor base = rng.normal_tensor({n_train, d});

        amnce::RatioEstimator est = amnce::make_ratio_estimator(d, {64, 64}, 0.1, rng);
        amnce::AdamState adam = amnce::make_adam(std::as_const(est.net).params(), 1e-3);

        const std::size_t batch = 256;
        const std::size_t steps = std::clamp<std::size_t>(n_train / 16, 500, 3000);
        amnce::Tensor zq({batch, d}), zp({batch, d});
        for (std::size_t step = 0; step < steps; ++step) {
            for (std::size_t b = 0; b < batch; ++b) {
                const std::size_t iq = rng.uniform_index(n_train);
                const std::size_t ip = rng.uniform_index(n_train);
                for (std::size_t j = 0; j < d; ++j) {
                    zq.at(b, j) = target.at(iq, j);
                    zp.at(b, j) = base.at(ip, j);
                }
            }
            auto nce = amnce::nce_loss_and_grads(est, zq, zp);
            amnce::adam_step(est.net.params(), nce.param_grads, adam);
        }

        // Held-out points from the balanced mixture; closed-form log ratio is
        // (1,1).z - 1.
        amnce::RatioOracle oracle;
        oracle.mean_p = amnce::Tensor({d}, {1.0, 1.0});
        oracle.mean_q = amnce::Tensor({d}, {0.0, 0.0});
        oracle.cov_p = amnce::Tensor({d, d}, {1.0, 0.0, 0.0, 1.0});
        oracle.cov_q = amnce::Tensor({d, d}, {1.0, 0.0, 0.0, 1.0});

        const std::size_t n_eval = static_cast<std::size_t>(eval_points);
        amnce::Tensor held({n_eval, d});
        for (std::size_t i = 0; i < n_eval; ++i) {
            const double shift = (i % 2 == 0) ? 1.0 : 0.0;
            for (std::size_t j = 0; j < d; ++j) held.at(i, j) = rng.normal() + shift;
        }
        const amnce::Tensor f = est.log_ratio(held);
        double mae = 0.0;
        for (std::size_t i = 0; i < n_eval; ++i) {
            amnce::Tensor row({d});
            for (std::size_t j = 0; j < d; ++j) row.data[j] = held.at(i, j);
            mae += std::abs(f.data[i] - amnce::gaussian_log_ratio(oracle, row));
        }
        *out_mae = mae / static_cast<double>(n_eval);
    });
}

}  // extern "C"
