// Command line front end; talks to the library exclusively through the C API.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "amnce.h"

namespace {

struct ConfigDeleter {
    void operator()(amnce_config* p) const { amnce_config_free(p); }
};
struct DatasetDeleter {
    void operator()(amnce_dataset* p) const { amnce_dataset_free(p); }
};
struct ModelDeleter {
    void operator()(amnce_model* p) const { amnce_model_free(p); }
};

using ConfigPtr = std::unique_ptr<amnce_config, ConfigDeleter>;
using DatasetPtr = std::unique_ptr<amnce_dataset, DatasetDeleter>;
using ModelPtr = std::unique_ptr<amnce_model, ModelDeleter>;

[[noreturn]] void fail(const std::string& context) {
    std::cerr << "error: " << context << ": " << amnce_last_error() << "\n";
    std::exit(1);
}

void check(amnce_status rc, const std::string& context) {
    if (rc != AMNCE_OK) fail(context);
}

std::uint64_t default_seed() {
    if (const char* env = std::getenv("AMNCE_SEED")) return std::strtoull(env, nullptr, 10);
    return 1;
}

std::string config_value(const amnce_config* cfg, const std::string& key) {
    char buf[4096];
    check(amnce_config_get(cfg, key.c_str(), buf, sizeof buf), "reading config key " + key);
    return buf;
}

ConfigPtr build_config(const std::string& config_path, const std::vector<std::string>& overrides,
                       std::int64_t seed) {
    amnce_config* raw = nullptr;
    if (config_path.empty()) {
        check(amnce_config_create(&raw), "creating config");
    } else {
        check(amnce_config_load(config_path.c_str(), &raw), "loading config " + config_path);
    }
    ConfigPtr cfg(raw);
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::cerr << "error: --set expects key=value, got '" << kv << "'\n";
            std::exit(1);
        }
        check(amnce_config_set(cfg.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()),
              "setting " + kv);
    }
    if (seed >= 0) {
        check(amnce_config_set(cfg.get(), "seed", std::to_string(seed).c_str()), "setting seed");
    }
    return cfg;
}

ModelPtr load_model(const std::string& path) {
    amnce_model* raw = nullptr;
    check(amnce_model_load(path.c_str(), &raw), "loading checkpoint " + path);
    return ModelPtr(raw);
}

ConfigPtr model_config(const amnce_model* model) {
    std::vector<char> buf(1 << 16);
    check(amnce_model_config(model, buf.data(), buf.size()), "reading model config");
    amnce_config* raw = nullptr;
    check(amnce_config_parse(buf.data(), &raw), "parsing model config");
    return ConfigPtr(raw);
}

DatasetPtr dataset_from_flags(const std::string& idx_images, const std::string& idx_labels,
                              const std::string& synth, std::int64_t synth_n, std::uint64_t data_seed) {
    amnce_dataset* raw = nullptr;
    if (!idx_images.empty()) {
        check(amnce_dataset_load_idx(idx_images.c_str(), idx_labels.empty() ? nullptr : idx_labels.c_str(),
                                     &raw),
              "loading idx data");
    } else if (!synth.empty()) {
        check(amnce_dataset_synth(synth.c_str(), synth_n, data_seed, &raw), "building synthetic data");
    } else {
        std::cerr << "error: supply --idx-images or --synth\n";
        std::exit(1);
    }
    return DatasetPtr(raw);
}

void write_samples_csv(const std::string& path, const std::vector<double>& x, std::int64_t count,
                       std::int64_t dim) {
    std::ofstream out(path);
    if (!out) fail("opening " + path);
    out.precision(10);
    for (std::int64_t i = 0; i < count; ++i) {
        for (std::int64_t j = 0; j < dim; ++j) {
            if (j) out << ',';
            out << x[static_cast<std::size_t>(i * dim + j)];
        }
        out << '\n';
    }
}

std::int64_t grid_cols_for(std::int64_t count) {
    std::int64_t c = 1;
    while (c * c < count) ++c;
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Latent-space energy-based prior training via multi-stage contrastive estimation"};
    app.require_subcommand(1);

    // ---- train ----
    auto* train = app.add_subcommand("train", "Train a model from a run config");
    std::string train_config, train_out, train_log, train_resume;
    std::vector<std::string> train_sets;
    std::int64_t train_seed = -1, stop_at = -1;
    train->add_option("--config", train_config, "Run config file (key = value lines)");
    train->add_option("--seed", train_seed, "Seed override");
    train->add_option("--set", train_sets, "Config override key=value (repeatable)");
    train->add_option("--stop-at", stop_at, "Stop after this iteration without freezing the stage");
    train->add_option("--resume", train_resume, "Resume a partial checkpoint to completion");
    train->add_option("--out", train_out, "Checkpoint output path (default: <output_dir>/checkpoint.amce)");
    train->add_option("--log", train_log, "Training log CSV path (default: <output_dir>/train_log.csv)");

    // ---- sample ----
    auto* sample = app.add_subcommand("sample", "Decode samples from the learned prior");
    std::string sample_ckpt, sample_method = "langevin", sample_out = "samples";
    std::int64_t sample_count = 64, sample_steps = -1, sample_proposals = -1;
    double sample_step_size = -1.0;
    std::int64_t sample_seed = -1;
    sample->add_option("--checkpoint", sample_ckpt, "Trained checkpoint")->required();
    sample->add_option("--method", sample_method, "langevin or sir");
    sample->add_option("--count", sample_count, "Number of samples");
    sample->add_option("--steps", sample_steps, "Prior Langevin steps (default from config)");
    sample->add_option("--step-size", sample_step_size, "Prior Langevin step size");
    sample->add_option("--proposals", sample_proposals, "SIR proposal count");
    sample->add_option("--seed", sample_seed, "Sampling seed");
    sample->add_option("--out", sample_out, "Output prefix (.csv and, for image data, .pgm)");

    // ---- reconstruct ----
    auto* recon = app.add_subcommand("reconstruct", "Posterior reconstruction of test data");
    std::string recon_ckpt, recon_images, recon_labels, recon_synth, recon_out = "recon";
    std::int64_t recon_n = 1000, recon_count = -1, recon_steps = -1, recon_seed = -1;
    double recon_step_size = -1.0;
    std::uint64_t recon_data_seed = 202;
    recon->add_option("--checkpoint", recon_ckpt, "Trained checkpoint")->required();
    recon->add_option("--idx-images", recon_images, "IDX test images");
    recon->add_option("--idx-labels", recon_labels, "IDX test labels");
    recon->add_option("--synth", recon_synth, "Synthetic kind (ring, two_spirals, gaussian_grid)");
    recon->add_option("--n", recon_n, "Synthetic test size");
    recon->add_option("--data-seed", recon_data_seed, "Synthetic data seed");
    recon->add_option("--count", recon_count, "Limit to the first N examples");
    recon->add_option("--steps", recon_steps, "Posterior Langevin steps (default from config)");
    recon->add_option("--step-size", recon_step_size, "Posterior Langevin step size");
    recon->add_option("--seed", recon_seed, "Sampling seed");
    recon->add_option("--out", recon_out, "Output prefix");

    // ---- anomaly ----
    auto* anomaly = app.add_subcommand("anomaly", "Score labeled data and report AUPRC");
    std::string an_ckpt, an_images, an_labels, an_out = "anomaly.csv";
    int an_heldout = 1;
    std::int64_t an_steps = -1, an_chains = -1, an_seed = -1, an_count = -1;
    double an_step_size = -1.0;
    anomaly->add_option("--checkpoint", an_ckpt, "Trained checkpoint")->required();
    anomaly->add_option("--idx-images", an_images, "IDX test images")->required();
    anomaly->add_option("--idx-labels", an_labels, "IDX test labels")->required();
    anomaly->add_option("--heldout", an_heldout, "Label treated as anomalous")->required();
    anomaly->add_option("--count", an_count, "Limit to the first N examples");
    anomaly->add_option("--steps", an_steps, "Posterior Langevin steps (default from config)");
    anomaly->add_option("--step-size", an_step_size, "Posterior Langevin step size");
    anomaly->add_option("--chains", an_chains, "Posterior chains averaged per example");
    anomaly->add_option("--seed", an_seed, "Sampling seed");
    anomaly->add_option("--out", an_out, "Output CSV");

    // ---- eval-ratio ----
    auto* ratio = app.add_subcommand("eval-ratio", "Gaussian density-ratio oracle benchmark");
    std::int64_t ratio_seed = -1, ratio_train = 50000, ratio_eval = 1000;
    std::string ratio_out;
    ratio->add_option("--seed", ratio_seed, "Benchmark seed");
    ratio->add_option("--train-samples", ratio_train, "Training samples per class");
    ratio->add_option("--eval-points", ratio_eval, "Held-out evaluation points");
    ratio->add_option("--out", ratio_out, "Optional CSV output");

    // ---- gradcheck ----
    auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
    std::int64_t grad_seed = -1, grad_configs = 50;
    grad->add_option("--seed", grad_seed, "Suite seed");
    grad->add_option("--configs", grad_configs, "Number of random network configurations");

    CLI11_PARSE(app, argc, argv);

    const auto seed_or_default = [](std::int64_t s) {
        return s >= 0 ? static_cast<std::uint64_t>(s) : default_seed();
    };

    if (*train) {
        if (!train_resume.empty()) {
            ModelPtr model = load_model(train_resume);
            ConfigPtr cfg = model_config(model.get());
            amnce_dataset* ds_raw = nullptr;
            check(amnce_dataset_from_config(cfg.get(), &ds_raw), "rebuilding training data");
            DatasetPtr ds(ds_raw);
            const std::string out = train_out.empty() ? train_resume : train_out;
            const std::string log =
                train_log.empty() ? config_value(cfg.get(), "output_dir") + "/train_log.csv" : train_log;
            check(amnce_resume(model.get(), ds.get(), log.c_str()), "resuming training");
            check(amnce_model_save(model.get(), out.c_str()), "saving checkpoint");
            std::cout << "resumed to iteration " << amnce_model_iteration(model.get()) << ", stages "
                      << amnce_model_num_stages(model.get()) << ", checkpoint " << out << "\n";
            return 0;
        }
        ConfigPtr cfg = build_config(train_config, train_sets, train_seed);
        amnce_dataset* ds_raw = nullptr;
        check(amnce_dataset_from_config(cfg.get(), &ds_raw), "building training data");
        DatasetPtr ds(ds_raw);
        const std::string outdir = config_value(cfg.get(), "output_dir");
        const std::string out = train_out.empty() ? outdir + "/checkpoint.amce" : train_out;
        const std::string log = train_log.empty() ? outdir + "/train_log.csv" : train_log;
        amnce_model* model_raw = nullptr;
        if (stop_at >= 0) {
            check(amnce_train_until(cfg.get(), ds.get(), static_cast<std::uint64_t>(stop_at), log.c_str(),
                                    &model_raw),
                  "training");
        } else {
            check(amnce_train(cfg.get(), ds.get(), log.c_str(), &model_raw), "training");
        }
        ModelPtr model(model_raw);
        check(amnce_model_save(model.get(), out.c_str()), "saving checkpoint");
        std::cout << "trained " << amnce_model_iteration(model.get()) << " iterations, stages "
                  << amnce_model_num_stages(model.get()) << ", generator params "
                  << amnce_model_param_count(model.get(), 0) << ", prior params "
                  << amnce_model_param_count(model.get(), 1) << "\ncheckpoint: " << out
                  << "\nlog: " << log << "\n";
        return 0;
    }

    if (*sample) {
        ModelPtr model = load_model(sample_ckpt);
        ConfigPtr cfg = model_config(model.get());
        const std::int64_t dim = amnce_model_data_dim(model.get());
        if (sample_steps < 0) sample_steps = std::stoll(config_value(cfg.get(), "test_prior_steps"));
        if (sample_step_size <= 0.0) {
            sample_step_size = std::stod(config_value(cfg.get(), "test_prior_step_size"));
        }
        if (sample_proposals < 0) sample_proposals = std::stoll(config_value(cfg.get(), "sir_proposals"));
        std::vector<double> x(static_cast<std::size_t>(sample_count * dim));
        check(amnce_sample(model.get(), sample_method.c_str(), sample_count, sample_steps,
                           sample_step_size, sample_proposals, seed_or_default(sample_seed), x.data(),
                           static_cast<std::int64_t>(x.size())),
              "sampling");
        write_samples_csv(sample_out + ".csv", x, sample_count, dim);
        std::cout << "wrote " << sample_out << ".csv\n";
        const std::int64_t w = std::stoll(config_value(cfg.get(), "image_width"));
        const std::int64_t h = std::stoll(config_value(cfg.get(), "image_height"));
        if (w > 0 && h > 0 && w * h == dim) {
            check(amnce_write_pgm_grid(x.data(), sample_count, w, h, grid_cols_for(sample_count),
                                       (sample_out + ".pgm").c_str()),
                  "writing pgm");
            std::cout << "wrote " << sample_out << ".pgm\n";
        }
        return 0;
    }

    if (*recon) {
        ModelPtr model = load_model(recon_ckpt);
        ConfigPtr cfg = model_config(model.get());
        DatasetPtr ds = dataset_from_flags(recon_images, recon_labels, recon_synth, recon_n, recon_data_seed);
        if (recon_count > 0 && recon_count < amnce_dataset_size(ds.get())) {
            amnce_dataset* sliced = nullptr;
            check(amnce_dataset_slice(ds.get(), 0, recon_count, &sliced), "slicing test data");
            ds.reset(sliced);
        }
        if (recon_steps < 0) recon_steps = std::stoll(config_value(cfg.get(), "posterior_steps"));
        if (recon_step_size <= 0.0) {
            recon_step_size = std::stod(config_value(cfg.get(), "posterior_step_size"));
        }
        const std::int64_t n = amnce_dataset_size(ds.get());
        const std::int64_t dim = amnce_dataset_dim(ds.get());
        std::vector<double> rx(static_cast<std::size_t>(n * dim));
        double mse = 0.0;
        check(amnce_reconstruct(model.get(), ds.get(), recon_steps, recon_step_size,
                                seed_or_default(recon_seed), rx.data(),
                                static_cast<std::int64_t>(rx.size()), &mse),
              "reconstructing");
        std::cout << "reconstruction mse over " << n << " examples: " << mse << "\n";
        write_samples_csv(recon_out + ".csv", rx, n, dim);
        const std::int64_t w = std::stoll(config_value(cfg.get(), "image_width"));
        const std::int64_t h = std::stoll(config_value(cfg.get(), "image_height"));
        if (w > 0 && h > 0 && w * h == dim) {
            std::vector<double> orig(static_cast<std::size_t>(n * dim));
            check(amnce_dataset_examples(ds.get(), orig.data(), static_cast<std::int64_t>(orig.size())),
                  "reading originals");
            check(amnce_write_pgm_grid(orig.data(), n, w, h, grid_cols_for(n),
                                       (recon_out + "_orig.pgm").c_str()),
                  "writing originals pgm");
            check(amnce_write_pgm_grid(rx.data(), n, w, h, grid_cols_for(n),
                                       (recon_out + "_recon.pgm").c_str()),
                  "writing recon pgm");
            std::cout << "wrote " << recon_out << "_orig.pgm and " << recon_out << "_recon.pgm\n";
        }
        return 0;
    }

    if (*anomaly) {
        ModelPtr model = load_model(an_ckpt);
        ConfigPtr cfg = model_config(model.get());
        DatasetPtr ds = dataset_from_flags(an_images, an_labels, "", 0, 0);
        if (!amnce_dataset_has_labels(ds.get())) {
            std::cerr << "error: anomaly scoring requires labeled data\n";
            return 1;
        }
        if (an_count > 0 && an_count < amnce_dataset_size(ds.get())) {
            amnce_dataset* sliced = nullptr;
            check(amnce_dataset_slice(ds.get(), 0, an_count, &sliced), "slicing test data");
            ds.reset(sliced);
        }
        if (an_steps < 0) an_steps = std::stoll(config_value(cfg.get(), "posterior_steps"));
        if (an_step_size <= 0.0) an_step_size = std::stod(config_value(cfg.get(), "posterior_step_size"));
        if (an_chains < 0) an_chains = std::stoll(config_value(cfg.get(), "anomaly_chains"));
        const std::int64_t n = amnce_dataset_size(ds.get());
        std::vector<double> scores(static_cast<std::size_t>(n));
        std::vector<int> labels(static_cast<std::size_t>(n));
        check(amnce_dataset_labels(ds.get(), labels.data(), n), "reading labels");
        check(amnce_anomaly_scores(model.get(), ds.get(), an_steps, an_step_size, an_chains,
                                   seed_or_default(an_seed), scores.data(), n),
              "scoring");
        std::vector<int> is_anom(static_cast<std::size_t>(n));
        std::int64_t n_anom = 0;
        for (std::int64_t i = 0; i < n; ++i) {
            is_anom[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(i)] == an_heldout;
            n_anom += is_anom[static_cast<std::size_t>(i)];
        }
        double ap = 0.0;
        check(amnce_auprc(scores.data(), is_anom.data(), n, &ap), "computing auprc");
        std::ofstream out(an_out);
        if (!out) fail("opening " + an_out);
        out << "heldout,n_normal,n_anomalous,auprc\n";
        out << an_heldout << ',' << (n - n_anom) << ',' << n_anom << ',' << ap << '\n';
        std::cout << "heldout " << an_heldout << ": auprc " << ap << " over " << n << " examples ("
                  << n_anom << " anomalous); wrote " << an_out << "\n";
        return 0;
    }

    if (*ratio) {
        double mae = 0.0;
        check(amnce_ratio_benchmark(seed_or_default(ratio_seed), ratio_train, ratio_eval, &mae),
              "running ratio benchmark");
        std::cout << "log-ratio mae vs closed form: " << mae << " (" << ratio_train
                  << " train samples per class, " << ratio_eval << " eval points)\n";
        if (!ratio_out.empty()) {
            std::ofstream out(ratio_out);
            if (!out) fail("opening " + ratio_out);
            out << "train_samples,eval_points,mae\n" << ratio_train << ',' << ratio_eval << ',' << mae << '\n';
        }
        return 0;
    }

    if (*grad) {
        double err = 0.0;
        check(amnce_gradcheck(seed_or_default(grad_seed), grad_configs, &err), "running gradcheck");
        std::cout << "max relative error over " << grad_configs << " configurations: " << err << "\n";
        if (err >= 1e-4) {
            std::cerr << "gradcheck FAILED (threshold 1e-4)\n";
            return 1;
        }
        return 0;
    }

    return 0;
}
