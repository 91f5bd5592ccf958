#ifndef AMNCE_CONFIG_HPP
#define AMNCE_CONFIG_HPP

#include <string>

#include "amnce/dataset.hpp"
#include "amnce/training.hpp"

namespace amnce {

// Flat key = value run configuration; '#' starts a comment, blank lines are
// ignored, unknown keys are rejected. serialize() emits every key with its
// current value, so a parsed echo reproduces the config exactly.
struct RunConfig {
    // dataset
    std::string dataset = "synth:ring";  // synth:{ring,two_spirals,gaussian_grid} or idx
    std::string idx_images;
    std::string idx_labels;
    std::size_t synth_n = 2000;
    std::uint64_t data_seed = 101;
    int heldout_label = -1;  // drop this label from training data (-1: keep all)
    std::size_t image_width = 0;   // 0: not image data
    std::size_t image_height = 0;

    // model and training (defaults follow the documented hyperparameters)
    TrainConfig train;
    std::size_t epochs = 100;
    std::size_t iters = 0;  // 0: epochs * (dataset size / batch_size)
    std::size_t stages = 4;

    // test time
    LangevinConfig test_prior_ld{100, 0.1};
    std::size_t sir_proposals = 100000;
    std::size_t anomaly_chains = 1;

    std::string output_dir = ".";

    bool seed_given = false;  // true once any source supplied a seed

    static RunConfig from_file(const std::string& path);
    static RunConfig from_text(const std::string& text);

    void set(const std::string& key, const std::string& value);
    std::string serialize() const;

    StageSchedule schedule_for(std::size_t dataset_size) const;
};

// Builds the dataset the config names (synthetic or IDX, heldout filter
// applied).
Dataset load_config_dataset(const RunConfig& cfg);

// Seed precedence: explicit config/flag value, else AMNCE_SEED, else 1.
void apply_seed_fallback(RunConfig& cfg);

}  // namespace amnce

#endif
