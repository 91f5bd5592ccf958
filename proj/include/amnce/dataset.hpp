#ifndef AMNCE_DATASET_HPP
#define AMNCE_DATASET_HPP

#include <optional>
#include <string>
#include <vector>

#include "amnce/rng.hpp"
#include "amnce/tensor.hpp"

namespace amnce {

// Examples scaled to [-1, 1], one flattened row per example.
struct Dataset {
    Tensor examples;  // [n, D]
    std::optional<std::vector<int>> labels;

    std::size_t size() const { return examples.rows(); }
    std::size_t dim() const { return examples.cols(); }
    void validate() const;

    Dataset filter_label(int label, bool keep) const;  // requires labels
    Dataset slice(std::size_t start, std::size_t count) const;
};

// IDX binary format: big-endian u32 magic (0x803 images, 0x801 labels),
// big-endian u32 dims, u8 payload. Pixels map to v / 127.5 - 1; images are
// flattened row-major. labels_path may be empty.
Dataset load_idx(const std::string& images_path, const std::string& labels_path = "");

enum class SynthKind { GaussianGrid, TwoSpirals, Ring };

struct SynthParams {
    std::size_t grid_size = 3;    // gaussian_grid: grid_size^2 components over [-0.6, 0.6]^2
    double grid_std = 0.05;
    double ring_radius = 0.7;     // ring: radius plus isotropic noise
    double ring_std = 0.03;
    double spiral_turns = 1.75;   // two_spirals: arms of `spiral_turns` revolutions
    double spiral_noise = 0.02;
};

// Deterministic given the rng seed; values clipped to [-1, 1].
Dataset synth_dataset(SynthKind kind, std::size_t n, Rng& rng, const SynthParams& params = {});

SynthKind parse_synth_kind(const std::string& name);
std::string synth_kind_name(SynthKind kind);

// Binary PGM (P5) grid of k images; values mapped from [-1, 1] to [0, 255]
// with clamping. Unfilled grid cells stay black.
void emit_samples_pgm(const Tensor& images, std::size_t width, std::size_t height, std::size_t grid_cols,
                      const std::string& path);

}  // namespace amnce

#endif
