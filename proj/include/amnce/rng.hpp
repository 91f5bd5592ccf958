#ifndef AMNCE_RNG_HPP
#define AMNCE_RNG_HPP

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "amnce/tensor.hpp"

namespace amnce {

// Seeded 64-bit generator with an explicit reproducibility contract: the same
// seed and the same call sequence produce the same stream. normal() is a
// stateless Box-Muller transform, so the entire state lives in the engine and
// serializes exactly.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 1) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal();

    // Uniform on {0, ..., n-1}; n must be positive.
    std::size_t uniform_index(std::size_t n);

    Tensor normal_tensor(std::vector<std::size_t> shape);

    std::string serialize_state() const;
    void restore_state(const std::string& text);

private:
    std::mt19937_64 engine_;
};

}  // namespace amnce

#endif
