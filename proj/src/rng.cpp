#include "amnce/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace amnce {

double Rng::normal() {
    // Box-Muller, one variate per call; consumes exactly two engine draws.
    const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::uniform_index(std::size_t n) {
    if (n == 0) throw std::runtime_error("rng: uniform_index over empty range");
    // Rejection sampling removes modulo bias.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return static_cast<std::size_t>(v % n);
}

Tensor Rng::normal_tensor(std::vector<std::size_t> shape) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = normal();
    return t;
}

std::string Rng::serialize_state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
}

void Rng::restore_state(const std::string& text) {
    std::istringstream is(text);
    is >> engine_;
    if (is.fail()) throw std::runtime_error("rng: malformed serialized state");
}

}  // namespace amnce
