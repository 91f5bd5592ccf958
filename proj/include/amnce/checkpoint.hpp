#ifndef AMNCE_CHECKPOINT_HPP
#define AMNCE_CHECKPOINT_HPP

#include <string>

#include "amnce/training.hpp"

namespace amnce {

inline constexpr char kCheckpointMagic[4] = {'A', 'M', 'C', 'E'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Everything needed to sample from a trained model or resume a run: config
// echo, model parameters, optimizer moments, the memory matrix, and the RNG
// state. Parameter round trips are bit-exact (raw little-endian f64).
struct Checkpoint {
    std::string config_echo;
    Trainer::Resume state;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace amnce

#endif
