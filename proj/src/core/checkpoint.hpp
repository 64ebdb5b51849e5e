#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tensor.hpp"

namespace unist {

// Flat binary parameter container, little-endian throughout:
//   magic "UDIT" | version u32 | config count u32 | config ints u32[]
//   then per tensor: name length u32 | name bytes | rank u32 | dims u32[]
//   | float64 payload; entries run to end of file.
inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    uint32_t version = kCheckpointVersion;
    std::vector<uint32_t> config;
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor* find(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace unist
