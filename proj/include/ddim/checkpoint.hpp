#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddim/schedule.hpp"
#include "ddim/trainer.hpp"
#include "ddim/unet.hpp"

namespace ddim {

inline constexpr char kCheckpointMagic[8] = {'D', 'D', 'I', 'M', 'B', 'R', 'G', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Little-endian layout:
//   magic[8] "DDIMBRG1", u32 version, u32 height, u32 width,
//   f64 max_signal_rate, f64 min_signal_rate, f64 norm_mean, f64 norm_std,
//   u32 n, u32 widths[n] (level widths then the bottleneck width),
//   u32 block_depth, u32 embedding_size,
//   u32 tensor_count, then per tensor (sorted by name):
//     u16 name_len, name bytes, u8 rank, u32 dims[rank], f32 values[].
struct Checkpoint {
    UNetConfig config;
    DiffusionSchedule schedule;
    NormStats norm;
    std::map<std::string, Tensor<float>> tensors;  // parameters and running statistics

    static Checkpoint from_model(const UNet<float>& model, const NormStats& norm, const DiffusionSchedule& schedule);
    // Rebuilds the network; every tensor must match the wiring implied by config.
    UNet<float> to_model() const;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const UNet<float>& model, const NormStats& norm, const DiffusionSchedule& schedule,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ddim
