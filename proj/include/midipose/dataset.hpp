#pragma once

#include <filesystem>
#include <span>

#include "midipose/csi.hpp"

namespace midipose {

/// In-memory image of one MDP1 container.
struct Dataset {
    std::vector<CsiFrame> frames;
    std::vector<LabeledFrame> labels;
    std::optional<FeatureTensor> features;  // optional cached section
};

/// Writes the MDP1 container: magic "MDP1", version u32, counts (frames,
/// labels, feature frames, grid dims), then little-endian f32 records in
/// field declaration order. Reals are quantized to f32; enums are u32.
/// Throws on empty input or I/O failure.
void write_dataset(std::span<const CsiFrame> frames, std::span<const LabeledFrame> labels,
                   const std::filesystem::path& path,
                   const FeatureTensor* features = nullptr);

/// Exact inverse of write_dataset. Throws on bad magic/version, truncation,
/// malformed payload, or non-monotonic timestamps.
Dataset read_dataset(const std::filesystem::path& path);

inline constexpr std::uint32_t kDatasetVersion = 1;

}  // namespace midipose
