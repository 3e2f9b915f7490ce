#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace midipose {

/// One pose label paired with its nearest CSI frame.
struct AlignedSample {
    std::size_t label_index = 0;
    std::size_t csi_index = 0;
    double gap = 0.0;  // |t_label - t_csi|
};

/// Nearest-timestamp pairing of every label with a CSI frame. Both inputs
/// must be sorted strictly increasing and non-empty; ties break toward the
/// earlier CSI frame. The pairing is monotone in label index.
std::vector<AlignedSample> align_nearest(std::span<const double> label_ts,
                                         std::span<const double> csi_ts);

struct SplitSpec {
    double train_ratio = 0.7;
    double test_ratio = 0.2;  // validation gets the remainder
    std::uint64_t seed = 0;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    std::vector<std::size_t> val;
};

/// Seeded shuffle split into floor(n*train) / floor(n*test) / remainder.
/// Requires n >= 10 so every partition is non-empty at the default ratios.
SplitIndices split_dataset(std::size_t n, const SplitSpec& spec);

/// Contiguous (temporal) split with the same partition sizes.
SplitIndices split_dataset_temporal(std::size_t n, const SplitSpec& spec);

/// Plain-text audit export: three sections, one index per line.
void write_split_file(const SplitIndices& split, const std::filesystem::path& path);

}  // namespace midipose
