#include "midipose/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>

#include "midipose/random.hpp"

namespace midipose {
namespace {

void require_sorted(std::span<const double> ts, const char* name) {
    if (ts.empty()) throw std::invalid_argument(std::string("align_nearest: empty ") + name);
    for (std::size_t i = 1; i < ts.size(); ++i) {
        if (!(ts[i] > ts[i - 1])) {
            throw std::invalid_argument(std::string("align_nearest: ") + name +
                                        " timestamps not strictly increasing");
        }
    }
}

// Partition sizes via integer arithmetic on the ratios in thousandths;
// floor(n * 0.7) in floating point under-counts for some n.
std::size_t floor_ratio(std::size_t n, double ratio) {
    const auto numer = static_cast<std::uint64_t>(std::llround(ratio * 1000.0));
    return static_cast<std::size_t>(static_cast<std::uint64_t>(n) * numer / 1000u);
}

}  // namespace

std::vector<AlignedSample> align_nearest(std::span<const double> label_ts,
                                         std::span<const double> csi_ts) {
    require_sorted(label_ts, "label");
    require_sorted(csi_ts, "csi");

    std::vector<AlignedSample> out;
    out.reserve(label_ts.size());
    std::size_t j = 0;
    for (std::size_t i = 0; i < label_ts.size(); ++i) {
        const double t = label_ts[i];
        // Labels are sorted, so the best CSI index never moves backwards.
        while (j + 1 < csi_ts.size() &&
               std::abs(csi_ts[j + 1] - t) < std::abs(csi_ts[j] - t)) {
            ++j;
        }
        out.push_back({i, j, std::abs(csi_ts[j] - t)});
    }
    return out;
}

SplitIndices split_dataset(std::size_t n, const SplitSpec& spec) {
    if (n < 10) {
        throw std::invalid_argument("split_dataset: need at least 10 samples, got " +
                                    std::to_string(n));
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(spec.seed);
    rng.shuffle(order);

    const std::size_t n_train = floor_ratio(n, spec.train_ratio);
    const std::size_t n_test = floor_ratio(n, spec.test_ratio);
    if (n_train + n_test >= n) throw std::invalid_argument("split_dataset: ratios leave no validation set");

    SplitIndices split;
    split.train.assign(order.begin(), order.begin() + n_train);
    split.test.assign(order.begin() + n_train, order.begin() + n_train + n_test);
    split.val.assign(order.begin() + n_train + n_test, order.end());
    return split;
}

SplitIndices split_dataset_temporal(std::size_t n, const SplitSpec& spec) {
    if (n < 10) {
        throw std::invalid_argument("split_dataset: need at least 10 samples, got " +
                                    std::to_string(n));
    }
    const std::size_t n_train = floor_ratio(n, spec.train_ratio);
    const std::size_t n_test = floor_ratio(n, spec.test_ratio);
    if (n_train + n_test >= n) throw std::invalid_argument("split_dataset: ratios leave no validation set");

    SplitIndices split;
    for (std::size_t i = 0; i < n; ++i) {
        if (i < n_train) {
            split.train.push_back(i);
        } else if (i < n_train + n_test) {
            split.test.push_back(i);
        } else {
            split.val.push_back(i);
        }
    }
    return split;
}

void write_split_file(const SplitIndices& split, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_split_file: cannot open " + path.string());
    const auto dump = [&out](const char* name, const std::vector<std::size_t>& idx) {
        out << "# " << name << " " << idx.size() << "\n";
        for (std::size_t i : idx) out << i << "\n";
    };
    dump("train", split.train);
    dump("test", split.test);
    dump("val", split.val);
    if (!out) throw std::runtime_error("write_split_file: I/O failure");
}

}  // namespace midipose
