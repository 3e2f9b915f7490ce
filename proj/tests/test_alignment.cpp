#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "midipose/alignment.hpp"
#include "midipose/random.hpp"

using namespace midipose;

namespace {

// Brute-force nearest oracle: scan every CSI timestamp per label.
std::size_t nearest_index(double t, std::span<const double> csi) {
    std::size_t best = 0;
    double best_gap = std::abs(csi[0] - t);
    for (std::size_t j = 1; j < csi.size(); ++j) {
        const double gap = std::abs(csi[j] - t);
        if (gap < best_gap) {
            best = j;
            best_gap = gap;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("align_nearest: identical grids pair identically") {
    std::vector<double> ts = {0.0, 0.1, 0.2, 0.3};
    auto pairs = align_nearest(ts, ts);
    REQUIRE(pairs.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(pairs[i].label_index == i);
        CHECK(pairs[i].csi_index == i);
        CHECK(pairs[i].gap == 0.0);
    }
}

TEST_CASE("align_nearest: worked example") {
    std::vector<double> labels = {0.0, 0.0667, 0.1333};
    std::vector<double> csi = {0.0, 0.040, 0.080, 0.120, 0.160};
    auto pairs = align_nearest(labels, csi);
    CHECK(pairs[0].csi_index == 0);
    CHECK(pairs[1].csi_index == 2);
    CHECK(pairs[2].csi_index == 3);
}

TEST_CASE("align_nearest: ties break toward the earlier CSI frame") {
    std::vector<double> labels = {0.5};
    std::vector<double> csi = {0.4, 0.6};
    auto pairs = align_nearest(labels, csi);
    CHECK(pairs[0].csi_index == 0);
}

TEST_CASE("align_nearest matches brute force and is monotone") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> labels, csi;
        double t = 0;
        for (int i = 0; i < 40; ++i) {
            t += rng.uniform(0.01, 0.09);
            labels.push_back(t);
        }
        t = -0.5;
        for (int i = 0; i < 120; ++i) {
            t += rng.uniform(0.005, 0.05);
            csi.push_back(t);
        }
        auto pairs = align_nearest(labels, csi);
        REQUIRE(pairs.size() == labels.size());
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            CHECK(pairs[i].csi_index == nearest_index(labels[i], csi));
            CHECK(pairs[i].gap == std::abs(csi[pairs[i].csi_index] - labels[i]));
            if (i > 0) CHECK(pairs[i].csi_index >= pairs[i - 1].csi_index);
        }
    }
}

TEST_CASE("align_nearest: 15 Hz labels inside a 25 Hz grid stay within 20 ms") {
    std::vector<double> labels, csi;
    for (int i = 0; i < 60; ++i) labels.push_back(0.1 + i / 15.0);
    for (int i = 0; i < 110; ++i) csi.push_back(i / 25.0);
    for (const auto& p : align_nearest(labels, csi)) CHECK(p.gap <= 0.020 + 1e-12);
}

TEST_CASE("align_nearest rejects empty and unsorted input") {
    std::vector<double> empty, one = {0.0}, bad = {0.2, 0.1};
    CHECK_THROWS_AS(align_nearest(empty, one), std::invalid_argument);
    CHECK_THROWS_AS(align_nearest(one, empty), std::invalid_argument);
    CHECK_THROWS_AS(align_nearest(bad, one), std::invalid_argument);
}

TEST_CASE("split_dataset: exact sizes, disjoint cover, determinism") {
    SplitSpec spec;
    spec.seed = 42;

    auto s10 = split_dataset(10, spec);
    CHECK(s10.train.size() == 7);
    CHECK(s10.test.size() == 2);
    CHECK(s10.val.size() == 1);

    auto again = split_dataset(10, spec);
    CHECK(s10.train == again.train);
    CHECK(s10.test == again.test);
    CHECK(s10.val == again.val);

    spec.seed = 43;
    auto other = split_dataset(10, spec);
    CHECK(s10.train != other.train);  // astronomically unlikely to collide

    std::set<std::size_t> all;
    for (auto& part : {s10.train, s10.test, s10.val}) {
        for (auto i : part) CHECK(all.insert(i).second);
    }
    CHECK(all.size() == 10);
    CHECK(*all.begin() == 0);
    CHECK(*all.rbegin() == 9);

    CHECK_THROWS_AS(split_dataset(9, spec), std::invalid_argument);
}

TEST_CASE("split_dataset: paper-scale arithmetic") {
    SplitSpec spec;
    spec.seed = 7;
    auto s = split_dataset(221410, spec);
    CHECK(s.train.size() == 154987);
    CHECK(s.test.size() == 44282);
    CHECK(s.val.size() == 22141);
}

TEST_CASE("temporal split covers the range contiguously") {
    SplitSpec spec;
    auto s = split_dataset_temporal(20, spec);
    CHECK(s.train.size() == 14);
    CHECK(s.test.size() == 4);
    CHECK(s.val.size() == 2);
    CHECK(s.train.front() == 0);
    CHECK(s.test.front() == 14);
    CHECK(s.val.back() == 19);
}

TEST_CASE("split file export has three sections") {
    SplitSpec spec;
    spec.seed = 5;
    auto s = split_dataset(12, spec);
    const auto path = std::filesystem::temp_directory_path() / "midipose_split.txt";
    write_split_file(s, path);
    std::ifstream in(path);
    std::string line;
    int sections = 0, numbers = 0;
    while (std::getline(in, line)) {
        if (line.rfind("# ", 0) == 0) {
            ++sections;
        } else if (!line.empty()) {
            ++numbers;
        }
    }
    CHECK(sections == 3);
    CHECK(numbers == 12);
    std::filesystem::remove(path);
}
