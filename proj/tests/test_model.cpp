#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "midipose/model.hpp"
#include "midipose/random.hpp"

using namespace midipose;
using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

ModelConfig tiny_config() {
    ModelConfig mc;
    mc.subcarriers = 8;
    mc.latent_dim = 8;
    mc.heads = 2;
    mc.encoder_hidden = 8;
    mc.backbone_blocks = 2;
    mc.backbone_hidden = 10;
    mc.head_hidden = 10;
    return mc;
}

ModelConfig tiny_baseline_config() {
    ModelConfig mc;
    mc.subcarriers = 40;
    mc.conv_channels = {4, 5, 6};
    return mc;
}

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// Random but learnable aligned data at the full feature grid.
AlignedDataset toy_dataset(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    AlignedDataset data;
    data.features.frames = n;
    data.features.data.resize(n * FeatureTensor::frame_stride());
    for (auto& v : data.features.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    for (std::size_t i = 0; i < n; ++i) {
        data.csi_of_sample.push_back(i);
        Pose2D pose;
        for (std::size_t j = 0; j < pose.xy.size(); ++j) pose.xy[j] = 0.5;
        data.poses.push_back(pose);
        data.motions.push_back(MotionKind::walk);
        data.tags.push_back(StateTag::none);
    }
    return data;
}

std::vector<std::size_t> iota_idx(std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
}

}  // namespace

TEST_CASE("encode_domain: zero input with zero biases gives a zero latent") {
    MidiPoseModel model(tiny_config(), 3);
    // biases are zero-initialized by construction
    std::vector<double> zeros(model.config().amp_dim(), 0.0);
    const auto z = model.encode_domain(zeros, 0);
    REQUIRE(z.size() == model.config().latent_dim);
    for (double v : z) CHECK(v == 0.0);
}

TEST_CASE("encode_domain: latent length matches config for every domain") {
    ModelConfig mc;  // desk-scale dims
    MidiPoseModel model(mc, 5);
    for (std::size_t which = 0; which < 3; ++which) {
        const std::size_t in = which == 0 ? mc.amp_dim() : which == 1 ? mc.phase_dim() : mc.dop_dim();
        std::vector<double> x(in, 0.25);
        CHECK(model.encode_domain(x, which).size() == 128);
    }
    std::vector<double> wrong(10, 0.0);
    CHECK_THROWS_AS(model.encode_domain(wrong, 0), std::invalid_argument);
}

TEST_CASE("encoder gradients match finite differences") {
    Rng rng(31);
    std::vector<Tensor> params = {random_tensor({6, 8}, rng), random_tensor({8}, rng),
                                  random_tensor({8, 4}, rng), random_tensor({4}, rng),
                                  random_tensor({3, 6}, rng)};
    Tensor target = random_tensor({3, 4}, rng);
    const double err = ad::grad_check(
        [&](Tape& t, std::span<const Var> p) {
            Var h = t.relu(t.linear(p[4], p[0], p[1]));
            return t.mse(t.linear(h, p[2], p[3]), t.constant(target));
        },
        params);
    CHECK(err < 1e-4);
}

TEST_CASE("fusion is permutation-equivariant over domain tokens") {
    Rng rng(33);
    const std::size_t d = 8;
    Tape tape;
    ad::AttentionWeights w;
    w.wq = tape.leaf(random_tensor({d, d}, rng));
    w.bq = tape.leaf(random_tensor({d}, rng));
    w.wk = tape.leaf(random_tensor({d, d}, rng));
    w.wv = tape.leaf(random_tensor({d, d}, rng));
    w.bv = tape.leaf(random_tensor({d}, rng));
    w.wo = tape.leaf(random_tensor({d, d}, rng));
    w.bo = tape.leaf(random_tensor({d}, rng));
    ad::MlpWeights mlp{tape.leaf(random_tensor({d, 2 * d}, rng)), tape.leaf(random_tensor({2 * d}, rng)),
                       tape.leaf(random_tensor({2 * d, d}, rng)), tape.leaf(random_tensor({d}, rng))};

    Tensor tokens = random_tensor({3, d}, rng);
    Tensor permuted({3, d});
    const std::array<std::size_t, 3> perm = {2, 0, 1};
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = 0; c < d; ++c) permuted[r * d + c] = tokens[perm[r] * d + c];
    }

    const auto fuse = [&](Tensor in) {
        Var att = ad::multi_head_attention(tape, tape.constant(std::move(in)), w, 3, 2);
        Var h = tape.relu(tape.linear(att, mlp.w1, mlp.b1));
        return tape.linear(h, mlp.w2, mlp.b2);
    };
    const Tensor base = tape.value(fuse(tokens));       // copy: the tape grows below
    const Tensor perm_out = tape.value(fuse(permuted));
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = 0; c < d; ++c) {
            CHECK(perm_out[r * d + c] == doctest::Approx(base[perm[r] * d + c]).epsilon(1e-12));
        }
    }
}

TEST_CASE("fusion with identical tokens and identity projections yields the token's MLP image") {
    Rng rng(34);
    const std::size_t d = 6;
    Tape tape;
    Tensor eye({d, d});
    for (std::size_t i = 0; i < d; ++i) eye[i * d + i] = 1.0;
    ad::AttentionWeights w;
    w.wq = tape.constant(eye);
    w.wk = tape.constant(eye);
    w.wv = tape.constant(eye);
    w.wo = tape.constant(eye);
    w.bq = tape.constant(Tensor({d}));
    w.bv = tape.constant(Tensor({d}));
    w.bo = tape.constant(Tensor({d}));
    Tensor w1 = random_tensor({d, 2 * d}, rng), b1 = random_tensor({2 * d}, rng);
    Tensor w2 = random_tensor({2 * d, d}, rng), b2 = random_tensor({d}, rng);

    Tensor token = random_tensor({1, d}, rng);
    Tensor tokens({3, d});
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = 0; c < d; ++c) tokens[r * d + c] = token[c];
    }
    Var att = ad::multi_head_attention(tape, tape.constant(tokens), w, 3, 3);
    Var out = tape.linear(tape.relu(tape.linear(att, tape.constant(w1), tape.constant(b1))),
                          tape.constant(w2), tape.constant(b2));

    Var ref = tape.linear(tape.relu(tape.linear(tape.constant(token), tape.constant(w1),
                                                tape.constant(b1))),
                          tape.constant(w2), tape.constant(b2));
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = 0; c < d; ++c) {
            CHECK(tape.value(out)[r * d + c] ==
                  doctest::Approx(tape.value(ref)[c]).epsilon(1e-12));
        }
    }
}

TEST_CASE("regress_pose: output shape and zero-head behavior") {
    MidiPoseModel model(tiny_config(), 7);
    const auto& mc = model.config();
    // zero the regression head: every keypoint lands at the origin
    auto& store = model.params();
    for (const char* name : {"head.l2.w", "head.l2.b"}) {
        Tensor& t = store.tensor(name);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.0;
    }
    Rng rng(8);
    Tape tape;
    std::vector<Var> pvars;
    for (std::size_t i = 0; i < store.count(); ++i) pvars.push_back(tape.constant(store.item(i).tensor));
    std::vector<Var> ivars = {tape.constant(random_tensor({5, mc.amp_dim()}, rng)),
                              tape.constant(random_tensor({5, mc.phase_dim()}, rng)),
                              tape.constant(random_tensor({5, mc.dop_dim()}, rng))};
    Var out = model.forward(tape, pvars, ivars);
    REQUIRE(tape.value(out).shape() == std::vector<std::size_t>{5, 34});
    for (std::size_t i = 0; i < tape.value(out).size(); ++i) CHECK(tape.value(out)[i] == 0.0);
}

TEST_CASE("full MiDiPose forward gradients match finite differences on a 4-sample batch") {
    MidiPoseModel model(tiny_config(), 11);
    CHECK(model_gradient_check(model, 12) < 1e-4);
}

TEST_CASE("fault injection trips the full-model gradient check") {
    MidiPoseModel model(tiny_config(), 11);
    CHECK(model_gradient_check(model, 12, /*inject_fault=*/true) > 1e-3);
}

TEST_CASE("concat fusion mode bypasses attention") {
    ModelConfig mc = tiny_config();
    mc.fusion = FusionMode::concat;
    MidiPoseModel model(mc, 13);
    Rng rng(14);
    Tape tape;
    auto& store = model.params();
    std::vector<Var> pvars;
    for (std::size_t i = 0; i < store.count(); ++i) pvars.push_back(tape.constant(store.item(i).tensor));
    std::vector<Var> ivars = {tape.constant(random_tensor({2, mc.amp_dim()}, rng)),
                              tape.constant(random_tensor({2, mc.phase_dim()}, rng)),
                              tape.constant(random_tensor({2, mc.dop_dim()}, rng))};
    Var out = model.forward(tape, pvars, ivars);
    CHECK(tape.value(out).shape() == std::vector<std::size_t>{2, 34});
}

TEST_CASE("pose_mse: zero at equality, quadratic in offset, symmetric") {
    Pose2D a, b;
    for (std::size_t k = 0; k < kKeypoints; ++k) {
        a.set(k, 0.3 + 0.01 * double(k), 0.6 - 0.01 * double(k));
        b.set(k, a.x(k) + 0.1, a.y(k) + 0.1);
    }
    CHECK(pose_mse(a, a) == 0.0);
    CHECK(pose_mse(a, b) == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(pose_mse(a, b) == pose_mse(b, a));
}

TEST_CASE("loss gradient is exact for the quadratic objective") {
    Rng rng(15);
    std::vector<Tensor> params = {random_tensor({2, 34}, rng, 0.0, 1.0)};
    Tensor target = random_tensor({2, 34}, rng, 0.0, 1.0);
    const double err = ad::grad_check(
        [&](Tape& t, std::span<const Var> p) { return t.mse(p[0], t.constant(target)); }, params);
    CHECK(err < 1e-6);
}

TEST_CASE("baseline: zero head gives the origin pose; gradients check out") {
    BaselineModel model(tiny_baseline_config(), 17);
    auto& store = model.params();
    for (const char* name : {"head.w", "head.b"}) {
        Tensor& t = store.tensor(name);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.0;
    }
    Rng rng(18);
    const auto& mc = model.config();
    Tape tape;
    std::vector<Var> pvars;
    for (std::size_t i = 0; i < store.count(); ++i) pvars.push_back(tape.constant(store.item(i).tensor));
    std::vector<Var> ivars = {
        tape.constant(random_tensor({3, mc.baseline_in_channels() * mc.subcarriers}, rng))};
    Var out = model.forward(tape, pvars, ivars);
    REQUIRE(tape.value(out).shape() == std::vector<std::size_t>{3, 34});
    for (std::size_t i = 0; i < tape.value(out).size(); ++i) CHECK(tape.value(out)[i] == 0.0);

    BaselineModel fresh(tiny_baseline_config(), 19);
    CHECK(model_gradient_check(fresh, 20) < 1e-4);
}

TEST_CASE("training: determinism, loss decrease, error paths") {
    AlignedDataset data = toy_dataset(30, 21);
    const auto all_idx = iota_idx(30);

    TrainConfig tc;
    tc.batch = 10;
    tc.epochs = 2;
    tc.seed = 5;

    MidiPoseModel m1(ModelConfig{}, tc.seed);
    m1.fit_normalization(data.features, all_idx);
    const TrainResult r1 = train_model(m1, data, all_idx, tc);

    MidiPoseModel m2(ModelConfig{}, tc.seed);
    m2.fit_normalization(data.features, all_idx);
    const TrainResult r2 = train_model(m2, data, all_idx, tc);

    REQUIRE(r1.epoch_loss.size() == 2);
    CHECK(r1.epoch_loss == r2.epoch_loss);  // bitwise determinism
    CHECK(r1.epoch_lr == r2.epoch_lr);
    for (std::size_t i = 0; i < m1.params().count(); ++i) {
        const auto& a = m1.params().item(i).tensor;
        const auto& b = m2.params().item(i).tensor;
        for (std::size_t j = 0; j < a.size(); ++j) REQUIRE(a[j] == b[j]);
    }
    // constant targets: the head bias alone can cut the loss quickly
    CHECK(r1.epoch_loss[1] < r1.epoch_loss[0]);

    std::vector<std::size_t> empty;
    CHECK_THROWS_AS(train_model(m1, data, empty, tc), std::invalid_argument);
    TrainConfig big = tc;
    big.batch = 64;
    CHECK_THROWS_AS(train_model(m1, data, all_idx, big), std::invalid_argument);
}

TEST_CASE("checkpoint round-trip preserves predictions within f32 quantization") {
    AlignedDataset data = toy_dataset(12, 23);
    const auto idx = iota_idx(12);
    MidiPoseModel model(ModelConfig{}, 29);
    model.fit_normalization(data.features, idx);
    const auto before = model.predict(data, idx);

    namespace fs = std::filesystem;
    const fs::path path = fs::temp_directory_path() / "midipose_model_rt.mdpw";
    nn::save_checkpoint(model.params(), path);
    MidiPoseModel loaded(ModelConfig{}, 31);  // different init, fully overwritten
    nn::load_checkpoint(loaded.params(), path);
    const auto after = loaded.predict(data, idx);

    REQUIRE(before.size() == after.size());
    for (std::size_t i = 0; i < before.size(); ++i) {
        for (std::size_t j = 0; j < before[i].xy.size(); ++j) {
            CHECK(std::abs(before[i].xy[j] - after[i].xy[j]) <= 1e-6);
        }
    }
    // kind mismatch: a baseline store cannot absorb a midipose checkpoint
    BaselineModel wrong(ModelConfig{}, 33);
    CHECK_THROWS_AS(nn::load_checkpoint(wrong.params(), path), std::exception);
    fs::remove(path);
}

TEST_CASE("lr used at epoch 35 matches the closed form") {
    CHECK(nn::lr_schedule(35) == doctest::Approx(0.001).epsilon(1e-15));
}
