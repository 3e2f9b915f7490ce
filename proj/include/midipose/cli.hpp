#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "midipose/model.hpp"
#include "midipose/synth.hpp"

namespace midipose::cli {

/// Configuration error (bad key, bad value); maps to exit code 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Full run configuration. Defaults follow the reference training recipe
/// (batch 64, 100 epochs, lr 0.008, momentum 0.9, x0.5 every 10 epochs,
/// PCK thresholds 5/10/20/30).
struct RunConfig {
    struct Scene {
        std::vector<MotionKind> motions = {MotionKind::marktime, MotionKind::lunge,
                                           MotionKind::risehand, MotionKind::walk,
                                           MotionKind::squat};
        double duration_s = 16.0;
        std::uint64_t seed = 1;
        synth::SceneLayout layout;
    } scene;

    struct Features {
        std::size_t window = 25;
    } features;

    struct Train {
        TrainConfig train;           // batch/epochs/lr/momentum/schedule/seed
        ModelKind model = ModelKind::midipose;
        FusionMode fusion = FusionMode::attention;
        bool temporal_split = false;
    } train;

    struct Eval {
        std::vector<double> thresholds = {5.0, 10.0, 20.0, 30.0};
    } eval;

    struct Paths {
        std::filesystem::path dataset = "dataset.mdp1";
        std::filesystem::path checkpoint = "model.mdpw";
        std::filesystem::path loss_log = "loss_log.txt";
        std::filesystem::path report_dir = ".";
    } paths;
};

/// Loads and strictly validates a JSON config; unknown keys are errors that
/// name the offending key. Missing file is an error; `path` empty keeps the
/// defaults. MIDIPOSE_SEED (when set) overrides the scene and train seeds.
RunConfig load_config(const std::filesystem::path& path);

/// Entry point behind the midipose binary. Exit codes: 0 success,
/// 1 usage/config error, 2 runtime failure, 3 gradient-check failure.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace midipose::cli
