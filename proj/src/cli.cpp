#include "midipose/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "midipose/dataset.hpp"
#include "midipose/eval.hpp"
#include "midipose/features.hpp"

namespace midipose::cli {
namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// config

void require_keys(const json& obj, const std::string& section,
                  std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed) {
            if (key == a) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            throw ConfigError("unknown config key: " + (section.empty() ? key : section + "." + key));
        }
    }
}

template <typename T>
void read_into(const json& obj, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("bad value for config key: ") + key);
    }
}

RunConfig parse_config(const json& root) {
    RunConfig cfg;
    require_keys(root, "", {"scene", "features", "train", "eval", "paths"});

    if (root.contains("scene")) {
        const json& s = root.at("scene");
        require_keys(s, "scene",
                     {"motions", "duration_s", "seed", "snr_db", "direct_gain", "area_x", "area_y",
                      "device_height", "carrier_hz", "subcarrier_spacing_hz", "csi_rate_hz",
                      "label_rate_hz"});
        if (s.contains("motions")) {
            cfg.scene.motions.clear();
            for (const auto& m : s.at("motions")) {
                cfg.scene.motions.push_back(motion_from_string(m.get<std::string>()));
            }
        }
        read_into(s, "duration_s", cfg.scene.duration_s);
        read_into(s, "seed", cfg.scene.seed);
        if (s.contains("snr_db")) {
            if (s.at("snr_db").is_string() && s.at("snr_db").get<std::string>() == "inf") {
                cfg.scene.layout.snr_db = INFINITY;
            } else {
                read_into(s, "snr_db", cfg.scene.layout.snr_db);
            }
        }
        read_into(s, "direct_gain", cfg.scene.layout.direct_gain);
        read_into(s, "area_x", cfg.scene.layout.area_x);
        read_into(s, "area_y", cfg.scene.layout.area_y);
        read_into(s, "device_height", cfg.scene.layout.device_height);
        read_into(s, "carrier_hz", cfg.scene.layout.carrier_hz);
        read_into(s, "subcarrier_spacing_hz", cfg.scene.layout.subcarrier_spacing_hz);
        read_into(s, "csi_rate_hz", cfg.scene.layout.csi_rate_hz);
        read_into(s, "label_rate_hz", cfg.scene.layout.label_rate_hz);
    }
    if (root.contains("features")) {
        const json& f = root.at("features");
        require_keys(f, "features", {"window"});
        read_into(f, "window", cfg.features.window);
        if (cfg.features.window < 2) throw ConfigError("features.window must be >= 2");
    }
    if (root.contains("train")) {
        const json& t = root.at("train");
        require_keys(t, "train",
                     {"batch", "epochs", "lr", "momentum", "lr_factor", "lr_period", "seed",
                      "model", "split", "fusion"});
        read_into(t, "batch", cfg.train.train.batch);
        read_into(t, "epochs", cfg.train.train.epochs);
        read_into(t, "lr", cfg.train.train.base_lr);
        read_into(t, "momentum", cfg.train.train.momentum);
        read_into(t, "lr_factor", cfg.train.train.lr_factor);
        read_into(t, "lr_period", cfg.train.train.lr_period);
        read_into(t, "seed", cfg.train.train.seed);
        if (t.contains("model")) cfg.train.model = model_kind_from_string(t.at("model").get<std::string>());
        if (t.contains("split")) {
            const std::string split = t.at("split").get<std::string>();
            if (split != "random" && split != "temporal") {
                throw ConfigError("train.split must be random or temporal");
            }
            cfg.train.temporal_split = split == "temporal";
        }
        if (t.contains("fusion")) {
            const std::string fusion = t.at("fusion").get<std::string>();
            if (fusion == "attention") {
                cfg.train.fusion = FusionMode::attention;
            } else if (fusion == "concat") {
                cfg.train.fusion = FusionMode::concat;
            } else {
                throw ConfigError("train.fusion must be attention or concat");
            }
        }
    }
    if (root.contains("eval")) {
        const json& e = root.at("eval");
        require_keys(e, "eval", {"thresholds"});
        if (e.contains("thresholds")) {
            cfg.eval.thresholds = e.at("thresholds").get<std::vector<double>>();
            if (cfg.eval.thresholds.empty()) throw ConfigError("eval.thresholds must be non-empty");
        }
    }
    if (root.contains("paths")) {
        const json& p = root.at("paths");
        require_keys(p, "paths", {"dataset", "checkpoint", "loss_log", "report_dir"});
        std::string tmp;
        if (p.contains("dataset")) cfg.paths.dataset = p.at("dataset").get<std::string>();
        if (p.contains("checkpoint")) cfg.paths.checkpoint = p.at("checkpoint").get<std::string>();
        if (p.contains("loss_log")) cfg.paths.loss_log = p.at("loss_log").get<std::string>();
        if (p.contains("report_dir")) cfg.paths.report_dir = p.at("report_dir").get<std::string>();
    }
    return cfg;
}

}  // namespace

RunConfig load_config(const std::filesystem::path& path) {
    RunConfig cfg;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file " + path.string());
        json root;
        try {
            in >> root;
        } catch (const json::exception& e) {
            throw ConfigError("config parse error in " + path.string() + ": " + e.what());
        }
        cfg = parse_config(root);
    }
    if (const char* env = std::getenv("MIDIPOSE_SEED")) {
        char* end = nullptr;
        const std::uint64_t seed = std::strtoull(env, &end, 10);
        if (end == env || *end != '\0') throw ConfigError("MIDIPOSE_SEED is not an integer");
        cfg.scene.seed = seed;
        cfg.train.train.seed = seed;
    }
    return cfg;
}

namespace {

// ---------------------------------------------------------------------------
// shared pipeline

struct Pipeline {
    AlignedDataset aligned;
    SplitIndices split;
};

Pipeline load_pipeline(const RunConfig& cfg) {
    if (!std::filesystem::exists(cfg.paths.dataset)) {
        throw std::runtime_error("dataset not found: " + cfg.paths.dataset.string());
    }
    Dataset ds = read_dataset(cfg.paths.dataset);
    WindowConfig wcfg;
    wcfg.window = cfg.features.window;
    FeatureTensor features = extract_features(ds.frames, wcfg);
    Pipeline p;
    p.aligned = build_aligned_dataset(ds.frames, ds.labels, std::move(features));
    SplitSpec spec;
    spec.seed = cfg.train.train.seed;
    p.split = cfg.train.temporal_split ? split_dataset_temporal(p.aligned.sample_count(), spec)
                                       : split_dataset(p.aligned.sample_count(), spec);
    return p;
}

ModelConfig model_config(const RunConfig& cfg) {
    ModelConfig mc;
    mc.fusion = cfg.train.fusion;
    return mc;
}

void write_loss_log(const std::filesystem::path& path, const TrainResult& result) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open loss log " + path.string());
    char buf[96];
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
        std::snprintf(buf, sizeof buf, "%zu %.10g %.17g\n", e, result.epoch_lr[e],
                      result.epoch_loss[e]);
        out << buf;
    }
    if (!out) throw std::runtime_error("loss log I/O failure");
}

// ---------------------------------------------------------------------------
// subcommands

int cmd_synth(const RunConfig& cfg) {
    const auto summary = synth::make_dataset(cfg.scene.motions, cfg.scene.duration_s,
                                             cfg.scene.layout, cfg.scene.seed, cfg.paths.dataset);
    std::filesystem::path manifest = cfg.paths.dataset;
    manifest += ".manifest.txt";
    std::ofstream out(manifest);
    if (!out) throw std::runtime_error("cannot open manifest " + manifest.string());
    out << "dataset " << cfg.paths.dataset.string() << "\n";
    out << "seed " << cfg.scene.seed << "\n";
    out << "csi_frames " << summary.csi_frames << "\n";
    out << "label_frames " << summary.label_frames << "\n";
    for (const auto& [kind, count] : summary.labels_per_motion) {
        out << "motion " << to_string(kind) << " " << count << "\n";
    }
    std::cout << "wrote " << cfg.paths.dataset.string() << " (" << summary.csi_frames
              << " CSI frames, " << summary.label_frames << " labels)\n";
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    Pipeline p = load_pipeline(cfg);
    auto model = make_model(cfg.train.model, model_config(cfg), cfg.train.train.seed);
    std::vector<std::size_t> train_frames;
    train_frames.reserve(p.split.train.size());
    for (std::size_t s : p.split.train) train_frames.push_back(p.aligned.csi_of_sample[s]);
    model->fit_normalization(p.aligned.features, train_frames);

    const TrainResult result = train_model(*model, p.aligned, p.split.train, cfg.train.train);
    nn::save_checkpoint(model->params(), cfg.paths.checkpoint);
    write_loss_log(cfg.paths.loss_log, result);
    std::cout << "model " << to_string(cfg.train.model) << ": trained "
              << result.epoch_loss.size() << " epochs, final loss "
              << result.epoch_loss.back() << "\n";
    std::cout << "checkpoint " << cfg.paths.checkpoint.string() << "\n";
    std::cout << "loss log " << cfg.paths.loss_log.string() << "\n";
    return 0;
}

eval::EvalInputs gather_eval_inputs(const PoseModel& model, const AlignedDataset& aligned,
                                    std::span<const std::size_t> idx) {
    eval::EvalInputs inputs;
    inputs.preds = model.predict(aligned, idx);
    inputs.gts.reserve(idx.size());
    for (std::size_t s : idx) {
        inputs.gts.push_back(aligned.poses[s]);
        inputs.motions.push_back(aligned.motions[s]);
        inputs.tags.push_back(aligned.tags[s]);
    }
    return inputs;
}

int cmd_eval(const RunConfig& cfg) {
    Pipeline p = load_pipeline(cfg);
    auto model = make_model(cfg.train.model, model_config(cfg), cfg.train.train.seed);
    nn::load_checkpoint(model->params(), cfg.paths.checkpoint);

    const eval::EvalInputs inputs = gather_eval_inputs(*model, p.aligned, p.split.test);
    const eval::PckTable table =
        eval::evaluate(inputs, to_string(cfg.train.model), cfg.eval.thresholds);

    std::filesystem::create_directories(cfg.paths.report_dir);
    const auto text_path = cfg.paths.report_dir / "pck_report.txt";
    const auto csv_path = cfg.paths.report_dir / "pck_report.csv";
    eval::write_report(table, text_path, csv_path);
    std::cout << eval::format_table(table, eval::SliceKind::state) << "\n"
              << eval::format_table(table, eval::SliceKind::process);
    std::cout << "report " << text_path.string() << ", " << csv_path.string() << "\n";
    return 0;
}

int cmd_infer(const RunConfig& cfg, std::size_t frame_index, bool frame_given) {
    if (!frame_given) throw ConfigError("infer: --frame is required");
    Pipeline p = load_pipeline(cfg);
    if (frame_index >= p.aligned.sample_count()) {
        throw ConfigError("infer: frame index " + std::to_string(frame_index) +
                          " out of range (valid: 0.." +
                          std::to_string(p.aligned.sample_count() - 1) + ")");
    }
    auto model = make_model(cfg.train.model, model_config(cfg), cfg.train.train.seed);
    nn::load_checkpoint(model->params(), cfg.paths.checkpoint);
    const std::size_t idx[] = {frame_index};
    const std::vector<Pose2D> pred = model->predict(p.aligned, idx);
    char buf[96];
    for (std::size_t k = 0; k < kKeypoints; ++k) {
        std::snprintf(buf, sizeof buf, "%-14s %.6f %.6f\n", std::string(kKeypointNames[k]).c_str(),
                      pred[0].x(k), pred[0].y(k));
        std::cout << buf;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// gradcheck

ModelConfig tiny_midipose_config() {
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
    mc.subcarriers = 40;  // 40 -> 18 -> 7 -> 2 through the strided trunk
    mc.conv_channels = {4, 5, 6};
    return mc;
}

ad::Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0,
                         double hi = 1.0) {
    ad::Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

struct GradCheckReport {
    std::string name;
    double max_err = 0.0;
};

int cmd_gradcheck(std::size_t seeds, bool inject_fault) {
    std::vector<GradCheckReport> reports;
    const auto run = [&](const char* name, auto&& fn) {
        double worst = 0.0;
        for (std::size_t s = 0; s < seeds; ++s) worst = std::max(worst, fn(s));
        reports.push_back({name, worst});
    };

    run("linear", [&](std::size_t s) {
        Rng rng(100 + s);
        std::vector<ad::Tensor> params = {random_tensor({4, 3}, rng), random_tensor({3, 5}, rng),
                                          random_tensor({5}, rng)};
        ad::Tensor target = random_tensor({4, 5}, rng);
        bool first = true;
        return ad::grad_check(
            [&](ad::Tape& t, std::span<const ad::Var> p) {
                ad::Var y = t.linear(p[0], p[1], p[2]);
                if (inject_fault && first) {
                    first = false;
                    y = t.scale(y, 1.01);
                }
                return t.mse(y, t.constant(target));
            },
            params);
    });
    run("relu", [&](std::size_t s) {
        Rng rng(200 + s);
        std::vector<ad::Tensor> params = {random_tensor({4, 6}, rng)};
        for (std::size_t i = 0; i < params[0].size(); ++i) {
            if (std::abs(params[0][i]) < 0.05) params[0][i] = 0.1;  // stay off the kink
        }
        ad::Tensor target = random_tensor({4, 6}, rng);
        return ad::grad_check(
            [&](ad::Tape& t, std::span<const ad::Var> p) {
                return t.mse(t.relu(p[0]), t.constant(target));
            },
            params);
    });
    run("softmax", [&](std::size_t s) {
        Rng rng(300 + s);
        std::vector<ad::Tensor> params = {random_tensor({4, 5}, rng, -2.0, 2.0)};
        ad::Tensor target = random_tensor({4, 5}, rng, 0.0, 1.0);
        return ad::grad_check(
            [&](ad::Tape& t, std::span<const ad::Var> p) {
                return t.mse(t.softmax_rows(p[0]), t.constant(target));
            },
            params);
    });
    run("attention", [&](std::size_t s) {
        Rng rng(400 + s);
        const std::size_t d = 8;
        std::vector<ad::Tensor> params;
        params.push_back(random_tensor({3, d}, rng));
        params.push_back(random_tensor({d, d}, rng, -0.5, 0.5));  // wq
        params.push_back(random_tensor({d}, rng, -0.2, 0.2));     // bq
        params.push_back(random_tensor({d, d}, rng, -0.5, 0.5));  // wk
        params.push_back(random_tensor({d, d}, rng, -0.5, 0.5));  // wv
        params.push_back(random_tensor({d}, rng, -0.2, 0.2));     // bv
        params.push_back(random_tensor({d, d}, rng, -0.5, 0.5));  // wo
        params.push_back(random_tensor({d}, rng, -0.2, 0.2));     // bo
        ad::Tensor target = random_tensor({3, d}, rng);
        return ad::grad_check(
            [&](ad::Tape& t, std::span<const ad::Var> p) {
                ad::AttentionWeights w{p[1], p[2], p[3], p[4], p[5], p[6], p[7]};
                return t.mse(ad::multi_head_attention(t, p[0], w, 3, 2), t.constant(target));
            },
            params);
    });
    run("residual", [&](std::size_t s) {
        Rng rng(500 + s);
        std::vector<ad::Tensor> params = {random_tensor({3, 5}, rng), random_tensor({5, 7}, rng),
                                          random_tensor({7}, rng), random_tensor({7, 5}, rng),
                                          random_tensor({5}, rng)};
        ad::Tensor target = random_tensor({3, 5}, rng);
        return ad::grad_check(
            [&](ad::Tape& t, std::span<const ad::Var> p) {
                ad::MlpWeights w{p[1], p[2], p[3], p[4]};
                return t.mse(ad::residual_block(t, p[0], w), t.constant(target));
            },
            params);
    });
    run("conv1d", [&](std::size_t s) {
        Rng rng(600 + s);
        ad::Conv1dSpec spec;
        spec.in_channels = 3;
        spec.out_channels = 4;
        spec.kernel = 5;
        spec.stride = 2;
        spec.in_length = 13;
        std::vector<ad::Tensor> params = {
            random_tensor({2, spec.in_channels * spec.in_length}, rng),
            random_tensor({spec.out_channels, spec.in_channels * spec.kernel}, rng),
            random_tensor({spec.out_channels}, rng)};
        ad::Tensor target = random_tensor({2, spec.out_channels * spec.out_length()}, rng);
        return ad::grad_check(
            [&](ad::Tape& t, std::span<const ad::Var> p) {
                return t.mse(t.conv1d(p[0], p[1], p[2], spec), t.constant(target));
            },
            params);
    });
    run("midipose", [&](std::size_t s) {
        MidiPoseModel model(tiny_midipose_config(), 700 + s);
        return model_gradient_check(model, 710 + s, inject_fault);
    });
    run("baseline", [&](std::size_t s) {
        BaselineModel model(tiny_baseline_config(), 800 + s);
        return model_gradient_check(model, 810 + s, inject_fault);
    });

    bool failed = false;
    for (const auto& r : reports) {
        const bool pass = r.max_err < 1e-4;
        failed = failed || !pass;
        std::printf("%-10s max relative error %.3e  %s\n", r.name.c_str(), r.max_err,
                    pass ? "PASS" : "FAIL");
    }
    return failed ? 3 : 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"5G-CSI multi-feature-domain 2D pose recognition pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string dataset, checkpoint, loss_log, report_dir, model_name, split_mode, fusion_mode;
    std::string motions_csv, out_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
    double snr_db = 0.0;
    double duration = 0.0;
    std::size_t epochs = 0, batch = 0, window = 0, frame_index = 0, gc_seeds = 10;
    bool inject_fault = false;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--dataset", dataset, "dataset file (MDP1)");
        sub->add_option("--seed", seed, "seed override")->each([&](const std::string&) {
            seed_given = true;
        });
    };

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    add_common(synth);
    synth->add_option("--out", out_path, "output dataset path");
    synth->add_option("--motions", motions_csv, "comma-separated motion kinds");
    synth->add_option("--duration", duration, "seconds per motion kind");
    synth->add_option("--snr", snr_db, "noise SNR in dB (inf for none)");

    CLI::App* train = app.add_subcommand("train", "train a model");
    add_common(train);
    train->add_option("--checkpoint", checkpoint, "checkpoint output path");
    train->add_option("--loss-log", loss_log, "loss log output path");
    train->add_option("--model", model_name, "midipose|baseline");
    train->add_option("--epochs", epochs, "epoch count");
    train->add_option("--batch", batch, "batch size");
    train->add_option("--split", split_mode, "random|temporal");
    train->add_option("--window", window, "amplitude statistics window");
    train->add_option("--fusion", fusion_mode, "attention|concat");

    CLI::App* evalc = app.add_subcommand("eval", "evaluate a checkpoint (PCK tables)");
    add_common(evalc);
    evalc->add_option("--checkpoint", checkpoint, "checkpoint path");
    evalc->add_option("--model", model_name, "midipose|baseline");
    evalc->add_option("--report-dir", report_dir, "report output directory");
    evalc->add_option("--split", split_mode, "random|temporal");
    evalc->add_option("--window", window, "amplitude statistics window");

    CLI::App* infer = app.add_subcommand("infer", "print keypoints for one aligned frame");
    add_common(infer);
    infer->add_option("--checkpoint", checkpoint, "checkpoint path");
    infer->add_option("--model", model_name, "midipose|baseline");
    CLI::Option* frame_opt = infer->add_option("--frame", frame_index, "aligned sample index");
    infer->add_option("--window", window, "amplitude statistics window");

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    gradcheck->add_option("--seeds", gc_seeds, "seeds per component");
    gradcheck->add_flag("--inject-fault", inject_fault,
                        "corrupt one gradient path to exercise the detector");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gradcheck->parsed()) return cmd_gradcheck(gc_seeds, inject_fault);

        RunConfig cfg = load_config(config_path);
        if (seed_given) {
            cfg.scene.seed = seed;
            cfg.train.train.seed = seed;
        }
        if (!dataset.empty()) cfg.paths.dataset = dataset;
        if (!checkpoint.empty()) cfg.paths.checkpoint = checkpoint;
        if (!loss_log.empty()) cfg.paths.loss_log = loss_log;
        if (!report_dir.empty()) cfg.paths.report_dir = report_dir;
        if (!model_name.empty()) cfg.train.model = model_kind_from_string(model_name);
        if (epochs > 0) cfg.train.train.epochs = epochs;
        if (batch > 0) cfg.train.train.batch = batch;
        if (window > 0) {
            if (window < 2) throw ConfigError("--window must be >= 2");
            cfg.features.window = window;
        }
        if (!split_mode.empty()) {
            if (split_mode != "random" && split_mode != "temporal") {
                throw ConfigError("--split must be random or temporal");
            }
            cfg.train.temporal_split = split_mode == "temporal";
        }
        if (!fusion_mode.empty()) {
            if (fusion_mode == "attention") {
                cfg.train.fusion = FusionMode::attention;
            } else if (fusion_mode == "concat") {
                cfg.train.fusion = FusionMode::concat;
            } else {
                throw ConfigError("--fusion must be attention or concat");
            }
        }
        if (!out_path.empty()) cfg.paths.dataset = out_path;
        if (!motions_csv.empty()) {
            cfg.scene.motions.clear();
            std::size_t start = 0;
            while (start <= motions_csv.size()) {
                const std::size_t comma = motions_csv.find(',', start);
                const std::string name = motions_csv.substr(
                    start, comma == std::string::npos ? std::string::npos : comma - start);
                if (!name.empty()) cfg.scene.motions.push_back(motion_from_string(name));
                if (comma == std::string::npos) break;
                start = comma + 1;
            }
            if (cfg.scene.motions.empty()) throw ConfigError("--motions is empty");
        }
        if (synth->parsed() && synth->count("--snr") > 0) cfg.scene.layout.snr_db = snr_db;
        if (synth->parsed() && duration > 0.0) cfg.scene.duration_s = duration;

        if (synth->parsed()) return cmd_synth(cfg);
        if (train->parsed()) return cmd_train(cfg);
        if (evalc->parsed()) return cmd_eval(cfg);
        if (infer->parsed()) return cmd_infer(cfg, frame_index, frame_opt->count() > 0);
        throw std::runtime_error("no subcommand");
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("midipose");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace midipose::cli
