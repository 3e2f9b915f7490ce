#include "midipose/model.hpp"

#include <algorithm>
#include <cmath>

#include "midipose/features.hpp"

namespace midipose {

ModelKind model_kind_from_string(std::string_view s) {
    if (s == "midipose") return ModelKind::midipose;
    if (s == "baseline") return ModelKind::baseline;
    throw std::invalid_argument("unknown model kind: " + std::string(s) +
                                " (expected midipose|baseline)");
}

std::string_view to_string(ModelKind k) {
    return k == ModelKind::midipose ? "midipose" : "baseline";
}

void ModelConfig::validate() const {
    if (latent_dim == 0 || heads == 0 || latent_dim % heads != 0) {
        throw std::invalid_argument("ModelConfig: latent_dim must be a positive multiple of heads");
    }
    if (subcarriers == 0 || rrus == 0 || channels != kFeatureChannels) {
        throw std::invalid_argument("ModelConfig: bad feature grid");
    }
    if (keypoints == 0 || encoder_hidden == 0 || backbone_hidden == 0 || head_hidden == 0) {
        throw std::invalid_argument("ModelConfig: zero layer width");
    }
}

double pose_mse(const Pose2D& pred, const Pose2D& gt) {
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.xy.size(); ++i) {
        if (!std::isfinite(pred.xy[i]) || !std::isfinite(gt.xy[i])) {
            throw std::invalid_argument("pose_mse: non-finite coordinate");
        }
        const double d = pred.xy[i] - gt.xy[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.xy.size());
}

void PoseModel::fit_normalization(const FeatureTensor& features,
                                  std::span<const std::size_t> frame_idx) {
    if (frame_idx.empty()) throw std::invalid_argument("fit_normalization: empty frame set");
    ad::Tensor& mean = params_.tensor("norm.mean");
    ad::Tensor& stdev = params_.tensor("norm.std");
    const std::size_t cells = kSubcarriers * kRrus;
    const double n = static_cast<double>(frame_idx.size() * cells);
    for (std::size_t c = 0; c < kFeatureChannels; ++c) {
        double sum = 0.0;
        for (std::size_t i : frame_idx) {
            const float* row = features.data.data() + i * FeatureTensor::frame_stride();
            for (std::size_t cell = 0; cell < cells; ++cell) {
                sum += row[cell * kFeatureChannels + c];
            }
        }
        const double mu = sum / n;
        double var = 0.0;
        for (std::size_t i : frame_idx) {
            const float* row = features.data.data() + i * FeatureTensor::frame_stride();
            for (std::size_t cell = 0; cell < cells; ++cell) {
                const double d = row[cell * kFeatureChannels + c] - mu;
                var += d * d;
            }
        }
        mean[c] = mu;
        stdev[c] = std::max(std::sqrt(var / n), 1e-8);
    }
}

double PoseModel::znorm(float v, std::size_t channel) const {
    const ad::Tensor& mean = params_.tensor("norm.mean");
    const ad::Tensor& stdev = params_.tensor("norm.std");
    return (static_cast<double>(v) - mean[channel]) / stdev[channel];
}

std::vector<Pose2D> PoseModel::predict(const AlignedDataset& data,
                                       std::span<const std::size_t> sample_idx) const {
    std::vector<Pose2D> out;
    out.reserve(sample_idx.size());
    const std::size_t chunk = 256;
    for (std::size_t start = 0; start < sample_idx.size(); start += chunk) {
        const std::size_t count = std::min(chunk, sample_idx.size() - start);
        const Batch batch = make_batch(data, sample_idx.subspan(start, count));
        ad::Tape tape;
        std::vector<ad::Var> pvars;
        pvars.reserve(params_.count());
        for (std::size_t i = 0; i < params_.count(); ++i) {
            pvars.push_back(tape.constant(params_.item(i).tensor, params_.item(i).name));
        }
        std::vector<ad::Var> ivars;
        ivars.reserve(batch.inputs.size());
        for (const auto& in : batch.inputs) ivars.push_back(tape.constant(in));
        const ad::Var pred = forward(tape, pvars, ivars);
        const ad::Tensor& val = tape.value(pred);
        for (std::size_t b = 0; b < count; ++b) {
            Pose2D pose;
            for (std::size_t j = 0; j < pose.xy.size(); ++j) {
                pose.xy[j] = val[b * pose.xy.size() + j];
            }
            out.push_back(pose);
        }
    }
    return out;
}

namespace {

// Shared parameter-variable lookup: forward() receives leaves in store
// order, so names resolve through the store.
ad::Var pv(const nn::ParamStore& store, std::span<const ad::Var> vars, std::string_view name) {
    return vars[store.index_of(name)];
}

void add_linear(nn::ParamStore& store, Rng& rng, const std::string& prefix, std::size_t in,
                std::size_t out) {
    ad::Tensor w({in, out});
    nn::init_uniform_fanin(w, in, rng);
    store.add(prefix + ".w", std::move(w));
    store.add(prefix + ".b", ad::Tensor({out}));
}

void add_conv(nn::ParamStore& store, Rng& rng, const std::string& prefix, std::size_t in_ch,
              std::size_t out_ch, std::size_t kernel) {
    ad::Tensor w({out_ch, in_ch * kernel});
    nn::init_uniform_fanin(w, in_ch * kernel, rng);
    store.add(prefix + ".w", std::move(w));
    store.add(prefix + ".b", ad::Tensor({out_ch}));
}

ad::Var mlp2(ad::Tape& tape, const nn::ParamStore& store, std::span<const ad::Var> vars,
             const std::string& prefix, ad::Var x) {
    const ad::Var h = tape.relu(tape.linear(x, pv(store, vars, prefix + ".l1.w"),
                                            pv(store, vars, prefix + ".l1.b")));
    return tape.linear(h, pv(store, vars, prefix + ".l2.w"), pv(store, vars, prefix + ".l2.b"));
}

void require_full_grid(const ModelConfig& cfg, const char* what) {
    if (cfg.subcarriers != kSubcarriers || cfg.rrus != kRrus || cfg.channels != kFeatureChannels) {
        throw std::logic_error(std::string(what) +
                               ": model config does not match the feature grid");
    }
}

}  // namespace

MidiPoseModel::MidiPoseModel(ModelConfig cfg, std::uint64_t seed) : PoseModel(std::move(cfg)) {
    cfg_.validate();
    Rng rng(seed);
    const std::size_t d = cfg_.latent_dim;
    for (const char* domain : {"amp", "phase", "dop"}) {
        const std::size_t in = std::string_view(domain) == "amp"     ? cfg_.amp_dim()
                               : std::string_view(domain) == "phase" ? cfg_.phase_dim()
                                                                     : cfg_.dop_dim();
        const std::string prefix = std::string("enc_") + domain;
        add_linear(params_, rng, prefix + ".l1", in, cfg_.encoder_hidden);
        add_linear(params_, rng, prefix + ".l2", cfg_.encoder_hidden, d);
    }
    for (const char* proj : {"wq", "wk", "wv", "wo"}) {
        ad::Tensor w({d, d});
        nn::init_uniform_fanin(w, d, rng);
        params_.add(std::string("fuse.") + proj, std::move(w));
    }
    params_.add("fuse.bq", ad::Tensor({d}));
    params_.add("fuse.bv", ad::Tensor({d}));
    params_.add("fuse.bo", ad::Tensor({d}));
    add_linear(params_, rng, "fuse.mlp.l1", d, 2 * d);
    add_linear(params_, rng, "fuse.mlp.l2", 2 * d, d);
    for (std::size_t b = 0; b < cfg_.backbone_blocks; ++b) {
        const std::string prefix = "backbone.block" + std::to_string(b);
        add_linear(params_, rng, prefix + ".l1", 3 * d, cfg_.backbone_hidden);
        add_linear(params_, rng, prefix + ".l2", cfg_.backbone_hidden, 3 * d);
    }
    add_linear(params_, rng, "head.l1", 3 * d, cfg_.head_hidden);
    add_linear(params_, rng, "head.l2", cfg_.head_hidden, cfg_.output_dim());
    {
        // start predictions at the scene center instead of the origin
        ad::Tensor& head_bias = params_.tensor("head.l2.b");
        for (std::size_t i = 0; i < head_bias.size(); ++i) head_bias[i] = 0.5;
    }
    params_.add("norm.mean", ad::Tensor({cfg_.channels}), /*trainable=*/false);
    ad::Tensor ones({cfg_.channels});
    for (std::size_t i = 0; i < ones.size(); ++i) ones[i] = 1.0;
    params_.add("norm.std", std::move(ones), /*trainable=*/false);
}

Batch MidiPoseModel::make_batch(const AlignedDataset& data,
                                std::span<const std::size_t> sample_idx) const {
    require_full_grid(cfg_, "MidiPoseModel::make_batch");
    const std::size_t n = sample_idx.size();
    Batch batch;
    batch.inputs = {ad::Tensor({n, cfg_.amp_dim()}), ad::Tensor({n, cfg_.phase_dim()}),
                    ad::Tensor({n, cfg_.dop_dim()})};
    batch.targets = ad::Tensor({n, cfg_.output_dim()});
    for (std::size_t row = 0; row < n; ++row) {
        const std::size_t frame = data.csi_of_sample.at(sample_idx[row]);
        double* amp = batch.inputs[0].data() + row * cfg_.amp_dim();
        double* phase = batch.inputs[1].data() + row * cfg_.phase_dim();
        double* dop = batch.inputs[2].data() + row * cfg_.dop_dim();
        std::size_t ai = 0, pi = 0, di = 0;
        for (std::size_t k = 0; k < kSubcarriers; ++k) {
            for (std::size_t r = 0; r < kRrus; ++r) {
                for (std::size_t c = 0; c < 4; ++c) amp[ai++] = znorm(data.features.at(frame, k, r, c), c);
                phase[pi++] = znorm(data.features.at(frame, k, r, 4), 4);
                phase[pi++] = znorm(data.features.at(frame, k, r, 5), 5);
                dop[di++] = znorm(data.features.at(frame, k, r, 6), 6);
            }
        }
        const Pose2D& pose = data.poses.at(sample_idx[row]);
        for (std::size_t j = 0; j < pose.xy.size(); ++j) {
            batch.targets[row * cfg_.output_dim() + j] = pose.xy[j];
        }
    }
    return batch;
}

ad::Var MidiPoseModel::forward(ad::Tape& tape, std::span<const ad::Var> vars,
                               std::span<const ad::Var> inputs) const {
    if (inputs.size() != 3) throw std::invalid_argument("MidiPoseModel::forward: need 3 domain inputs");
    const ad::Var z_amp = mlp2(tape, params_, vars, "enc_amp", inputs[0]);
    const ad::Var z_phase = mlp2(tape, params_, vars, "enc_phase", inputs[1]);
    const ad::Var z_dop = mlp2(tape, params_, vars, "enc_dop", inputs[2]);

    const std::array<ad::Var, 3> latents = {z_amp, z_phase, z_dop};
    ad::Var tokens = tape.interleave_rows(latents);  // [B*3][D]

    ad::Var fused_tokens = tokens;
    if (cfg_.fusion == FusionMode::attention) {
        ad::AttentionWeights w;
        w.wq = pv(params_, vars, "fuse.wq");
        w.bq = pv(params_, vars, "fuse.bq");
        w.wk = pv(params_, vars, "fuse.wk");
        w.wv = pv(params_, vars, "fuse.wv");
        w.bv = pv(params_, vars, "fuse.bv");
        w.wo = pv(params_, vars, "fuse.wo");
        w.bo = pv(params_, vars, "fuse.bo");
        const ad::Var attended = ad::multi_head_attention(tape, tokens, w, 3, cfg_.heads);
        fused_tokens = mlp2(tape, params_, vars, "fuse.mlp", attended);
    }
    ad::Var fused = tape.group_rows(fused_tokens, 3);  // [B][3D]

    for (std::size_t b = 0; b < cfg_.backbone_blocks; ++b) {
        const std::string prefix = "backbone.block" + std::to_string(b);
        ad::MlpWeights w{pv(params_, vars, prefix + ".l1.w"), pv(params_, vars, prefix + ".l1.b"),
                         pv(params_, vars, prefix + ".l2.w"), pv(params_, vars, prefix + ".l2.b")};
        fused = ad::residual_block(tape, fused, w);
    }
    return mlp2(tape, params_, vars, "head", fused);
}

std::vector<double> MidiPoseModel::encode_domain(std::span<const double> domain_vec,
                                                 std::size_t which) const {
    if (which > 2) throw std::invalid_argument("encode_domain: domain index must be 0..2");
    const std::size_t expect = which == 0 ? cfg_.amp_dim() : which == 1 ? cfg_.phase_dim() : cfg_.dop_dim();
    if (domain_vec.size() != expect) {
        throw std::invalid_argument("encode_domain: expected length " + std::to_string(expect) +
                                    ", got " + std::to_string(domain_vec.size()));
    }
    for (double v : domain_vec) {
        if (!std::isfinite(v)) throw std::invalid_argument("encode_domain: non-finite input");
    }
    ad::Tape tape;
    std::vector<ad::Var> vars;
    vars.reserve(params_.count());
    for (std::size_t i = 0; i < params_.count(); ++i) {
        vars.push_back(tape.constant(params_.item(i).tensor));
    }
    const ad::Var x = tape.constant(
        ad::Tensor({1, expect}, std::vector<double>(domain_vec.begin(), domain_vec.end())));
    const char* prefix = which == 0 ? "enc_amp" : which == 1 ? "enc_phase" : "enc_dop";
    const ad::Var z = mlp2(tape, params_, vars, prefix, x);
    const ad::Tensor& val = tape.value(z);
    return std::vector<double>(val.data(), val.data() + val.size());
}

BaselineModel::BaselineModel(ModelConfig cfg, std::uint64_t seed) : PoseModel(std::move(cfg)) {
    cfg_.validate();
    Rng rng(seed);
    std::size_t ch = cfg_.baseline_in_channels();
    for (std::size_t layer = 0; layer < 3; ++layer) {
        add_conv(params_, rng, "conv" + std::to_string(layer), ch, cfg_.conv_channels[layer],
                 cfg_.conv_kernel);
        ch = cfg_.conv_channels[layer];
    }
    for (std::size_t b = 0; b < cfg_.res_blocks; ++b) {
        const std::string prefix = "res" + std::to_string(b);
        add_conv(params_, rng, prefix + ".conv0", ch, ch, cfg_.res_kernel);
        add_conv(params_, rng, prefix + ".conv1", ch, ch, cfg_.res_kernel);
    }
    add_linear(params_, rng, "head", ch, cfg_.output_dim());
    {
        ad::Tensor& head_bias = params_.tensor("head.b");
        for (std::size_t i = 0; i < head_bias.size(); ++i) head_bias[i] = 0.5;
    }
    params_.add("norm.mean", ad::Tensor({cfg_.channels}), /*trainable=*/false);
    ad::Tensor ones({cfg_.channels});
    for (std::size_t i = 0; i < ones.size(); ++i) ones[i] = 1.0;
    params_.add("norm.std", std::move(ones), /*trainable=*/false);

    conv_spec(3);  // validates that the trunk leaves a usable length
}

ad::Conv1dSpec BaselineModel::conv_spec(std::size_t layer) const {
    ad::Conv1dSpec spec;
    std::size_t length = cfg_.subcarriers;
    std::size_t ch = cfg_.baseline_in_channels();
    for (std::size_t l = 0; l < 3; ++l) {
        spec.in_channels = ch;
        spec.out_channels = cfg_.conv_channels[l];
        spec.kernel = cfg_.conv_kernel;
        spec.stride = cfg_.conv_stride;
        spec.pad = 0;
        spec.in_length = length;
        if (layer == l) return spec;
        length = spec.out_length();
        ch = cfg_.conv_channels[l];
    }
    spec.in_channels = ch;
    spec.out_channels = ch;
    spec.kernel = cfg_.res_kernel;
    spec.stride = 1;
    spec.pad = (cfg_.res_kernel - 1) / 2;
    spec.in_length = length;
    if (spec.out_length() != length) {
        throw std::invalid_argument("BaselineModel: residual kernel must preserve length");
    }
    return spec;
}

Batch BaselineModel::make_batch(const AlignedDataset& data,
                                std::span<const std::size_t> sample_idx) const {
    require_full_grid(cfg_, "BaselineModel::make_batch");
    const std::size_t n = sample_idx.size();
    const std::size_t cin = cfg_.baseline_in_channels();
    Batch batch;
    batch.inputs = {ad::Tensor({n, cin * kSubcarriers})};
    batch.targets = ad::Tensor({n, cfg_.output_dim()});
    for (std::size_t row = 0; row < n; ++row) {
        const std::size_t frame = data.csi_of_sample.at(sample_idx[row]);
        double* x = batch.inputs[0].data() + row * cin * kSubcarriers;
        for (std::size_t r = 0; r < kRrus; ++r) {
            for (std::size_t c = 0; c < kFeatureChannels; ++c) {
                double* lane = x + (r * kFeatureChannels + c) * kSubcarriers;
                for (std::size_t k = 0; k < kSubcarriers; ++k) {
                    lane[k] = znorm(data.features.at(frame, k, r, c), c);
                }
            }
        }
        const Pose2D& pose = data.poses.at(sample_idx[row]);
        for (std::size_t j = 0; j < pose.xy.size(); ++j) {
            batch.targets[row * cfg_.output_dim() + j] = pose.xy[j];
        }
    }
    return batch;
}

ad::Var BaselineModel::forward(ad::Tape& tape, std::span<const ad::Var> vars,
                               std::span<const ad::Var> inputs) const {
    if (inputs.size() != 1) throw std::invalid_argument("BaselineModel::forward: need 1 input");
    ad::Var h = inputs[0];
    for (std::size_t l = 0; l < 3; ++l) {
        const std::string prefix = "conv" + std::to_string(l);
        h = tape.relu(tape.conv1d(h, pv(params_, vars, prefix + ".w"),
                                  pv(params_, vars, prefix + ".b"), conv_spec(l)));
    }
    const ad::Conv1dSpec res = conv_spec(3);
    for (std::size_t b = 0; b < cfg_.res_blocks; ++b) {
        const std::string prefix = "res" + std::to_string(b);
        const ad::Var inner = tape.relu(tape.conv1d(h, pv(params_, vars, prefix + ".conv0.w"),
                                                    pv(params_, vars, prefix + ".conv0.b"), res));
        const ad::Var f = tape.conv1d(inner, pv(params_, vars, prefix + ".conv1.w"),
                                      pv(params_, vars, prefix + ".conv1.b"), res);
        h = tape.add(h, f);
    }
    const ad::Var pooled = tape.global_avg_pool(h, res.out_channels, res.in_length);
    return tape.linear(pooled, pv(params_, vars, "head.w"), pv(params_, vars, "head.b"));
}

std::unique_ptr<PoseModel> make_model(ModelKind kind, const ModelConfig& cfg, std::uint64_t seed) {
    if (kind == ModelKind::midipose) return std::make_unique<MidiPoseModel>(cfg, seed);
    return std::make_unique<BaselineModel>(cfg, seed);
}

TrainResult train_model(PoseModel& model, const AlignedDataset& data,
                        std::span<const std::size_t> train_idx, const TrainConfig& cfg) {
    if (train_idx.empty()) throw std::invalid_argument("train_model: empty training split");
    if (cfg.batch == 0 || cfg.batch > train_idx.size()) {
        throw std::invalid_argument("train_model: batch size exceeds the training split");
    }
    nn::ParamStore& params = model.params();
    nn::SgdOptimizer opt(cfg.momentum);
    Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);  // decouple shuffles from init draws
    std::vector<std::size_t> order(train_idx.begin(), train_idx.end());

    TrainResult result;
    result.epoch_loss.reserve(cfg.epochs);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = nn::lr_schedule(epoch, cfg.base_lr, cfg.lr_factor, cfg.lr_period);
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0, batch_no = 0; start < order.size();
             start += cfg.batch, ++batch_no) {
            const std::size_t count = std::min(cfg.batch, order.size() - start);
            try {
                const Batch batch =
                    model.make_batch(data, std::span<const std::size_t>(order).subspan(start, count));
                ad::Tape tape;
                std::vector<ad::Var> pvars;
                pvars.reserve(params.count());
                for (std::size_t i = 0; i < params.count(); ++i) {
                    pvars.push_back(tape.leaf(params.item(i).tensor, params.item(i).name));
                }
                std::vector<ad::Var> ivars;
                for (const auto& in : batch.inputs) ivars.push_back(tape.constant(in));
                const ad::Var pred = model.forward(tape, pvars, ivars);
                const ad::Var loss = tape.mse(pred, tape.constant(batch.targets));
                loss_sum += tape.value(loss)[0] * static_cast<double>(count);
                tape.backward(loss);
                std::vector<ad::Tensor> grads;
                grads.reserve(params.count());
                for (const ad::Var v : pvars) grads.push_back(tape.grad(v));
                opt.step(params, grads, lr);
            } catch (const std::exception& e) {
                throw std::runtime_error("train_model: aborted at epoch " + std::to_string(epoch) +
                                         ", batch " + std::to_string(batch_no) + ": " + e.what());
            }
        }
        result.epoch_loss.push_back(loss_sum / static_cast<double>(order.size()));
        result.epoch_lr.push_back(lr);
    }
    return result;
}

double model_gradient_check(PoseModel& model, std::uint64_t seed, bool inject_fault) {
    const std::size_t batch = 4;
    const ModelConfig& mc = model.config();
    nn::ParamStore& store = model.params();

    const auto draw = [](std::vector<std::size_t> shape, Rng& rng, double lo, double hi) {
        ad::Tensor t(std::move(shape));
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
        return t;
    };
    const auto draw_inputs = [&](Rng& rng) {
        std::vector<ad::Tensor> inputs;
        if (dynamic_cast<MidiPoseModel*>(&model) != nullptr) {
            inputs.push_back(draw({batch, mc.amp_dim()}, rng, -1.0, 1.0));
            inputs.push_back(draw({batch, mc.phase_dim()}, rng, -1.0, 1.0));
            inputs.push_back(draw({batch, mc.dop_dim()}, rng, -1.0, 1.0));
        } else {
            inputs.push_back(draw({batch, mc.baseline_in_channels() * mc.subcarriers}, rng, -1.0, 1.0));
        }
        return inputs;
    };

    // The audit needs a well-conditioned point: a finite-difference probe of
    // step h is meaningless where a relu input sits within reach of the kink,
    // and f64 roundoff on the loss swamps coordinates whose true gradient is
    // ~1e-8 (dead or nearly-dead paths). Positive biases keep every unit
    // active; the redraw loop then insists that every relu input clears the
    // kink and every parameter carries a resolvable gradient.
    std::vector<ad::Tensor> inputs;
    ad::Tensor target;
    std::vector<ad::Tensor> chosen_params;
    double best_score = -1.0;
    for (std::uint64_t attempt = 0; attempt < 128; ++attempt) {
        Rng rng(seed + 0x9e3779b9u * attempt);
        for (std::size_t i = 0; i < store.count(); ++i) {
            auto& item = store.item(i);
            if (!item.trainable) continue;
            if (item.tensor.rank() == 1) {
                for (std::size_t j = 0; j < item.tensor.size(); ++j) {
                    item.tensor[j] = rng.uniform(0.2, 0.6);
                }
            }
        }
        std::vector<ad::Tensor> candidate = draw_inputs(rng);
        ad::Tensor candidate_target = draw({batch, mc.output_dim()}, rng, 0.0, 1.0);

        ad::Tape probe;
        std::vector<ad::Var> pvars;
        for (std::size_t i = 0; i < store.count(); ++i) {
            pvars.push_back(probe.leaf(store.item(i).tensor));
        }
        std::vector<ad::Var> ivars;
        for (const auto& in : candidate) ivars.push_back(probe.constant(in));
        const ad::Var loss =
            probe.mse(model.forward(probe, pvars, ivars), probe.constant(candidate_target));
        probe.backward(loss);
        // Exact zeros are structurally dead paths: both sides of the probe
        // reproduce them bitwise. The resolvability concern is only for
        // small nonzero gradients.
        double grad_min = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < store.count(); ++i) {
            if (!store.item(i).trainable) continue;
            const ad::Tensor& g = probe.grad(pvars[i]);
            for (std::size_t j = 0; j < g.size(); ++j) {
                if (g[j] != 0.0) grad_min = std::min(grad_min, std::abs(g[j]));
            }
        }
        const double score = std::min(probe.min_abs_relu_input() / 1e-3, grad_min / 1e-6);
        if (score > best_score) {
            best_score = score;
            inputs = std::move(candidate);
            target = std::move(candidate_target);
            chosen_params.clear();
            for (std::size_t i = 0; i < store.count(); ++i) {
                chosen_params.push_back(store.item(i).tensor);
            }
        }
        if (best_score >= 1.0) break;
    }

    std::vector<ad::Tensor> params = std::move(chosen_params);

    bool first_eval = true;
    const auto build = [&](ad::Tape& tape, std::span<const ad::Var> pvars) {
        std::vector<ad::Var> ivars;
        for (const auto& in : inputs) ivars.push_back(tape.constant(in));
        ad::Var out = model.forward(tape, pvars, ivars);
        if (inject_fault && first_eval) {
            first_eval = false;
            out = tape.scale(out, 1.01);  // analytic pass only: corrupts gradients
        }
        return tape.mse(out, tape.constant(target));
    };
    return ad::grad_check(build, params);
}

AlignedDataset build_aligned_dataset(const std::vector<CsiFrame>& frames,
                                     const std::vector<LabeledFrame>& labels,
                                     FeatureTensor features) {
    if (features.frames != frames.size()) {
        throw std::invalid_argument("build_aligned_dataset: feature/frame count mismatch");
    }
    std::vector<double> label_ts, csi_ts;
    label_ts.reserve(labels.size());
    csi_ts.reserve(frames.size());
    for (const auto& l : labels) label_ts.push_back(l.timestamp);
    for (const auto& f : frames) csi_ts.push_back(f.timestamp);
    const auto pairs = align_nearest(label_ts, csi_ts);

    AlignedDataset data;
    data.features = std::move(features);
    data.csi_of_sample.reserve(pairs.size());
    data.poses.reserve(pairs.size());
    for (const auto& p : pairs) {
        data.csi_of_sample.push_back(p.csi_index);
        data.poses.push_back(labels[p.label_index].pose);
        data.motions.push_back(labels[p.label_index].motion);
        data.tags.push_back(labels[p.label_index].state_tag);
    }
    return data;
}

}  // namespace midipose
