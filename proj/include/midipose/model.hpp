#pragma once

#include <memory>

#include "midipose/alignment.hpp"
#include "midipose/autodiff.hpp"
#include "midipose/csi.hpp"
#include "midipose/nn.hpp"

namespace midipose {

enum class FusionMode { attention, concat };
enum class ModelKind { midipose, baseline };

ModelKind model_kind_from_string(std::string_view s);
std::string_view to_string(ModelKind k);

/// Network dimensions. Defaults are the desk-scale configuration; tests use
/// scaled-down grids so full-model finite-difference checks stay cheap.
struct ModelConfig {
    std::size_t subcarriers = kSubcarriers;
    std::size_t rrus = kRrus;
    std::size_t channels = kFeatureChannels;

    std::size_t latent_dim = 128;      // shared latent space D
    std::size_t heads = 4;             // attention heads
    std::size_t encoder_hidden = 512;  // per-domain MLP hidden width
    std::size_t backbone_blocks = 2;
    std::size_t backbone_hidden = 256;
    std::size_t head_hidden = 256;
    std::size_t keypoints = kKeypoints;
    FusionMode fusion = FusionMode::attention;

    // Baseline trunk: three strided convolutions, then residual conv blocks.
    std::array<std::size_t, 3> conv_channels = {32, 48, 64};
    std::size_t conv_kernel = 5;
    std::size_t conv_stride = 2;
    std::size_t res_kernel = 3;
    std::size_t res_blocks = 2;

    std::size_t cell_count() const { return subcarriers * rrus; }
    std::size_t amp_dim() const { return 4 * cell_count(); }
    std::size_t phase_dim() const { return 2 * cell_count(); }
    std::size_t dop_dim() const { return cell_count(); }
    std::size_t output_dim() const { return 2 * keypoints; }
    std::size_t baseline_in_channels() const { return rrus * channels; }

    void validate() const;
};

struct TrainConfig {
    std::size_t batch = 64;
    std::size_t epochs = 100;
    double base_lr = 0.008;
    double momentum = 0.9;
    double lr_factor = 0.5;
    std::size_t lr_period = 10;
    std::uint64_t seed = 0;
};

/// Feature stream paired with pose labels after nearest-timestamp alignment.
struct AlignedDataset {
    FeatureTensor features;                 // full CSI stream
    std::vector<std::size_t> csi_of_sample; // sample -> feature frame index
    std::vector<Pose2D> poses;
    std::vector<MotionKind> motions;
    std::vector<StateTag> tags;

    std::size_t sample_count() const { return csi_of_sample.size(); }
};

/// One training batch: model-specific input matrices plus [B][2K] targets.
struct Batch {
    std::vector<ad::Tensor> inputs;
    ad::Tensor targets;
};

/// Coordinate MSE between two poses (the training loss, sample-level).
double pose_mse(const Pose2D& pred, const Pose2D& gt);

/// Common surface of the two networks: parameter storage, z-score
/// normalization of the feature channels, batch assembly, and the
/// differentiable forward pass.
class PoseModel {
public:
    virtual ~PoseModel() = default;

    const ModelConfig& config() const { return cfg_; }
    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }

    /// Per-channel mean/std over the given feature frames (the train split),
    /// stored in the non-trainable norm.* parameters.
    void fit_normalization(const FeatureTensor& features, std::span<const std::size_t> frame_idx);

    virtual Batch make_batch(const AlignedDataset& data,
                             std::span<const std::size_t> sample_idx) const = 0;
    virtual ad::Var forward(ad::Tape& tape, std::span<const ad::Var> param_vars,
                            std::span<const ad::Var> input_vars) const = 0;

    /// Inference over the selected samples (no gradients).
    std::vector<Pose2D> predict(const AlignedDataset& data,
                                std::span<const std::size_t> sample_idx) const;

protected:
    explicit PoseModel(ModelConfig cfg) : cfg_(std::move(cfg)) {}
    double znorm(float v, std::size_t channel) const;

    ModelConfig cfg_;
    nn::ParamStore params_;
};

/// Per-domain MLP encoders into a shared latent space, token fusion via
/// multi-head attention plus a per-token MLP (or plain concatenation),
/// residual backbone, MLP regression head.
class MidiPoseModel : public PoseModel {
public:
    MidiPoseModel(ModelConfig cfg, std::uint64_t seed);

    Batch make_batch(const AlignedDataset& data,
                     std::span<const std::size_t> sample_idx) const override;
    ad::Var forward(ad::Tape& tape, std::span<const ad::Var> param_vars,
                    std::span<const ad::Var> input_vars) const override;

    /// Latent embedding of a single domain vector (already z-scored).
    std::vector<double> encode_domain(std::span<const double> domain_vec, std::size_t which) const;
};

/// Reference conv-residual regressor: the feature frame as rrus*channels
/// input channels over the subcarrier axis, three strided 1-D convolutions,
/// residual conv blocks, global average pooling, linear head.
class BaselineModel : public PoseModel {
public:
    BaselineModel(ModelConfig cfg, std::uint64_t seed);

    Batch make_batch(const AlignedDataset& data,
                     std::span<const std::size_t> sample_idx) const override;
    ad::Var forward(ad::Tape& tape, std::span<const ad::Var> param_vars,
                    std::span<const ad::Var> input_vars) const override;

    ad::Conv1dSpec conv_spec(std::size_t layer) const;  // 0..2 trunk, 3 residual
};

std::unique_ptr<PoseModel> make_model(ModelKind kind, const ModelConfig& cfg, std::uint64_t seed);

struct TrainResult {
    std::vector<double> epoch_loss;  // mean training loss per epoch
    std::vector<double> epoch_lr;
};

/// Mini-batch SGD training with the multistep schedule. Deterministic for a
/// fixed seed: seeded shuffles, fixed accumulation order, single-threaded
/// math. Throws on an empty split or non-finite loss (reporting epoch and
/// batch index).
TrainResult train_model(PoseModel& model, const AlignedDataset& data,
                        std::span<const std::size_t> train_idx, const TrainConfig& cfg);

/// Extracted features + labels -> aligned samples (nearest timestamp).
AlignedDataset build_aligned_dataset(const std::vector<CsiFrame>& frames,
                                     const std::vector<LabeledFrame>& labels,
                                     FeatureTensor features);

/// Central-difference audit of the full model on a 4-sample random batch,
/// sweeping every stored parameter. Batches whose pre-activations sit
/// within 1e-3 of a relu kink are redrawn (the finite-difference probe is
/// invalid across the kink). `inject_fault` corrupts the analytic pass by
/// 1% to exercise the detector.
double model_gradient_check(PoseModel& model, std::uint64_t seed, bool inject_fault = false);

}  // namespace midipose
