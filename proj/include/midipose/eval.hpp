#pragma once

#include <filesystem>
#include <span>

#include "midipose/csi.hpp"

namespace midipose::eval {

inline constexpr std::array<double, 4> kDefaultThresholds = {5.0, 10.0, 20.0, 30.0};

/// PCK normalizer: Euclidean distance from the mid-shoulder point to the
/// mid-hip point of the ground-truth pose. Throws on degenerate torsos.
double torso_length(const Pose2D& gt);

/// Percentage of keypoints within (alpha/100) * torso_length(gt) of the
/// ground truth, over all (frame, keypoint) pairs; boundary inclusive.
double pck(std::span<const Pose2D> preds, std::span<const Pose2D> gts, double alpha);

enum class SliceKind { state, process };

/// Paired predictions with their motion metadata; position i describes one
/// evaluated frame.
struct EvalInputs {
    std::vector<Pose2D> preds;
    std::vector<Pose2D> gts;
    std::vector<MotionKind> motions;
    std::vector<StateTag> tags;

    std::size_t size() const { return preds.size(); }
    void validate() const;
};

struct PckRow {
    SliceKind kind = SliceKind::process;
    std::string slice;
    std::string model;
    double alpha = 0.0;
    double value = 0.0;  // percent
};

using PckTable = std::vector<PckRow>;

/// Per-slice, per-threshold PCK. Process slices cover every frame of each
/// motion present; state slices cover tagged frames per tag present. Slices
/// that select no frames are absent from the result. Rows come out sorted:
/// slice name, then model, then ascending alpha.
PckTable evaluate(const EvalInputs& inputs, std::string_view model_name,
                  std::span<const double> alphas = kDefaultThresholds);

/// Deterministic rendering; the CSV is byte-stable for identical inputs.
std::string format_table(const PckTable& table, SliceKind kind);
std::string format_csv(const PckTable& table);
void write_report(const PckTable& table, const std::filesystem::path& text_path,
                  const std::filesystem::path& csv_path);

/// Merge + canonical sort (used when combining the tables of two models).
PckTable merge_tables(const PckTable& a, const PckTable& b);

}  // namespace midipose::eval
