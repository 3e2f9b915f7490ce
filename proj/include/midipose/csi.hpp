#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace midipose {

inline constexpr std::size_t kSubcarriers = 544;
inline constexpr std::size_t kRrus = 3;
inline constexpr std::size_t kFeatureChannels = 7;
inline constexpr std::size_t kKeypoints = 17;

/// COCO-17 keypoint order used everywhere a pose is flattened.
inline constexpr std::array<std::string_view, kKeypoints> kKeypointNames = {
    "nose",          "left_eye",      "right_eye",  "left_ear",    "right_ear",
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow", "left_wrist",
    "right_wrist",   "left_hip",      "right_hip",  "left_knee",   "right_knee",
    "left_ankle",    "right_ankle"};

/// One timestamped channel snapshot: 544 subcarriers x 3 receiving RRUs,
/// complex gains stored subcarrier-major.
struct CsiFrame {
    double timestamp = 0.0;
    std::vector<std::complex<double>> h = std::vector<std::complex<double>>(kSubcarriers * kRrus);

    std::complex<double>& at(std::size_t k, std::size_t r) { return h[k * kRrus + r]; }
    const std::complex<double>& at(std::size_t k, std::size_t r) const { return h[k * kRrus + r]; }
};

/// 17 keypoints, (x, y) pairs in normalized scene coordinates.
struct Pose2D {
    std::array<double, 2 * kKeypoints> xy{};

    double x(std::size_t k) const { return xy[2 * k]; }
    double y(std::size_t k) const { return xy[2 * k + 1]; }
    void set(std::size_t k, double px, double py) {
        xy[2 * k] = px;
        xy[2 * k + 1] = py;
    }
};

enum class MotionKind : std::uint32_t { marktime = 0, lunge, risehand, walk, squat };

/// Tagged extremum instants within a motion; `none` means an untagged frame.
enum class StateTag : std::uint32_t {
    none = 0,
    marktime1,
    marktime2,
    lunge1,
    lunge2,
    risehand1,
    risehand2,
    walk1,
    walk2,
    squat1,
};

inline constexpr std::array<MotionKind, 5> kAllMotions = {
    MotionKind::marktime, MotionKind::lunge, MotionKind::risehand, MotionKind::walk,
    MotionKind::squat};

std::string_view to_string(MotionKind m);
std::string_view to_string(StateTag t);
MotionKind motion_from_string(std::string_view s);
/// Motion a tag belongs to (tag must not be `none`).
MotionKind tag_motion(StateTag t);

/// Ground-truth pose paired with its motion metadata.
struct LabeledFrame {
    Pose2D pose;
    double timestamp = 0.0;
    MotionKind motion = MotionKind::marktime;
    StateTag state_tag = StateTag::none;
};

/// n x 544 x 3 x 7 extracted features, row-major [frame][subcarrier][rru][channel].
/// Channels: 0 amplitude, 1 windowed normalized std, 2 windowed MAD,
/// 3 windowed IQR, 4 sanitized unwrapped phase, 5 inter-RRU phase
/// differential, 6 Doppler estimate in Hz.
struct FeatureTensor {
    std::size_t frames = 0;
    std::vector<float> data;

    static constexpr std::size_t frame_stride() { return kSubcarriers * kRrus * kFeatureChannels; }
    float& at(std::size_t i, std::size_t k, std::size_t r, std::size_t c) {
        return data[((i * kSubcarriers + k) * kRrus + r) * kFeatureChannels + c];
    }
    float at(std::size_t i, std::size_t k, std::size_t r, std::size_t c) const {
        return data[((i * kSubcarriers + k) * kRrus + r) * kFeatureChannels + c];
    }
};

/// Elementwise |h|, returned subcarrier-major like CsiFrame::h.
std::vector<double> amplitude(const CsiFrame& frame);

/// Two-argument arctangent phase in (-pi, pi]. Throws on a zero-magnitude
/// entry (phase undefined).
std::vector<double> raw_phase(const CsiFrame& frame);

void validate_frame(const CsiFrame& frame);
void validate_pose(const Pose2D& pose);
void validate_label(const LabeledFrame& label);

}  // namespace midipose
