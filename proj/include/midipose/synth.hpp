#pragma once

#include <filesystem>
#include <span>

#include "midipose/csi.hpp"
#include "midipose/random.hpp"

namespace midipose::synth {

struct Vec3 {
    double x = 0, y = 0, z = 0;
};

double distance(const Vec3& a, const Vec3& b);

/// Sensing-area geometry and radio parameters. The UE and three RRUs sit at
/// the corners of the area at equal height; subcarrier k is centered at
/// carrier + (k - 272) * spacing.
struct SceneLayout {
    double area_x = 3.3;  // meters
    double area_y = 2.7;
    double device_height = 1.5;
    double carrier_hz = 3.5e9;
    double subcarrier_spacing_hz = 30e3;
    double csi_rate_hz = 25.0;
    double label_rate_hz = 15.0;
    double snr_db = 25.0;     // +inf disables noise
    double direct_gain = 1.0; // line-of-sight path amplitude (0 disables)

    Vec3 ue() const { return {0.0, 0.0, device_height}; }
    std::array<Vec3, kRrus> rrus() const {
        return {Vec3{area_x, 0.0, device_height}, Vec3{0.0, area_y, device_height},
                Vec3{area_x, area_y, device_height}};
    }
    double subcarrier_hz(std::size_t k) const {
        return carrier_hz + (static_cast<double>(k) - 272.0) * subcarrier_spacing_hz;
    }
    void validate() const;
};

/// Point reflector tied to a skeleton joint.
struct Scatterer {
    Vec3 position;
    double reflectivity = 1.0;  // (0, 1]
};

/// Joint trajectory sampled at the label rate, with extremum state tags.
struct MotionScript {
    MotionKind kind = MotionKind::marktime;
    double duration_s = 0.0;
    double frame_rate_hz = 15.0;
    std::vector<Pose2D> poses;       // one per label frame
    std::vector<StateTag> tags;      // StateTag::none when untagged

    bool empty() const { return poses.empty(); }
    std::size_t frame_count() const { return poses.size(); }
};

/// Analytic pose of a motion at time t (periodic, smooth). The base of every
/// generated trajectory; gen_motion samples it on the label grid.
Pose2D pose_at(MotionKind kind, double t);

/// Period of one motion cycle in seconds.
double motion_period(MotionKind kind);

/// Samples pose_at on the label grid and tags the frames nearest each
/// motion extremum (left/right variants get the 1/2 tags). Zero duration
/// yields an empty script; negative duration is an error.
MotionScript gen_motion(MotionKind kind, double duration_s, double label_rate_hz);

/// Scatterers for a pose: one reflector per major joint (shoulders, elbows,
/// wrists, hips, knees, ankles), reflectivity decreasing toward the limbs.
/// Normalized pose coordinates map to the plane y = area_y / 2 with
/// pose-y as height (2 m full scale).
std::vector<Scatterer> pose_scatterers(const Pose2D& pose, const SceneLayout& layout);

/// Channel of one time instant: direct path plus one reflected path per
/// scatterer, h = a0 exp(-j 2 pi f tau0) + sum rho_j exp(-j 2 pi f tau_j).
CsiFrame simulate_frame(double timestamp, std::span<const Scatterer> scatterers,
                        const SceneLayout& layout);

/// Adds circular complex noise at the layout SNR relative to the mean
/// entry power of the frame.
void add_noise(CsiFrame& frame, double snr_db, Rng& rng);

/// CSI stream for a motion script at the layout CSI rate; scatterer
/// positions are interpolated linearly between label frames. Pre-noise
/// output is a deterministic function of (script, layout).
std::vector<CsiFrame> simulate_csi(const MotionScript& script, const SceneLayout& layout);

struct DatasetSummary {
    std::size_t csi_frames = 0;
    std::size_t label_frames = 0;
    std::vector<std::pair<MotionKind, std::size_t>> labels_per_motion;
};

/// End-to-end generation: per motion kind, labels at ~label_rate and CSI at
/// ~csi_rate (both with uniform +/-2 ms timestamp jitter), concatenated on a
/// common clock and written as one MDP1 file. Reproducible per seed.
DatasetSummary make_dataset(std::span<const MotionKind> kinds, double per_kind_duration_s,
                            const SceneLayout& layout, std::uint64_t seed,
                            const std::filesystem::path& path);

inline constexpr double kTimestampJitter = 0.002;  // seconds

}  // namespace midipose::synth
