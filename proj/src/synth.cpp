#include "midipose/synth.hpp"

#include <algorithm>
#include <cmath>

#include "midipose/dataset.hpp"

namespace midipose::synth {
namespace {

constexpr double kSpeedOfLight = 299792458.0;
constexpr double kHeightScale = 2.0;  // normalized pose y of 1.0 is 2 m

// Smooth one-sided activation lobe: zero for s <= 0, peaks at s = 1, with a
// continuous derivative at the zero crossing.
double lobe(double s) { return s > 0.0 ? s * s : 0.0; }

Pose2D base_pose() {
    Pose2D p;
    p.set(0, 0.50, 0.88);   // nose
    p.set(1, 0.48, 0.90);   // left_eye
    p.set(2, 0.52, 0.90);   // right_eye
    p.set(3, 0.46, 0.88);   // left_ear
    p.set(4, 0.54, 0.88);   // right_ear
    p.set(5, 0.44, 0.78);   // left_shoulder
    p.set(6, 0.56, 0.78);   // right_shoulder
    p.set(7, 0.41, 0.65);   // left_elbow
    p.set(8, 0.59, 0.65);   // right_elbow
    p.set(9, 0.40, 0.52);   // left_wrist
    p.set(10, 0.60, 0.52);  // right_wrist
    p.set(11, 0.46, 0.52);  // left_hip
    p.set(12, 0.54, 0.52);  // right_hip
    p.set(13, 0.455, 0.30); // left_knee
    p.set(14, 0.545, 0.30); // right_knee
    p.set(15, 0.45, 0.08);  // left_ankle
    p.set(16, 0.55, 0.08);  // right_ankle
    return p;
}

void shift(Pose2D& p, std::size_t k, double dx, double dy) {
    p.xy[2 * k] += dx;
    p.xy[2 * k + 1] += dy;
}

struct TagPoint {
    double phase;  // fraction of the period
    StateTag tag;
};

std::vector<TagPoint> tag_points(MotionKind kind) {
    switch (kind) {
        case MotionKind::marktime: return {{0.25, StateTag::marktime1}, {0.75, StateTag::marktime2}};
        case MotionKind::lunge: return {{0.25, StateTag::lunge1}, {0.75, StateTag::lunge2}};
        case MotionKind::risehand: return {{0.25, StateTag::risehand1}, {0.75, StateTag::risehand2}};
        case MotionKind::walk: return {{0.25, StateTag::walk1}, {0.75, StateTag::walk2}};
        case MotionKind::squat: return {{0.5, StateTag::squat1}};
    }
    throw std::invalid_argument("tag_points: unknown motion");
}

}  // namespace

double distance(const Vec3& a, const Vec3& b) {
    const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

void SceneLayout::validate() const {
    if (area_x <= 0 || area_y <= 0 || device_height <= 0) {
        throw std::invalid_argument("SceneLayout: non-positive geometry");
    }
    if (carrier_hz <= 0 || subcarrier_spacing_hz <= 0) {
        throw std::invalid_argument("SceneLayout: non-positive radio parameters");
    }
    if (csi_rate_hz <= 0 || label_rate_hz <= 0) {
        throw std::invalid_argument("SceneLayout: non-positive sample rates");
    }
    if (direct_gain < 0) throw std::invalid_argument("SceneLayout: negative direct gain");
}

double motion_period(MotionKind kind) {
    switch (kind) {
        case MotionKind::marktime: return 4.0;
        case MotionKind::lunge: return 8.0;
        case MotionKind::risehand: return 8.0;
        case MotionKind::walk: return 16.0;
        case MotionKind::squat: return 8.0;
    }
    throw std::invalid_argument("motion_period: unknown motion");
}

Pose2D pose_at(MotionKind kind, double t) {
    Pose2D p = base_pose();
    const double u = 2.0 * M_PI * t / motion_period(kind);
    switch (kind) {
        case MotionKind::marktime: {
            const double left = lobe(std::sin(u));
            const double right = lobe(-std::sin(u));
            shift(p, 13, 0.0, 0.08 * left);    // left knee
            shift(p, 15, 0.0, 0.10 * left);    // left ankle
            shift(p, 14, 0.0, 0.08 * right);
            shift(p, 16, 0.0, 0.10 * right);
            shift(p, 11, 0.0, -0.01 * (left + right));
            shift(p, 12, 0.0, -0.01 * (left + right));
            break;
        }
        case MotionKind::lunge: {
            const double left = lobe(std::sin(u));
            const double right = lobe(-std::sin(u));
            shift(p, 15, -0.06 * left, 0.0);
            shift(p, 13, -0.05 * left, -0.03 * left);
            shift(p, 16, 0.06 * right, 0.0);
            shift(p, 14, 0.05 * right, -0.03 * right);
            const double sink = 0.04 * (left + right);
            for (std::size_t k : {0, 1, 2, 3, 4, 5, 6, 11, 12}) shift(p, k, 0.0, -sink);
            break;
        }
        case MotionKind::risehand: {
            const double left = lobe(std::sin(u));
            const double right = lobe(-std::sin(u));
            shift(p, 9, 0.02 * left, 0.16 * left);    // left wrist
            shift(p, 7, 0.01 * left, 0.08 * left);    // left elbow
            shift(p, 10, -0.02 * right, 0.16 * right);
            shift(p, 8, -0.01 * right, 0.08 * right);
            break;
        }
        case MotionKind::walk: {
            // Modest sweep: at 3.5 GHz every centimeter of body translation
            // rewinds the path phase, so a desk-scale training set can only
            // cover a manifold a few wavelengths wide.
            const double dx = 0.035 * std::sin(u);
            for (std::size_t k = 0; k < kKeypoints; ++k) shift(p, k, dx, 0.0);
            const double step = 2.0 * M_PI * t / 2.0;  // one lift per leg every two seconds
            const double left = lobe(std::sin(step));
            const double right = lobe(-std::sin(step));
            shift(p, 13, 0.0, 0.05 * left);
            shift(p, 15, 0.0, 0.07 * left);
            shift(p, 14, 0.0, 0.05 * right);
            shift(p, 16, 0.0, 0.07 * right);
            break;
        }
        case MotionKind::squat: {
            const double act = 0.5 * (1.0 - std::cos(u));
            for (std::size_t k : {0, 1, 2, 3, 4}) shift(p, k, 0.0, -0.06 * act);
            for (std::size_t k : {5, 6, 7, 8, 9, 10}) shift(p, k, 0.0, -0.06 * act);
            shift(p, 11, 0.0, -0.07 * act);
            shift(p, 12, 0.0, -0.07 * act);
            shift(p, 13, -0.012 * act, -0.035 * act);
            shift(p, 14, 0.012 * act, -0.035 * act);
            break;
        }
    }
    return p;
}

MotionScript gen_motion(MotionKind kind, double duration_s, double label_rate_hz) {
    if (duration_s < 0.0) throw std::invalid_argument("gen_motion: negative duration");
    if (label_rate_hz <= 0.0) throw std::invalid_argument("gen_motion: non-positive label rate");
    MotionScript script;
    script.kind = kind;
    script.duration_s = duration_s;
    script.frame_rate_hz = label_rate_hz;
    const auto n = static_cast<std::size_t>(std::llround(duration_s * label_rate_hz));
    script.poses.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        script.poses.push_back(pose_at(kind, static_cast<double>(i) / label_rate_hz));
    }
    script.tags.assign(n, StateTag::none);

    // Tag the frame nearest each extremum instant plus its direct
    // neighbors, so desk-scale state slices are non-degenerate.
    const double period = motion_period(kind);
    for (const TagPoint& tp : tag_points(kind)) {
        for (double t = tp.phase * period; t < duration_s; t += period) {
            const auto center = static_cast<std::ptrdiff_t>(std::llround(t * label_rate_hz));
            for (std::ptrdiff_t j = center - 1; j <= center + 1; ++j) {
                if (j >= 0 && j < static_cast<std::ptrdiff_t>(n)) script.tags[j] = tp.tag;
            }
        }
    }
    return script;
}

std::vector<Scatterer> pose_scatterers(const Pose2D& pose, const SceneLayout& layout) {
    // joint index -> reflectivity; torso-proximal joints reflect strongest
    static constexpr std::array<std::pair<std::size_t, double>, 12> kJoints = {{
        {5, 0.9}, {6, 0.9},    // shoulders
        {7, 0.6}, {8, 0.6},    // elbows
        {9, 0.35}, {10, 0.35}, // wrists
        {11, 0.9}, {12, 0.9},  // hips
        {13, 0.6}, {14, 0.6},  // knees
        {15, 0.35}, {16, 0.35} // ankles
    }};
    std::vector<Scatterer> out;
    out.reserve(kJoints.size());
    for (const auto& [joint, rho] : kJoints) {
        Scatterer s;
        s.position = {pose.x(joint) * layout.area_x, 0.5 * layout.area_y,
                      pose.y(joint) * kHeightScale};
        s.reflectivity = rho;
        out.push_back(s);
    }
    return out;
}

CsiFrame simulate_frame(double timestamp, std::span<const Scatterer> scatterers,
                        const SceneLayout& layout) {
    CsiFrame frame;
    frame.timestamp = timestamp;
    const Vec3 ue = layout.ue();
    const auto rrus = layout.rrus();
    for (std::size_t r = 0; r < kRrus; ++r) {
        const double tau0 = distance(ue, rrus[r]) / kSpeedOfLight;
        std::vector<double> taus(scatterers.size());
        for (std::size_t j = 0; j < scatterers.size(); ++j) {
            taus[j] = (distance(ue, scatterers[j].position) +
                       distance(scatterers[j].position, rrus[r])) /
                      kSpeedOfLight;
        }
        for (std::size_t k = 0; k < kSubcarriers; ++k) {
            const double fk = layout.subcarrier_hz(k);
            std::complex<double> h = layout.direct_gain > 0.0
                                         ? std::polar(layout.direct_gain, -2.0 * M_PI * fk * tau0)
                                         : std::complex<double>{0.0, 0.0};
            for (std::size_t j = 0; j < scatterers.size(); ++j) {
                h += std::polar(scatterers[j].reflectivity, -2.0 * M_PI * fk * taus[j]);
            }
            frame.at(k, r) = h;
        }
    }
    return frame;
}

void add_noise(CsiFrame& frame, double snr_db, Rng& rng) {
    if (std::isinf(snr_db)) return;
    double power = 0.0;
    for (const auto& z : frame.h) power += std::norm(z);
    power /= static_cast<double>(frame.h.size());
    const double noise_power = power / std::pow(10.0, snr_db / 10.0);
    const double sigma = std::sqrt(noise_power / 2.0);
    for (auto& z : frame.h) {
        z += std::complex<double>(sigma * rng.normal(), sigma * rng.normal());
    }
}

std::vector<CsiFrame> simulate_csi(const MotionScript& script, const SceneLayout& layout) {
    layout.validate();
    std::vector<CsiFrame> frames;
    if (script.empty()) return frames;
    const auto n = static_cast<std::size_t>(std::llround(script.duration_s * layout.csi_rate_hz));
    frames.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / layout.csi_rate_hz;
        // Scatterer positions from the label-rate script, linearly
        // interpolated between frames.
        const double x = t * script.frame_rate_hz;
        const std::size_t j0 = std::min(static_cast<std::size_t>(x), script.frame_count() - 1);
        const std::size_t j1 = std::min(j0 + 1, script.frame_count() - 1);
        const double alpha = x - static_cast<double>(j0);
        Pose2D pose;
        for (std::size_t c = 0; c < pose.xy.size(); ++c) {
            pose.xy[c] = (1.0 - alpha) * script.poses[j0].xy[c] + alpha * script.poses[j1].xy[c];
        }
        frames.push_back(simulate_frame(t, pose_scatterers(pose, layout), layout));
    }
    return frames;
}

DatasetSummary make_dataset(std::span<const MotionKind> kinds, double per_kind_duration_s,
                            const SceneLayout& layout, std::uint64_t seed,
                            const std::filesystem::path& path) {
    if (kinds.empty()) throw std::invalid_argument("make_dataset: no motion kinds");
    if (per_kind_duration_s <= 0.0) throw std::invalid_argument("make_dataset: non-positive duration");
    layout.validate();

    Rng rng(seed);
    std::vector<CsiFrame> frames;
    std::vector<LabeledFrame> labels;
    DatasetSummary summary;
    double t_base = 0.0;
    for (const MotionKind kind : kinds) {
        const MotionScript script = gen_motion(kind, per_kind_duration_s, layout.label_rate_hz);
        std::vector<CsiFrame> csi = simulate_csi(script, layout);
        for (auto& f : csi) {
            f.timestamp += t_base + rng.uniform(-kTimestampJitter, kTimestampJitter);
            add_noise(f, layout.snr_db, rng);
            frames.push_back(std::move(f));
        }
        std::size_t label_count = 0;
        for (std::size_t j = 0; j < script.frame_count(); ++j) {
            LabeledFrame l;
            l.pose = script.poses[j];
            l.timestamp = t_base + static_cast<double>(j) / layout.label_rate_hz +
                          rng.uniform(-kTimestampJitter, kTimestampJitter);
            l.motion = kind;
            l.state_tag = script.tags[j];
            labels.push_back(std::move(l));
            ++label_count;
        }
        summary.labels_per_motion.emplace_back(kind, label_count);
        t_base += per_kind_duration_s;
    }
    summary.csi_frames = frames.size();
    summary.label_frames = labels.size();
    write_dataset(frames, labels, path);
    return summary;
}

}  // namespace midipose::synth
