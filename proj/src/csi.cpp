#include "midipose/csi.hpp"

namespace midipose {

std::string_view to_string(MotionKind m) {
    switch (m) {
        case MotionKind::marktime: return "marktime";
        case MotionKind::lunge: return "lunge";
        case MotionKind::risehand: return "risehand";
        case MotionKind::walk: return "walk";
        case MotionKind::squat: return "squat";
    }
    throw std::invalid_argument("unknown MotionKind");
}

std::string_view to_string(StateTag t) {
    switch (t) {
        case StateTag::none: return "none";
        case StateTag::marktime1: return "marktime1";
        case StateTag::marktime2: return "marktime2";
        case StateTag::lunge1: return "lunge1";
        case StateTag::lunge2: return "lunge2";
        case StateTag::risehand1: return "risehand1";
        case StateTag::risehand2: return "risehand2";
        case StateTag::walk1: return "walk1";
        case StateTag::walk2: return "walk2";
        case StateTag::squat1: return "squat1";
    }
    throw std::invalid_argument("unknown StateTag");
}

MotionKind motion_from_string(std::string_view s) {
    for (MotionKind m : kAllMotions) {
        if (to_string(m) == s) return m;
    }
    throw std::invalid_argument("unknown motion kind: " + std::string(s));
}

MotionKind tag_motion(StateTag t) {
    switch (t) {
        case StateTag::marktime1:
        case StateTag::marktime2: return MotionKind::marktime;
        case StateTag::lunge1:
        case StateTag::lunge2: return MotionKind::lunge;
        case StateTag::risehand1:
        case StateTag::risehand2: return MotionKind::risehand;
        case StateTag::walk1:
        case StateTag::walk2: return MotionKind::walk;
        case StateTag::squat1: return MotionKind::squat;
        case StateTag::none: break;
    }
    throw std::invalid_argument("tag_motion: tag is none");
}

std::vector<double> amplitude(const CsiFrame& frame) {
    std::vector<double> out(frame.h.size());
    for (std::size_t i = 0; i < frame.h.size(); ++i) {
        out[i] = std::abs(frame.h[i]);
    }
    return out;
}

std::vector<double> raw_phase(const CsiFrame& frame) {
    std::vector<double> out(frame.h.size());
    for (std::size_t i = 0; i < frame.h.size(); ++i) {
        const auto& z = frame.h[i];
        if (z.real() == 0.0 && z.imag() == 0.0) {
            throw std::domain_error("raw_phase: undefined phase for zero-magnitude entry " +
                                    std::to_string(i));
        }
        double p = std::atan2(z.imag(), z.real());
        if (p <= -M_PI) p = M_PI;  // principal range is (-pi, pi]
        out[i] = p;
    }
    return out;
}

void validate_frame(const CsiFrame& frame) {
    if (frame.h.size() != kSubcarriers * kRrus) {
        throw std::invalid_argument("CsiFrame: expected 544x3 entries, got " +
                                    std::to_string(frame.h.size()));
    }
    if (!std::isfinite(frame.timestamp)) throw std::invalid_argument("CsiFrame: non-finite timestamp");
    for (const auto& z : frame.h) {
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
            throw std::invalid_argument("CsiFrame: non-finite channel entry");
        }
    }
}

void validate_pose(const Pose2D& pose) {
    for (double v : pose.xy) {
        if (!std::isfinite(v)) throw std::invalid_argument("Pose2D: non-finite coordinate");
    }
}

void validate_label(const LabeledFrame& label) {
    validate_pose(label.pose);
    if (!std::isfinite(label.timestamp)) throw std::invalid_argument("LabeledFrame: non-finite timestamp");
    if (label.state_tag != StateTag::none && tag_motion(label.state_tag) != label.motion) {
        throw std::invalid_argument(std::string("LabeledFrame: state tag ") +
                                    std::string(to_string(label.state_tag)) +
                                    " inconsistent with motion " +
                                    std::string(to_string(label.motion)));
    }
}

}  // namespace midipose
