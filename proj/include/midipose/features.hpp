#pragma once

#include <span>

#include "midipose/csi.hpp"

namespace midipose {

/// Sliding-window setup for the amplitude statistics.
struct WindowConfig {
    std::size_t window = 25;  // ~1 s of CSI at 25 Hz
    double epsilon = 1e-9;    // guards the normalized-std division
};

struct WindowStats {
    double nstd = 0.0;  // population std / (|mean| + eps)
    double mad = 0.0;   // median absolute deviation about the median
    double iqr = 0.0;   // Q3 - Q1, linear-interpolation quantiles
};

/// Dispersion statistics of one amplitude window. Requires length >= 2.
WindowStats window_stats(std::span<const double> series, double epsilon = 1e-9);

/// Wraps an angle to the principal range (-pi, pi].
double wrap_angle(double a);

/// Removes artificial 2*pi jumps: output starts at input[0], consecutive
/// differences land in (-pi, pi], and every element stays congruent to the
/// input mod 2*pi.
std::vector<double> unwrap(std::span<const double> phase);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
};

/// Least-squares line over the integer index axis.
LinearFit linear_fit(std::span<const double> values);

/// Subtracts the least-squares line so the residual has zero slope and zero
/// mean. Requires length >= 2.
std::vector<double> linear_detrend(std::span<const double> values);

/// Principal value of (phi_a - phi_b) in (-pi, pi].
double phase_differential(double phi_a, double phi_b);

/// Doppler estimate in Hz from the phase advance between adjacent
/// timestamps. Requires dt > 0.
double doppler_shift(double phi_prev, double phi_cur, double dt_seconds);

/// Runs all three feature domains over a frame sequence and fills the
/// n x 544 x 3 x 7 tensor. Channel layout is documented on FeatureTensor.
/// Amplitude statistics use the trailing window (partial windows of length
/// >= 2 for the first frames; frame 0 copies frame 1). The Doppler channel
/// of frame 0 is 0. Requires at least 2 frames with strictly increasing
/// timestamps.
FeatureTensor extract_features(std::span<const CsiFrame> frames, const WindowConfig& cfg = {});

}  // namespace midipose
