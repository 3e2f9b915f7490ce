#include "midipose/features.hpp"

#include <algorithm>
#include <numeric>

namespace midipose {
namespace {

double median_of_sorted(std::span<const double> s) {
    const std::size_t n = s.size();
    return n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
}

// Quantile by linear interpolation between order statistics of a sorted
// sample (position q * (n - 1)).
double quantile_sorted(std::span<const double> s, double q) {
    const double pos = q * static_cast<double>(s.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= s.size()) return s.back();
    const double frac = pos - static_cast<double>(lo);
    return s[lo] + frac * (s[lo + 1] - s[lo]);
}

}  // namespace

WindowStats window_stats(std::span<const double> series, double epsilon) {
    if (series.size() < 2) {
        throw std::invalid_argument("window_stats: need at least 2 samples, got " +
                                    std::to_string(series.size()));
    }
    const std::size_t n = series.size();
    double mean = 0.0;
    for (double v : series) {
        if (!std::isfinite(v)) throw std::invalid_argument("window_stats: non-finite sample");
        mean += v;
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : series) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);  // population variance

    std::vector<double> sorted(series.begin(), series.end());
    std::sort(sorted.begin(), sorted.end());
    const double med = median_of_sorted(sorted);

    std::vector<double> dev(n);
    for (std::size_t i = 0; i < n; ++i) dev[i] = std::abs(series[i] - med);
    std::sort(dev.begin(), dev.end());

    WindowStats out;
    out.nstd = std::sqrt(var) / (std::abs(mean) + epsilon);
    out.mad = median_of_sorted(dev);
    out.iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    return out;
}

double wrap_angle(double a) {
    double w = std::remainder(a, 2.0 * M_PI);
    if (w <= -M_PI) w += 2.0 * M_PI;
    return w;
}

std::vector<double> unwrap(std::span<const double> phase) {
    std::vector<double> out(phase.size());
    if (phase.empty()) return out;
    out[0] = phase[0];
    for (std::size_t i = 1; i < phase.size(); ++i) {
        out[i] = out[i - 1] + wrap_angle(phase[i] - phase[i - 1]);
    }
    return out;
}

LinearFit linear_fit(std::span<const double> values) {
    if (values.size() < 2) throw std::invalid_argument("linear_fit: need at least 2 samples");
    const double n = static_cast<double>(values.size());
    // Index mean is (n-1)/2; use centered sums for stability.
    const double kbar = 0.5 * (n - 1.0);
    double ybar = 0.0;
    for (double v : values) ybar += v;
    ybar /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        const double dk = static_cast<double>(k) - kbar;
        sxy += dk * (values[k] - ybar);
        sxx += dk * dk;
    }
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = ybar - fit.slope * kbar;
    return fit;
}

std::vector<double> linear_detrend(std::span<const double> values) {
    const LinearFit fit = linear_fit(values);
    std::vector<double> out(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
        out[k] = values[k] - (fit.slope * static_cast<double>(k) + fit.intercept);
    }
    return out;
}

double phase_differential(double phi_a, double phi_b) {
    if (!std::isfinite(phi_a) || !std::isfinite(phi_b)) {
        throw std::invalid_argument("phase_differential: non-finite input");
    }
    return wrap_angle(phi_a - phi_b);
}

double doppler_shift(double phi_prev, double phi_cur, double dt_seconds) {
    if (!(dt_seconds > 0.0)) {
        throw std::invalid_argument("doppler_shift: dt must be positive, got " +
                                    std::to_string(dt_seconds));
    }
    return wrap_angle(phi_cur - phi_prev) / (2.0 * M_PI * dt_seconds);
}

FeatureTensor extract_features(std::span<const CsiFrame> frames, const WindowConfig& cfg) {
    if (frames.size() < 2) {
        throw std::invalid_argument("extract_features: need at least 2 frames, got " +
                                    std::to_string(frames.size()));
    }
    if (cfg.window < 2) throw std::invalid_argument("extract_features: window must be >= 2");
    const std::size_t n = frames.size();
    for (const auto& f : frames) validate_frame(f);
    for (std::size_t i = 1; i < n; ++i) {
        if (!(frames[i].timestamp > frames[i - 1].timestamp)) {
            throw std::invalid_argument("extract_features: timestamps not strictly increasing");
        }
    }

    FeatureTensor ft;
    ft.frames = n;
    ft.data.assign(n * FeatureTensor::frame_stride(), 0.0f);

    // Amplitudes for the whole stream, [frame][k*kRrus+r]; the window
    // statistics need the trailing history per cell.
    std::vector<std::vector<double>> amp(n);
    std::vector<std::vector<double>> phs(n);
    for (std::size_t i = 0; i < n; ++i) {
        amp[i] = amplitude(frames[i]);
        phs[i] = raw_phase(frames[i]);
    }

    std::vector<double> window;
    window.reserve(cfg.window);
    std::vector<double> lane(kSubcarriers);

    for (std::size_t i = 0; i < n; ++i) {
        const bool copy_from_next = (i == 0);  // frame 0 reuses frame 1's stats
        for (std::size_t k = 0; k < kSubcarriers; ++k) {
            for (std::size_t r = 0; r < kRrus; ++r) {
                ft.at(i, k, r, 0) = static_cast<float>(amp[i][k * kRrus + r]);
                if (!copy_from_next) {
                    const std::size_t begin = i + 1 >= cfg.window ? i + 1 - cfg.window : 0;
                    window.clear();
                    for (std::size_t j = begin; j <= i; ++j) window.push_back(amp[j][k * kRrus + r]);
                    const WindowStats st = window_stats(window, cfg.epsilon);
                    ft.at(i, k, r, 1) = static_cast<float>(st.nstd);
                    ft.at(i, k, r, 2) = static_cast<float>(st.mad);
                    ft.at(i, k, r, 3) = static_cast<float>(st.iqr);
                }
            }
        }

        // Sanitized phase: unwrap along the subcarrier axis per RRU, then
        // remove the linear (timing-offset) component.
        std::array<std::vector<double>, kRrus> sanitized;
        for (std::size_t r = 0; r < kRrus; ++r) {
            for (std::size_t k = 0; k < kSubcarriers; ++k) lane[k] = phs[i][k * kRrus + r];
            sanitized[r] = linear_detrend(unwrap(lane));
            for (std::size_t k = 0; k < kSubcarriers; ++k) {
                ft.at(i, k, r, 4) = static_cast<float>(sanitized[r][k]);
            }
        }
        for (std::size_t r = 0; r < kRrus; ++r) {
            const std::size_t r2 = (r + 1) % kRrus;
            for (std::size_t k = 0; k < kSubcarriers; ++k) {
                ft.at(i, k, r, 5) =
                    static_cast<float>(phase_differential(sanitized[r][k], sanitized[r2][k]));
            }
        }

        if (i > 0) {
            const double dt = frames[i].timestamp - frames[i - 1].timestamp;
            for (std::size_t k = 0; k < kSubcarriers; ++k) {
                for (std::size_t r = 0; r < kRrus; ++r) {
                    ft.at(i, k, r, 6) = static_cast<float>(
                        doppler_shift(phs[i - 1][k * kRrus + r], phs[i][k * kRrus + r], dt));
                }
            }
        }
    }

    // Frame 0 window statistics duplicate frame 1 (no history of its own).
    for (std::size_t k = 0; k < kSubcarriers; ++k) {
        for (std::size_t r = 0; r < kRrus; ++r) {
            for (std::size_t c = 1; c <= 3; ++c) ft.at(0, k, r, c) = ft.at(1, k, r, c);
        }
    }
    return ft;
}

}  // namespace midipose
