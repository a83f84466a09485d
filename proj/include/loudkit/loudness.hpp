#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "loudkit/audio.hpp"
#include "loudkit/errors.hpp"

namespace loudkit {

/// Second-order section with a0 normalized to 1.
struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;
};

/// Two-stage K-weighting pre-filter: high shelf followed by the RLB
/// high pass.
struct KWeighting {
    Biquad stage1;
    Biquad stage2;
    int sample_rate = 0;
};

inline constexpr double kLoudnessOffsetDb = -0.691;

namespace detail {

// Analog prototype of the K-weighting curve, parametrized so that the
// bilinear redesign at 48 kHz lands on the published coefficient table.
inline Biquad k_shelf(double fs) {
    constexpr double f0 = 1681.9744509555319;
    constexpr double gain_db = 3.99984385397;
    constexpr double q = 0.7071752369554193;
    const double k = std::tan(std::numbers::pi * f0 / fs);
    const double vh = std::pow(10.0, gain_db / 20.0);
    const double vb = std::pow(vh, 0.499666774155);
    const double a0 = 1.0 + k / q + k * k;
    Biquad s;
    s.b0 = (vh + vb * k / q + k * k) / a0;
    s.b1 = 2.0 * (k * k - vh) / a0;
    s.b2 = (vh - vb * k / q + k * k) / a0;
    s.a1 = 2.0 * (k * k - 1.0) / a0;
    s.a2 = (1.0 - k / q + k * k) / a0;
    return s;
}

inline Biquad k_highpass(double fs) {
    constexpr double f0 = 38.13547087602444;
    constexpr double q = 0.5003270373238773;
    const double k = std::tan(std::numbers::pi * f0 / fs);
    const double a0 = 1.0 + k / q + k * k;
    Biquad s;
    s.b0 = 1.0;
    s.b1 = -2.0;
    s.b2 = 1.0;
    s.a1 = 2.0 * (k * k - 1.0) / a0;
    s.a2 = (1.0 - k / q + k * k) / a0;
    return s;
}

} // namespace detail

inline bool biquad_is_stable(const Biquad& s) {
    // poles inside the unit circle: |a2| < 1 and |a1| < 1 + a2
    return std::abs(s.a2) < 1.0 && std::abs(s.a1) < 1.0 + s.a2;
}

inline double biquad_gain_db(const Biquad& s, double freq, double fs) {
    const double w = 2.0 * std::numbers::pi * freq / fs;
    const std::complex<double> z_inv = std::polar(1.0, -w);
    const std::complex<double> num = s.b0 + s.b1 * z_inv + s.b2 * z_inv * z_inv;
    const std::complex<double> den = 1.0 + s.a1 * z_inv + s.a2 * z_inv * z_inv;
    return 20.0 * std::log10(std::abs(num / den));
}

inline KWeighting k_weight_coeffs(int sample_rate) {
    if (sample_rate != 44100 && sample_rate != 48000)
        throw ConfigError("unsupported sample rate for K-weighting: " + std::to_string(sample_rate));
    KWeighting kw;
    kw.sample_rate = sample_rate;
    kw.stage1 = detail::k_shelf(static_cast<double>(sample_rate));
    kw.stage2 = detail::k_highpass(static_cast<double>(sample_rate));
    return kw;
}

/// Run one channel through both stages (direct form II transposed,
/// zero initial state).
inline std::vector<double> k_weight_channel(std::span<const double> x, const KWeighting& kw) {
    std::vector<double> y(x.size());
    double s1 = 0.0, s2 = 0.0, t1 = 0.0, t2 = 0.0;
    const Biquad& f = kw.stage1;
    const Biquad& g = kw.stage2;
    for (std::size_t n = 0; n < x.size(); ++n) {
        const double u = f.b0 * x[n] + s1;
        s1 = f.b1 * x[n] - f.a1 * u + s2;
        s2 = f.b2 * x[n] - f.a2 * u;
        const double v = g.b0 * u + t1;
        t1 = g.b1 * u - g.a1 * v + t2;
        t2 = g.b2 * u - g.a2 * v;
        y[n] = v;
    }
    return y;
}

struct GatingConfig {
    double block_length_s = 0.400;
    double overlap = 0.75;
    double absolute_gate_lufs = -70.0;
    double relative_gate_lu = -10.0;
    std::vector<double> channel_weights; // empty = 1.0 per channel
};

struct LoudnessReading {
    double lufs = 0.0;
    std::size_t n_blocks_total = 0;
    std::size_t n_blocks_gated = 0;
};

/// Integrated loudness: K-weight each channel, mean-square per 400 ms
/// block (75 % overlap), -0.691 + 10*log10 of the weighted channel sum,
/// absolute gate at -70 LUFS then relative gate 10 LU under the
/// first-stage mean, energy average of the survivors.
inline LoudnessReading integrated_lufs(const AudioClip& clip, const GatingConfig& gating = {}) {
    validate(clip);
    if (clip.n_channels() > 2)
        throw ArgumentError("integrated loudness supports 1 or 2 channels, got " +
                            std::to_string(clip.n_channels()));
    if (gating.block_length_s <= 0.0 || gating.overlap < 0.0 || gating.overlap >= 1.0)
        throw ConfigError("invalid gating config (block length / overlap)");
    if (gating.relative_gate_lu >= 0.0) throw ConfigError("relative gate must be negative");

    const double fs = clip.sample_rate;
    const auto block = static_cast<std::size_t>(std::lround(gating.block_length_s * fs));
    const auto hop = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(gating.block_length_s * (1.0 - gating.overlap) * fs)));
    const std::size_t frames = clip.n_frames();
    if (frames < block)
        throw InsufficientDurationError("clip shorter than one gating block (" +
                                        std::to_string(gating.block_length_s) + " s)");

    const KWeighting kw = k_weight_coeffs(clip.sample_rate);
    std::vector<std::vector<double>> squared(clip.n_channels());
    for (std::size_t c = 0; c < clip.n_channels(); ++c) {
        auto y = k_weight_channel(clip.samples[c], kw);
        for (double& v : y) v *= v;
        squared[c] = std::move(y);
    }

    std::vector<double> weights = gating.channel_weights;
    if (weights.empty()) weights.assign(clip.n_channels(), 1.0);
    if (weights.size() != clip.n_channels())
        throw ConfigError("channel weight count does not match channel count");

    const std::size_t n_blocks = (frames - block) / hop + 1;
    std::vector<double> block_power(n_blocks);
    for (std::size_t j = 0; j < n_blocks; ++j) {
        const std::size_t start = j * hop;
        double p = 0.0;
        for (std::size_t c = 0; c < clip.n_channels(); ++c) {
            double acc = 0.0;
            const double* sq = squared[c].data() + start;
            for (std::size_t n = 0; n < block; ++n) acc += sq[n];
            p += weights[c] * (acc / static_cast<double>(block));
        }
        block_power[j] = p;
    }

    const auto block_loudness = [](double power) {
        return power > 0.0 ? kLoudnessOffsetDb + 10.0 * std::log10(power)
                           : -std::numeric_limits<double>::infinity();
    };

    double abs_sum = 0.0;
    std::size_t abs_count = 0;
    for (double p : block_power) {
        if (block_loudness(p) > gating.absolute_gate_lufs) {
            abs_sum += p;
            ++abs_count;
        }
    }
    if (abs_count == 0)
        throw SilenceError("all gating blocks below the absolute gate; loudness undefined");

    const double relative_gate =
        kLoudnessOffsetDb + 10.0 * std::log10(abs_sum / static_cast<double>(abs_count)) +
        gating.relative_gate_lu;

    double gated_sum = 0.0;
    std::size_t gated_count = 0;
    for (double p : block_power) {
        const double l = block_loudness(p);
        if (l > gating.absolute_gate_lufs && l > relative_gate) {
            gated_sum += p;
            ++gated_count;
        }
    }
    if (gated_count == 0)
        throw SilenceError("all gating blocks below the relative gate; loudness undefined");

    LoudnessReading reading;
    reading.lufs = kLoudnessOffsetDb + 10.0 * std::log10(gated_sum / static_cast<double>(gated_count));
    reading.n_blocks_total = n_blocks;
    reading.n_blocks_gated = gated_count;
    return reading;
}

/// Gain in dB that would move the clip to the target loudness. Pure
/// measurement, nothing is modified.
inline double gain_db_to_target(const AudioClip& clip, double target_lufs,
                                const GatingConfig& gating = {}) {
    return target_lufs - integrated_lufs(clip, gating).lufs;
}

inline AudioClip apply_gain_db(const AudioClip& clip, double gain_db) {
    if (!std::isfinite(gain_db)) throw ArgumentError("gain must be finite");
    const double scale = db_to_linear(gain_db);
    AudioClip out = clip;
    for (auto& channel : out.samples)
        for (double& v : channel) v *= scale;
    return out;
}

struct LoudnessStats {
    double min = 0.0;
    double max = 0.0;
    double median = 0.0;
    double mean = 0.0;
    double std = 0.0; // sample standard deviation (n-1)
    std::size_t n_tracks = 0;
};

inline LoudnessStats loudness_stats(std::span<const double> readings) {
    if (readings.empty()) throw ArgumentError("loudness_stats: empty input");
    std::vector<double> sorted(readings.begin(), readings.end());
    std::sort(sorted.begin(), sorted.end());
    LoudnessStats s;
    s.n_tracks = sorted.size();
    s.min = sorted.front();
    s.max = sorted.back();
    const std::size_t n = sorted.size();
    s.median = (n % 2 == 1) ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    double sum = 0.0;
    for (double v : sorted) sum += v;
    s.mean = sum / static_cast<double>(n);
    if (n > 1) {
        double sq = 0.0;
        for (double v : sorted) sq += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(sq / static_cast<double>(n - 1));
    }
    return s;
}

} // namespace loudkit
