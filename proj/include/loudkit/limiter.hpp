#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loudkit/audio.hpp"
#include "loudkit/errors.hpp"

namespace loudkit {

struct LimiterParams {
    double threshold_db = 0.0;
    double attack_ms = 1.0;   // smoothing while gain falls
    double release_ms = 100.0; // smoothing while gain recovers
    std::optional<double> lookahead_ms; // defaults to attack_ms
    bool stereo_link = true;

    double effective_lookahead_ms() const { return lookahead_ms.value_or(attack_ms); }
};

/// Per-frame multiplier the limiter actually applied, time-aligned with
/// the (delay-compensated) output. Always in (0, 1].
struct GainTrace {
    std::vector<double> gain;
    LimiterParams params;
};

struct LimitResult {
    AudioClip output;
    GainTrace trace;
};

namespace detail {

inline void check_limiter_params(const LimiterParams& p) {
    if (!(p.release_ms > 0.0)) throw ConfigError("limiter release must be > 0 ms");
    if (p.attack_ms < 0.0) throw ConfigError("limiter attack must be >= 0 ms");
    if (p.effective_lookahead_ms() < p.attack_ms)
        throw ConfigError("limiter lookahead must be >= attack");
}

inline double one_pole_coeff(double tau_ms, double fs) {
    if (tau_ms <= 0.0) return 0.0;
    return std::exp(-1000.0 / (tau_ms * fs));
}

// Smoothed gain for one detector signal. The one-pole smoother tracks the
// target gain (attack coefficient when falling, release when rising); at
// emission the gain is additionally clamped to the instantaneous ceiling
// requirement of the sample leaving the delay line, which is what turns
// the exponential attack into a hard ceiling guarantee. The clamped value
// feeds back into the smoother state so output == trace * input holds
// exactly.
inline std::vector<double> smoothed_gain(std::span<const double> magnitude, double threshold_linear,
                                         std::size_t lookahead, double attack_coeff,
                                         double release_coeff) {
    const std::size_t frames = magnitude.size();
    std::vector<double> gain(frames);
    std::deque<std::size_t> window; // indices of a non-increasing running max
    double state = 1.0;
    for (std::size_t n = 0; n < frames + lookahead; ++n) {
        if (n < frames) {
            while (!window.empty() && magnitude[window.back()] <= magnitude[n]) window.pop_back();
            window.push_back(n);
        }
        if (!window.empty() && window.front() + lookahead < n) window.pop_front();
        const double envelope = window.empty() ? 0.0 : magnitude[window.front()];
        const double target = envelope > threshold_linear ? threshold_linear / envelope : 1.0;
        const double coeff = target < state ? attack_coeff : release_coeff;
        state = target + (state - target) * coeff;
        if (n >= lookahead) {
            const std::size_t out = n - lookahead;
            const double required =
                magnitude[out] > threshold_linear ? threshold_linear / magnitude[out] : 1.0;
            state = std::min(state, required);
            gain[out] = state;
        }
    }
    return gain;
}

} // namespace detail

/// Feed-forward lookahead limiter. The detector envelope is the running
/// maximum of the linked channel magnitude over the lookahead window;
/// output and gain trace are delay-compensated so they align with the
/// input sample-for-sample. Guarantees max |output| <= threshold and
/// bit-exact identity whenever the input peak sits below the threshold.
/// With stereo_link = false each channel gets its own detector and the
/// applied (shared) gain is the per-frame minimum across channels.
inline LimitResult limit(const AudioClip& clip, const LimiterParams& params) {
    validate(clip); // rejects NaN input
    detail::check_limiter_params(params);
    if (clip.n_channels() > 2)
        throw ArgumentError("limiter supports 1 or 2 channels, got " +
                            std::to_string(clip.n_channels()));

    const double fs = clip.sample_rate;
    const double threshold_linear = db_to_linear(params.threshold_db);
    const auto lookahead =
        static_cast<std::size_t>(std::lround(params.effective_lookahead_ms() * fs / 1000.0));
    const double attack_coeff = detail::one_pole_coeff(params.attack_ms, fs);
    const double release_coeff = detail::one_pole_coeff(params.release_ms, fs);
    const std::size_t frames = clip.n_frames();

    std::vector<double> gain;
    if (params.stereo_link || clip.n_channels() == 1) {
        std::vector<double> magnitude(frames);
        for (std::size_t n = 0; n < frames; ++n) {
            double m = 0.0;
            for (const auto& channel : clip.samples) m = std::max(m, std::abs(channel[n]));
            magnitude[n] = m;
        }
        gain = detail::smoothed_gain(magnitude, threshold_linear, lookahead, attack_coeff,
                                     release_coeff);
    } else {
        for (const auto& channel : clip.samples) {
            std::vector<double> magnitude(frames);
            for (std::size_t n = 0; n < frames; ++n) magnitude[n] = std::abs(channel[n]);
            auto g = detail::smoothed_gain(magnitude, threshold_linear, lookahead, attack_coeff,
                                           release_coeff);
            if (gain.empty()) {
                gain = std::move(g);
            } else {
                for (std::size_t n = 0; n < frames; ++n) gain[n] = std::min(gain[n], g[n]);
            }
        }
    }

    LimitResult result;
    result.output = AudioClip(clip.sample_rate, clip.n_channels(), frames);
    for (std::size_t c = 0; c < clip.n_channels(); ++c)
        for (std::size_t n = 0; n < frames; ++n)
            result.output.samples[c][n] = gain[n] * clip.samples[c][n];
    result.trace.gain = std::move(gain);
    result.trace.params = params;
    return result;
}

/// Maximum instantaneous gain reduction of a trace, in dB.
inline double max_reduction_db(const GainTrace& trace) {
    double lowest = 1.0;
    for (double g : trace.gain) lowest = std::min(lowest, g);
    return -linear_to_db(lowest);
}

/// Bisect the limiter threshold until the maximum gain reduction on the
/// clip lands inside [reduction_lo_db, reduction_hi_db]. The search
/// bracket is [peak - 24 dB, peak] intersected with [floor_db, 0 dBFS].
inline double find_threshold_for_reduction(const AudioClip& clip, double reduction_lo_db,
                                           double reduction_hi_db, LimiterParams params,
                                           double floor_db = -24.0) {
    if (!(reduction_lo_db < reduction_hi_db))
        throw ArgumentError("reduction range must satisfy lo < hi");
    const double clip_peak = peak(clip);
    if (clip_peak <= 0.0) throw SearchError("clip is silent; no threshold can produce reduction");
    const double peak_dbfs = linear_to_db(clip_peak);

    double lo = std::max(peak_dbfs - 24.0, floor_db);
    double hi = std::min(peak_dbfs, 0.0);
    if (!(lo < hi))
        throw SearchError("threshold floor " + std::to_string(floor_db) +
                          " dBFS is above the clip peak " + std::to_string(peak_dbfs) + " dBFS");

    const auto reduction_at = [&](double threshold_db) {
        params.threshold_db = threshold_db;
        return max_reduction_db(limit(clip, params).trace);
    };

    constexpr double kTolDb = 0.25;
    constexpr int kMaxIterations = 40;
    double reduction_hi_end = reduction_at(lo); // most reduction, at the lowest threshold
    double reduction_lo_end = reduction_at(hi);
    if (reduction_hi_end < reduction_lo_db - kTolDb || reduction_lo_end > reduction_hi_db + kTolDb)
        throw SearchError("requested reduction [" + std::to_string(reduction_lo_db) + ", " +
                          std::to_string(reduction_hi_db) + "] dB unattainable; achievable bracket [" +
                          std::to_string(reduction_lo_end) + ", " + std::to_string(reduction_hi_end) +
                          "] dB");
    if (reduction_hi_end >= reduction_lo_db && reduction_hi_end <= reduction_hi_db) return lo;
    if (reduction_lo_end >= reduction_lo_db && reduction_lo_end <= reduction_hi_db) return hi;

    double best_threshold = lo;
    double best_distance = std::numeric_limits<double>::infinity();
    for (int i = 0; i < kMaxIterations && hi - lo > 1e-4; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double r = reduction_at(mid);
        if (r >= reduction_lo_db && r <= reduction_hi_db) return mid;
        const double distance = r < reduction_lo_db ? reduction_lo_db - r : r - reduction_hi_db;
        if (distance < best_distance) {
            best_distance = distance;
            best_threshold = mid;
        }
        if (r < reduction_lo_db)
            hi = mid; // too little reduction: lower the threshold
        else
            lo = mid;
    }
    if (best_distance <= kTolDb) return best_threshold;
    throw SearchError("threshold bisection did not reach the requested band (closest miss " +
                      std::to_string(best_distance) + " dB)");
}

/// Divide-based per-frame ratio of limited over original, on the linked
/// channel magnitude. Frames where the original magnitude is below eps
/// get ratio 1. The GainTrace result is clamped into (0, 1]; use
/// sample_ratio_raw when the limited signal includes makeup gain.
inline std::vector<double> sample_ratio_raw(const AudioClip& original, const AudioClip& limited,
                                            double eps = 1e-8) {
    require_same_shape(original, limited, "sample_ratio");
    const std::size_t frames = original.n_frames();
    std::vector<double> ratio(frames);
    for (std::size_t n = 0; n < frames; ++n) {
        double om = 0.0, lm = 0.0;
        for (std::size_t c = 0; c < original.n_channels(); ++c) {
            om = std::max(om, std::abs(original.samples[c][n]));
            lm = std::max(lm, std::abs(limited.samples[c][n]));
        }
        ratio[n] = om < eps ? 1.0 : lm / om;
    }
    return ratio;
}

inline GainTrace sample_ratio(const AudioClip& original, const AudioClip& limited,
                              double eps = 1e-8) {
    GainTrace trace;
    trace.gain = sample_ratio_raw(original, limited, eps);
    for (double& g : trace.gain) g = std::clamp(g, 1e-15, 1.0);
    return trace;
}

/// Multiply every channel by a shared per-frame gain sequence.
inline AudioClip apply_multiplier(const AudioClip& clip, std::span<const double> multiplier) {
    if (multiplier.size() != clip.n_frames())
        throw ConsistencyError("multiplier length " + std::to_string(multiplier.size()) +
                               " does not match clip frames " + std::to_string(clip.n_frames()));
    AudioClip out = clip;
    for (auto& channel : out.samples)
        for (std::size_t n = 0; n < channel.size(); ++n) channel[n] *= multiplier[n];
    return out;
}

inline AudioClip apply_trace(const AudioClip& clip, const GainTrace& trace) {
    return apply_multiplier(clip, trace.gain);
}

} // namespace loudkit
