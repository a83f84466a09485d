#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "loudkit/errors.hpp"

namespace loudkit {

/// Planar multichannel sample buffer. Samples are 64-bit floats with a
/// nominal range of [-1, 1]; values outside that range are legal in memory
/// (they only saturate when written to an integer file format).
struct AudioClip {
    std::vector<std::vector<double>> samples; // [channel][frame]
    int sample_rate = 0;

    AudioClip() = default;
    AudioClip(int rate, std::size_t channels, std::size_t frames)
        : samples(channels, std::vector<double>(frames, 0.0)), sample_rate(rate) {}

    std::size_t n_channels() const { return samples.size(); }
    std::size_t n_frames() const { return samples.empty() ? 0 : samples.front().size(); }
    double duration_s() const {
        return sample_rate > 0 ? static_cast<double>(n_frames()) / sample_rate : 0.0;
    }

    bool same_shape(const AudioClip& other) const {
        return sample_rate == other.sample_rate && n_channels() == other.n_channels() &&
               n_frames() == other.n_frames();
    }
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 20.0); }

inline double linear_to_db(double linear) { return 20.0 * std::log10(linear); }

/// Largest absolute sample value across all channels.
inline double peak(const AudioClip& clip) {
    double p = 0.0;
    for (const auto& channel : clip.samples)
        for (double v : channel) p = std::max(p, std::abs(v));
    return p;
}

inline double peak_db(const AudioClip& clip) { return linear_to_db(peak(clip)); }

/// Enforce the AudioClip invariants: positive rate, at least one channel,
/// equal channel lengths and finite sample values.
inline void validate(const AudioClip& clip) {
    if (clip.sample_rate <= 0) throw ConsistencyError("audio clip has non-positive sample rate");
    if (clip.samples.empty()) throw ConsistencyError("audio clip has no channels");
    const std::size_t frames = clip.samples.front().size();
    for (std::size_t c = 0; c < clip.samples.size(); ++c) {
        if (clip.samples[c].size() != frames)
            throw ConsistencyError("audio clip channels differ in length");
        for (double v : clip.samples[c])
            if (!std::isfinite(v)) throw DataError("audio clip contains non-finite samples");
    }
}

inline void require_same_shape(const AudioClip& a, const AudioClip& b, const char* what) {
    if (!a.same_shape(b))
        throw ConsistencyError(std::string(what) + ": clips differ in rate, channels or length");
}

} // namespace loudkit
