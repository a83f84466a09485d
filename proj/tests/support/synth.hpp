#pragma once

// Deterministic synthetic signals for tests: sines, noise, and
// program-like material with a realistic crest factor (sustained tones
// plus percussive transients) so limiter and loudness behavior resembles
// real mixes.

#include <cmath>
#include <numbers>

#include "loudkit/audio.hpp"
#include "loudkit/rng.hpp"
#include "loudkit/stems.hpp"

namespace loudkit::testsupport {

inline AudioClip make_sine(int fs, double seconds, double freq, double peak_linear,
                           std::size_t channels = 2) {
    const auto frames = static_cast<std::size_t>(std::lround(seconds * fs));
    AudioClip clip(fs, channels, frames);
    for (std::size_t n = 0; n < frames; ++n) {
        const double v = peak_linear * std::sin(2.0 * std::numbers::pi * freq * n / fs);
        for (auto& channel : clip.samples) channel[n] = v;
    }
    return clip;
}

inline AudioClip make_noise(Rng& rng, int fs, double seconds, std::size_t channels = 2,
                            double amplitude = 0.25) {
    const auto frames = static_cast<std::size_t>(std::lround(seconds * fs));
    AudioClip clip(fs, channels, frames);
    for (auto& channel : clip.samples)
        for (double& v : channel) v = amplitude * rng.normal(0.0, 1.0);
    return clip;
}

inline void scale_to_peak_db(AudioClip& clip, double target_peak_db) {
    const double p = peak(clip);
    if (p <= 0.0) return;
    const double scale = db_to_linear(target_peak_db) / p;
    for (auto& channel : clip.samples)
        for (double& v : channel) v *= scale;
}

/// Program-like clip: low tone + amplitude-modulated mid tone + gentle
/// noise bed + periodic drum-style transients, normalized to the
/// requested peak. Every 400 ms block carries energy, so gating never
/// drops blocks even after a -20 dB trim.
inline AudioClip make_program_clip(Rng& rng, int fs, double seconds, double peak_dbfs = -1.0,
                                   std::size_t channels = 2) {
    const auto frames = static_cast<std::size_t>(std::lround(seconds * fs));
    AudioClip clip(fs, channels, frames);
    const double bass_freq = rng.uniform(50.0, 110.0);
    const double mid_freq = rng.uniform(300.0, 1200.0);
    const double am_rate = rng.uniform(0.5, 3.0);
    const double hit_period_s = rng.uniform(0.30, 0.55);
    const auto hit_period = static_cast<std::size_t>(hit_period_s * fs);
    const double hit_decay = rng.uniform(80.0, 200.0); // per second

    for (std::size_t c = 0; c < channels; ++c) {
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (std::size_t n = 0; n < frames; ++n) {
            const double t = static_cast<double>(n) / fs;
            const double am = 0.6 + 0.4 * std::sin(2.0 * std::numbers::pi * am_rate * t);
            double v = 0.30 * std::sin(2.0 * std::numbers::pi * bass_freq * t + phase);
            v += 0.22 * am * std::sin(2.0 * std::numbers::pi * mid_freq * t);
            v += 0.05 * rng.normal(0.0, 1.0);
            const std::size_t since_hit = n % hit_period;
            const double hit_t = static_cast<double>(since_hit) / fs;
            v += 1.1 * std::exp(-hit_decay * hit_t) *
                 std::sin(2.0 * std::numbers::pi * 180.0 * hit_t);
            clip.samples[c][n] = v;
        }
    }
    scale_to_peak_db(clip, peak_dbfs);
    return clip;
}

/// Four synthetic stems whose float sum is the mixture (bit-exact).
inline StemSet make_toy_stems(Rng& rng, int fs, double seconds, std::size_t channels = 2) {
    const auto frames = static_cast<std::size_t>(std::lround(seconds * fs));
    StemSet set;
    const double vocal_freq = rng.uniform(200.0, 500.0);
    const double bass_freq = rng.uniform(40.0, 90.0);
    const auto hit_period = static_cast<std::size_t>(rng.uniform(0.25, 0.5) * fs);

    AudioClip vocals(fs, channels, frames), bass(fs, channels, frames),
        drums(fs, channels, frames), other(fs, channels, frames);
    for (std::size_t c = 0; c < channels; ++c) {
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (std::size_t n = 0; n < frames; ++n) {
            const double t = static_cast<double>(n) / fs;
            const double vib = 1.0 + 0.01 * std::sin(2.0 * std::numbers::pi * 5.0 * t);
            vocals.samples[c][n] =
                0.25 * (0.7 + 0.3 * std::sin(2.0 * std::numbers::pi * 1.3 * t)) *
                std::sin(2.0 * std::numbers::pi * vocal_freq * vib * t + phase);
            bass.samples[c][n] = 0.30 * std::sin(2.0 * std::numbers::pi * bass_freq * t);
            const double hit_t = static_cast<double>(n % hit_period) / fs;
            drums.samples[c][n] = 0.9 * std::exp(-120.0 * hit_t) *
                                  std::sin(2.0 * std::numbers::pi * 170.0 * hit_t);
            other.samples[c][n] = 0.08 * rng.normal(0.0, 1.0);
        }
    }
    set.stems["vocals"] = std::move(vocals);
    set.stems["bass"] = std::move(bass);
    set.stems["drums"] = std::move(drums);
    set.stems["other"] = std::move(other);
    set.mixture = sum_stems(set.stems);
    set.additive = true;
    return set;
}

} // namespace loudkit::testsupport
