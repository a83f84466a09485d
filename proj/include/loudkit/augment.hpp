#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "loudkit/audio.hpp"
#include "loudkit/errors.hpp"
#include "loudkit/limiter.hpp"
#include "loudkit/log.hpp"
#include "loudkit/loudness.hpp"
#include "loudkit/rng.hpp"
#include "loudkit/stems.hpp"

namespace loudkit {

struct TargetLoudnessDist {
    enum class Kind { normal, uniform, fixed };
    Kind kind = Kind::normal;
    double mu = 0.0;
    double sigma = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    double value = 0.0;

    static TargetLoudnessDist normal(double mu, double sigma) {
        TargetLoudnessDist d;
        d.kind = Kind::normal;
        d.mu = mu;
        d.sigma = sigma;
        return d;
    }
    static TargetLoudnessDist uniform(double lo, double hi) {
        TargetLoudnessDist d;
        d.kind = Kind::uniform;
        d.lo = lo;
        d.hi = hi;
        return d;
    }
    static TargetLoudnessDist fixed(double value) {
        TargetLoudnessDist d;
        d.kind = Kind::fixed;
        d.value = value;
        return d;
    }

    double sample(Rng& rng) const {
        switch (kind) {
        case Kind::normal:
            if (!(sigma > 0.0)) throw ConfigError("normal target distribution needs sigma > 0");
            return rng.normal(mu, sigma);
        case Kind::uniform:
            if (!(lo < hi)) throw ConfigError("uniform target distribution needs lo < hi");
            return rng.uniform(lo, hi);
        case Kind::fixed:
            return value;
        }
        throw ConfigError("invalid target distribution kind");
    }
};

// Target loudness presets matching the measured statistics of the loud
// and extremely-loud evaluation sets.
inline TargetLoudnessDist target_dist_L() { return TargetLoudnessDist::normal(-10.89, 1.19); }
inline TargetLoudnessDist target_dist_XL() { return TargetLoudnessDist::normal(-8.61, 1.17); }

enum class Strategy { baseline, linear_gain, limitaug, loudnorm, limitaug_loudnorm };

inline const char* to_string(Strategy s) {
    switch (s) {
    case Strategy::baseline: return "baseline";
    case Strategy::linear_gain: return "linear-gain";
    case Strategy::limitaug: return "limitaug";
    case Strategy::loudnorm: return "loudnorm";
    case Strategy::limitaug_loudnorm: return "limitaug-loudnorm";
    }
    return "?";
}

inline Strategy strategy_from_string(const std::string& s) {
    if (s == "baseline") return Strategy::baseline;
    if (s == "linear-gain" || s == "linear_gain") return Strategy::linear_gain;
    if (s == "limitaug") return Strategy::limitaug;
    if (s == "loudnorm") return Strategy::loudnorm;
    if (s == "limitaug-loudnorm" || s == "limitaug_loudnorm") return Strategy::limitaug_loudnorm;
    throw ConfigError("unknown strategy '" + s + "'");
}

struct LimitAugConfig {
    TargetLoudnessDist target_dist = target_dist_L();
    double release_ms_lo = 30.0;
    double release_ms_hi = 200.0;
    double threshold_db = 0.0;
    double attack_ms = 1.0;
    std::optional<double> post_norm_lufs; // strategy (4) normalization target
    Strategy strategy = Strategy::limitaug;
};

inline constexpr double kDefaultLoudnormTarget = -14.0;

namespace detail {

inline void check_limitaug_config(const LimitAugConfig& config) {
    if (!(config.release_ms_lo > 0.0) || !(config.release_ms_hi < 10000.0) ||
        config.release_ms_lo > config.release_ms_hi)
        throw ConfigError("release range must lie within (0, 10000) ms with lo <= hi");
    if (config.threshold_db > 0.0) throw ConfigError("limiter threshold must be <= 0 dBFS");
}

} // namespace detail

struct StemDraw {
    std::string track_id;
    double offset_s = 0.0;
    double gain_db = 0.0;
    bool channel_swap = false;
};

struct SegmentSpec {
    double duration_s = 0.0;
    std::array<StemDraw, 4> stems; // vocals, bass, drums, other
    std::uint64_t rng_seed = 0;
};

struct SegmentOptions {
    double gain_db_lo = -6.0;
    double gain_db_hi = 6.0;
    double swap_probability = 0.5;
};

/// Library index used by the segment sampler: per-track frame counts so
/// draws only touch the WAV headers, with payload reads limited to the
/// sampled excerpt.
struct LibraryIndex {
    struct Entry {
        TrackManifest manifest;
        std::size_t n_frames = 0;
    };
    std::vector<Entry> tracks;
    int sample_rate = 0;
    std::size_t n_channels = 0;

    static LibraryIndex build(const std::vector<TrackManifest>& manifests) {
        if (manifests.empty()) throw ArgumentError("empty track library");
        LibraryIndex index;
        for (const auto& m : manifests) {
            Entry entry;
            entry.manifest = m;
            bool first = true;
            for (const char* name : kStemNames) {
                const WavInfo info = wav_info(m.stem_paths.at(name));
                if (first) {
                    entry.n_frames = info.n_frames;
                    if (index.tracks.empty() && index.sample_rate == 0) {
                        index.sample_rate = info.sample_rate;
                        index.n_channels = info.n_channels;
                    }
                    first = false;
                }
                if (info.sample_rate != index.sample_rate || info.n_channels != index.n_channels ||
                    info.n_frames != entry.n_frames)
                    throw ConsistencyError("track '" + m.track_id +
                                           "' disagrees with the library in rate/channels/length");
            }
            index.tracks.push_back(std::move(entry));
        }
        return index;
    }
};

struct SegmentSample {
    StemSet stems;
    SegmentSpec spec;
};

/// Draw one training segment: each stem independently from a random
/// eligible track and offset, with random gain and channel swap, mixture
/// as the exact stem sum. Draw order is fixed (stem order, then track /
/// offset / gain / swap) so a seed fully determines the result.
inline SegmentSample sample_segment(const LibraryIndex& library, Rng& rng, double duration_s,
                                    const SegmentOptions& options = {}) {
    if (library.tracks.empty()) throw ArgumentError("empty track library");
    if (!(duration_s > 0.0)) throw ArgumentError("segment duration must be positive");
    const auto duration_frames =
        static_cast<std::size_t>(std::lround(duration_s * library.sample_rate));

    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < library.tracks.size(); ++i) {
        if (library.tracks[i].n_frames >= duration_frames)
            eligible.push_back(i);
        else
            log_debug("segment sampling skips short track '" + library.tracks[i].manifest.track_id +
                      "'");
    }
    if (eligible.empty())
        throw ArgumentError("no library track is at least " + std::to_string(duration_s) +
                            " s long");

    SegmentSample sample;
    sample.spec.duration_s = duration_s;
    for (std::size_t s = 0; s < kStemNames.size(); ++s) {
        const char* name = kStemNames[s];
        const auto& entry = library.tracks[eligible[rng.uniform_index(eligible.size())]];
        const std::size_t max_offset = entry.n_frames - duration_frames;
        const std::size_t offset = max_offset > 0 ? rng.uniform_index(max_offset + 1) : 0;
        const double gain_db = rng.uniform(options.gain_db_lo, options.gain_db_hi);
        const bool swap = rng.bernoulli(options.swap_probability);

        AudioClip clip = read_wav_segment(entry.manifest.stem_paths.at(name), offset, duration_frames);
        const double scale = db_to_linear(gain_db);
        for (auto& channel : clip.samples)
            for (double& v : channel) v *= scale;
        if (swap && clip.n_channels() == 2) std::swap(clip.samples[0], clip.samples[1]);

        sample.spec.stems[s] = {entry.manifest.track_id,
                                static_cast<double>(offset) / library.sample_rate, gain_db, swap};
        sample.stems.stems[name] = std::move(clip);
    }
    sample.stems.mixture = sum_stems(sample.stems.stems);
    sample.stems.additive = true;
    return sample;
}

struct LimitAugResult {
    AudioClip mixture;
    AudioClip target;
    double achieved_lufs = 0.0;
    double drawn_target_lufs = 0.0;
    double gain_db = 0.0;
    double release_ms = 0.0;
    std::vector<double> multiplier; // total per-frame factor applied to the original mixture
};

/// LimitAug: measure the mixture, gain it toward a drawn target loudness,
/// limit at the configured threshold, and propagate the exact per-frame
/// multiplier (gain x limiter trace) onto the target stem. Optional final
/// normalization moves both outputs to post_norm_lufs.
inline LimitAugResult limitaug(const StemSet& stems, const std::string& target_stem,
                               const LimitAugConfig& config, Rng& rng) {
    detail::check_limitaug_config(config);
    const auto stem_it = stems.stems.find(target_stem);
    if (stem_it == stems.stems.end())
        throw ArgumentError("unknown target stem '" + target_stem + "'");

    LimitAugResult result;
    const double input_lufs = integrated_lufs(stems.mixture).lufs;
    result.drawn_target_lufs = config.target_dist.sample(rng);
    result.release_ms = rng.uniform(config.release_ms_lo, config.release_ms_hi);
    result.gain_db = result.drawn_target_lufs - input_lufs;

    LimiterParams params;
    params.threshold_db = config.threshold_db;
    params.attack_ms = config.attack_ms;
    params.release_ms = result.release_ms;
    LimitResult limited = limit(apply_gain_db(stems.mixture, result.gain_db), params);

    const double gain_linear = db_to_linear(result.gain_db);
    result.multiplier = std::move(limited.trace.gain);
    for (double& m : result.multiplier) m *= gain_linear;

    result.mixture = std::move(limited.output);
    result.target = apply_multiplier(stem_it->second, result.multiplier);

    if (config.post_norm_lufs) {
        const double post_gain = *config.post_norm_lufs - integrated_lufs(result.mixture).lufs;
        result.mixture = apply_gain_db(result.mixture, post_gain);
        result.target = apply_gain_db(result.target, post_gain);
        const double post_linear = db_to_linear(post_gain);
        for (double& m : result.multiplier) m *= post_linear;
    }
    result.achieved_lufs = integrated_lufs(result.mixture).lufs;
    return result;
}

/// Training-example construction strategies:
///   baseline           passthrough
///   linear-gain        gain toward the drawn target, no limiter
///   limitaug           gain + limiter, trace propagated to the target
///   loudnorm           linear normalization to a fixed reference level
///   limitaug-loudnorm  limitaug followed by that normalization
inline LimitAugResult build_training_example(const StemSet& stems, const std::string& target_stem,
                                             const LimitAugConfig& config, Rng& rng) {
    const auto stem_it = stems.stems.find(target_stem);
    if (stem_it == stems.stems.end())
        throw ArgumentError("unknown target stem '" + target_stem + "'");

    const auto scaled_passthrough = [&](double gain_db) {
        LimitAugResult r;
        r.gain_db = gain_db;
        r.mixture = apply_gain_db(stems.mixture, gain_db);
        r.target = apply_gain_db(stem_it->second, gain_db);
        r.multiplier.assign(stems.mixture.n_frames(), db_to_linear(gain_db));
        r.achieved_lufs = integrated_lufs(r.mixture).lufs;
        return r;
    };

    switch (config.strategy) {
    case Strategy::baseline:
        return scaled_passthrough(0.0);
    case Strategy::linear_gain: {
        const double input_lufs = integrated_lufs(stems.mixture).lufs;
        const double target = config.target_dist.sample(rng);
        auto r = scaled_passthrough(target - input_lufs);
        r.drawn_target_lufs = target;
        return r;
    }
    case Strategy::limitaug: {
        LimitAugConfig c = config;
        c.post_norm_lufs.reset();
        return limitaug(stems, target_stem, c, rng);
    }
    case Strategy::loudnorm: {
        const double target = config.post_norm_lufs.value_or(kDefaultLoudnormTarget);
        auto r = scaled_passthrough(target - integrated_lufs(stems.mixture).lufs);
        r.drawn_target_lufs = target;
        return r;
    }
    case Strategy::limitaug_loudnorm: {
        LimitAugConfig c = config;
        c.post_norm_lufs = config.post_norm_lufs.value_or(kDefaultLoudnormTarget);
        return limitaug(stems, target_stem, c, rng);
    }
    }
    throw ConfigError("invalid strategy");
}

} // namespace loudkit
