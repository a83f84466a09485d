#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "loudkit/audio.hpp"
#include "loudkit/errors.hpp"
#include "loudkit/limiter.hpp"
#include "loudkit/log.hpp"
#include "loudkit/loudness.hpp"
#include "loudkit/parallel.hpp"
#include "loudkit/stems.hpp"
#include "loudkit/wav.hpp"

namespace loudkit {

/// Recipe for one limited evaluation set: how much gain reduction the
/// loud passages should receive, the limiter character, and makeup gain
/// that lifts the limited peak back to the ceiling.
struct DatasetRecipe {
    std::string name;
    double reduction_lo_db = 3.0;
    double reduction_hi_db = 4.0;
    LimiterParams limiter_template{.threshold_db = 0.0, .attack_ms = 1.0, .release_ms = 100.0};
    double ceiling_db = 0.0; // makeup target peak
};

inline DatasetRecipe recipe_L() { return {.name = "L", .reduction_lo_db = 3.0, .reduction_hi_db = 4.0}; }
inline DatasetRecipe recipe_XL() { return {.name = "XL", .reduction_lo_db = 6.0, .reduction_hi_db = 7.0}; }

struct BuiltTrack {
    StemSet stems;
    double threshold_db = 0.0;
    double max_reduction_db = 0.0;
    double makeup_gain_db = 0.0;
    double lufs_in = 0.0;
    double lufs_out = 0.0;
};

/// Limit one track and propagate the exact per-frame multiplier (limiter
/// trace times makeup gain) onto every stem, so the output is additive by
/// construction.
inline BuiltTrack build_limited_track(const StemSet& track, const DatasetRecipe& recipe) {
    if (!track.additive)
        throw ConsistencyError("track mixture is not the stem sum; reload with use_stem_sum");
    if (!(recipe.reduction_lo_db < recipe.reduction_hi_db))
        throw ConfigError("invalid recipe reduction range");

    BuiltTrack built;
    built.lufs_in = integrated_lufs(track.mixture).lufs;
    built.threshold_db = find_threshold_for_reduction(track.mixture, recipe.reduction_lo_db,
                                                      recipe.reduction_hi_db, recipe.limiter_template);
    LimiterParams params = recipe.limiter_template;
    params.threshold_db = built.threshold_db;
    LimitResult limited = limit(track.mixture, params);
    built.max_reduction_db = max_reduction_db(limited.trace);

    const double limited_peak = peak(limited.output);
    if (limited_peak <= 0.0) throw ConsistencyError("limited mixture is silent");
    const double makeup = db_to_linear(recipe.ceiling_db) / limited_peak;
    built.makeup_gain_db = linear_to_db(makeup);

    std::vector<double> multiplier = std::move(limited.trace.gain);
    for (double& m : multiplier) m *= makeup;

    built.stems.mixture = apply_multiplier(track.mixture, multiplier);
    for (const auto& [name, stem] : track.stems)
        built.stems.stems[name] = apply_multiplier(stem, multiplier);
    built.stems.additive = true;
    built.lufs_out = integrated_lufs(built.stems.mixture).lufs;
    return built;
}

struct TrackReport {
    std::string track_id;
    bool ok = false;
    std::string error;
    double threshold_db = 0.0;
    double max_reduction_db = 0.0;
    double lufs_in = 0.0;
    double lufs_out = 0.0;
    bool mixture_rebuilt = false; // file mixture was inconsistent, stem sum used
};

struct DatasetReport {
    std::string recipe_name;
    std::vector<TrackReport> tracks;
    LoudnessStats input_stats;
    LoudnessStats output_stats;
    std::size_t n_failed = 0;
};

struct BuildOptions {
    unsigned jobs = 1;
    WavFormat format = WavFormat::float32;
    bool rebuild_inconsistent_mixtures = true;
};

/// Build a limited dataset out of a stem library. Failed tracks are
/// recorded and skipped; the report aggregates in library order.
inline DatasetReport build_dataset(const std::vector<TrackManifest>& library,
                                   const DatasetRecipe& recipe,
                                   const std::filesystem::path& out_dir,
                                   const BuildOptions& options = {}) {
    if (library.empty()) throw ArgumentError("build_dataset: empty library");
    std::filesystem::create_directories(out_dir);

    DatasetReport report;
    report.recipe_name = recipe.name;
    report.tracks.resize(library.size());

    parallel_for(library.size(), options.jobs, [&](std::size_t i) {
        TrackReport& row = report.tracks[i];
        row.track_id = library[i].track_id;
        try {
            StemSet track = load_stem_set(library[i]);
            if (!track.additive && options.rebuild_inconsistent_mixtures) {
                log_info("track '" + row.track_id + "': mixture differs from stem sum, rebuilding");
                rebuild_mixture_from_stems(track);
                row.mixture_rebuilt = true;
            }
            BuiltTrack built = build_limited_track(track, recipe);
            const auto track_dir = out_dir / row.track_id;
            std::filesystem::create_directories(track_dir);
            write_wav(built.stems.mixture, track_dir / "mixture.wav", options.format);
            for (const auto& [name, stem] : built.stems.stems)
                write_wav(stem, track_dir / (name + ".wav"), options.format);
            row.ok = true;
            row.threshold_db = built.threshold_db;
            row.max_reduction_db = built.max_reduction_db;
            row.lufs_in = built.lufs_in;
            row.lufs_out = built.lufs_out;
        } catch (const Error& e) {
            row.ok = false;
            row.error = e.what();
            log_warn("track '" + row.track_id + "' skipped: " + row.error);
        }
    });

    std::vector<double> in_lufs, out_lufs;
    for (const auto& row : report.tracks) {
        if (row.ok) {
            in_lufs.push_back(row.lufs_in);
            out_lufs.push_back(row.lufs_out);
        } else {
            ++report.n_failed;
        }
    }
    if (!out_lufs.empty()) {
        report.input_stats = loudness_stats(in_lufs);
        report.output_stats = loudness_stats(out_lufs);
    }
    return report;
}

struct VerificationRow {
    std::string track_id;
    bool additive_ok = false;
    bool ceiling_ok = false;
    bool ratio_ok = false;
    double additivity_error = 0.0;
    double peak_linear = 0.0;
    double max_ratio_error = 0.0;
    bool ok() const { return additive_ok && ceiling_ok && ratio_ok; }
};

struct VerificationReport {
    std::vector<VerificationRow> rows;
    bool all_ok = true;
};

/// Check a built dataset against its source: limited stems must still sum
/// to the limited mixture, the mixture peak must respect the ceiling, and
/// the divide-based mixture ratio must reproduce every limited stem from
/// the original stems.
inline VerificationReport verify_dataset(const std::filesystem::path& original_dir,
                                         const std::filesystem::path& limited_dir,
                                         double ceiling_db = 0.0, double tolerance = 1e-4) {
    const auto originals = scan_library(original_dir);
    const auto limited = scan_library(limited_dir);
    if (originals.size() != limited.size())
        throw ConsistencyError("library layouts differ: " + std::to_string(originals.size()) +
                               " vs " + std::to_string(limited.size()) + " tracks");

    VerificationReport report;
    for (std::size_t i = 0; i < originals.size(); ++i) {
        if (originals[i].track_id != limited[i].track_id)
            throw ConsistencyError("track layouts differ at '" + originals[i].track_id + "' vs '" +
                                   limited[i].track_id + "'");
        StemSet orig = load_stem_set(originals[i]);
        if (!orig.additive) rebuild_mixture_from_stems(orig);
        const StemSet lim = load_stem_set(limited[i]);

        VerificationRow row;
        row.track_id = originals[i].track_id;
        row.additivity_error = additivity_error(lim);
        row.additive_ok = row.additivity_error <= kAdditivityTolerance;
        row.peak_linear = peak(lim.mixture);
        row.ceiling_ok = row.peak_linear <= db_to_linear(ceiling_db) * (1.0 + 1e-6);

        const std::vector<double> ratio = sample_ratio_raw(orig.mixture, lim.mixture);
        double worst = 0.0;
        for (const char* name : kStemNames) {
            const AudioClip reproduced = apply_multiplier(orig.stems.at(name), ratio);
            const AudioClip& expected = lim.stems.at(name);
            for (std::size_t c = 0; c < reproduced.n_channels(); ++c)
                for (std::size_t n = 0; n < reproduced.n_frames(); ++n)
                    worst = std::max(worst,
                                     std::abs(reproduced.samples[c][n] - expected.samples[c][n]));
        }
        row.max_ratio_error = worst;
        row.ratio_ok = worst <= tolerance;
        report.all_ok = report.all_ok && row.ok();
        report.rows.push_back(std::move(row));
    }
    return report;
}

} // namespace loudkit
