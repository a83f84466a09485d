#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "loudkit/audio.hpp"
#include "loudkit/errors.hpp"
#include "loudkit/wav.hpp"

namespace loudkit {

inline constexpr std::array<const char*, 4> kStemNames = {"vocals", "bass", "drums", "other"};

/// A mixture is considered additive when it matches the stem sum within
/// this linear tolerance (about -80 dBFS, absorbs 16-bit quantization).
inline constexpr double kAdditivityTolerance = 1e-4;

enum class MixturePolicy { use_file, use_stem_sum };

struct TrackManifest {
    std::string track_id;
    std::map<std::string, std::filesystem::path> stem_paths;
    std::optional<std::filesystem::path> mixture_path;
    MixturePolicy mixture_policy = MixturePolicy::use_stem_sum;
};

struct StemSet {
    AudioClip mixture;
    std::map<std::string, AudioClip> stems;
    bool additive = false;
};

/// max |mixture - sum of stems| over all channels and frames.
inline double additivity_error(const StemSet& set) {
    double worst = 0.0;
    for (std::size_t c = 0; c < set.mixture.n_channels(); ++c) {
        for (std::size_t n = 0; n < set.mixture.n_frames(); ++n) {
            double sum = 0.0;
            for (const auto& [name, stem] : set.stems) sum += stem.samples[c][n];
            worst = std::max(worst, std::abs(set.mixture.samples[c][n] - sum));
        }
    }
    return worst;
}

inline AudioClip sum_stems(const std::map<std::string, AudioClip>& stems) {
    const AudioClip& first = stems.begin()->second;
    AudioClip mix(first.sample_rate, first.n_channels(), first.n_frames());
    for (const auto& [name, stem] : stems)
        for (std::size_t c = 0; c < mix.n_channels(); ++c)
            for (std::size_t n = 0; n < mix.n_frames(); ++n) mix.samples[c][n] += stem.samples[c][n];
    return mix;
}

inline TrackManifest manifest_from_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad manifest JSON (" + std::string(e.what()) + "): " + path.string());
    }
    const auto base = path.parent_path();
    TrackManifest m;
    m.track_id = doc.value("track_id", path.stem().string());
    if (!doc.contains("paths") || !doc["paths"].is_object())
        throw FormatError("manifest missing 'paths' object: " + path.string());
    for (const char* name : kStemNames) {
        if (!doc["paths"].contains(name))
            throw FormatError(std::string("manifest missing stem '") + name + "': " + path.string());
        m.stem_paths[name] = base / doc["paths"][name].get<std::string>();
    }
    if (doc.contains("mixture_path")) m.mixture_path = base / doc["mixture_path"].get<std::string>();
    const std::string policy = doc.value("mixture_policy",
                                         m.mixture_path ? "use_file" : "use_stem_sum");
    if (policy == "use_file") {
        if (!m.mixture_path) throw FormatError("mixture_policy use_file without mixture_path: " + path.string());
        m.mixture_policy = MixturePolicy::use_file;
    } else if (policy == "use_stem_sum") {
        m.mixture_policy = MixturePolicy::use_stem_sum;
    } else {
        throw FormatError("unknown mixture_policy '" + policy + "': " + path.string());
    }
    return m;
}

/// Build a manifest from a musdb-style track directory containing
/// vocals/bass/drums/other.wav and optionally mixture.wav.
inline std::optional<TrackManifest> manifest_from_dir(const std::filesystem::path& dir) {
    TrackManifest m;
    m.track_id = dir.filename().string();
    for (const char* name : kStemNames) {
        const auto p = dir / (std::string(name) + ".wav");
        if (!std::filesystem::exists(p)) return std::nullopt;
        m.stem_paths[name] = p;
    }
    const auto mix = dir / "mixture.wav";
    if (std::filesystem::exists(mix)) {
        m.mixture_path = mix;
        m.mixture_policy = MixturePolicy::use_file;
    } else {
        m.mixture_policy = MixturePolicy::use_stem_sum;
    }
    return m;
}

/// Scan a library root for tracks: either the root itself is a track
/// directory, or each track is an immediate subdirectory. Tracks are
/// returned sorted by id so every traversal order is deterministic.
inline std::vector<TrackManifest> scan_library(const std::filesystem::path& root) {
    if (!std::filesystem::is_directory(root)) throw IoError("not a directory: " + root.string());
    std::vector<TrackManifest> out;
    if (auto self = manifest_from_dir(root)) {
        out.push_back(std::move(*self));
        return out;
    }
    for (const auto& entry : std::filesystem::directory_iterator(root)) {
        if (entry.is_directory()) {
            if (auto m = manifest_from_dir(entry.path())) out.push_back(std::move(*m));
        } else if (entry.path().extension() == ".json") {
            out.push_back(manifest_from_json(entry.path()));
        }
    }
    std::sort(out.begin(), out.end(),
              [](const TrackManifest& a, const TrackManifest& b) { return a.track_id < b.track_id; });
    return out;
}

/// Load all stems (and the mixture, per policy) of one track. All clips
/// must agree in rate, channel count and length.
inline StemSet load_stem_set(const TrackManifest& manifest) {
    StemSet set;
    for (const char* name : kStemNames) {
        const auto it = manifest.stem_paths.find(name);
        if (it == manifest.stem_paths.end())
            throw ConsistencyError("manifest '" + manifest.track_id + "' missing stem " + name);
        set.stems[name] = read_wav(it->second);
    }
    const AudioClip& first = set.stems.begin()->second;
    std::string shape_report;
    for (const auto& [name, clip] : set.stems) {
        shape_report += name + "=" + std::to_string(clip.n_frames()) + " ";
        if (!clip.same_shape(first))
            throw ConsistencyError("track '" + manifest.track_id +
                                   "': stems differ in rate/channels/length (frames: " + shape_report + ")");
    }
    if (manifest.mixture_policy == MixturePolicy::use_file) {
        set.mixture = read_wav(*manifest.mixture_path);
        if (!set.mixture.same_shape(first))
            throw ConsistencyError("track '" + manifest.track_id + "': mixture file shape differs from stems");
    } else {
        set.mixture = sum_stems(set.stems);
    }
    set.additive = additivity_error(set) <= kAdditivityTolerance;
    return set;
}

/// Replace the mixture by the exact stem sum (the workaround for tracks
/// whose shipped mixture is not the linear sum of its stems).
inline void rebuild_mixture_from_stems(StemSet& set) {
    set.mixture = sum_stems(set.stems);
    set.additive = true;
}

} // namespace loudkit
