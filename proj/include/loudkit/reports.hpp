#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "loudkit/augment.hpp"
#include "loudkit/dataset.hpp"
#include "loudkit/errors.hpp"
#include "loudkit/loudness.hpp"
#include "loudkit/metrics.hpp"

namespace loudkit {

inline nlohmann::json to_json(const LoudnessStats& s) {
    return {{"n_tracks", s.n_tracks}, {"min", s.min},   {"max", s.max},
            {"median", s.median},     {"mean", s.mean}, {"std", s.std}};
}

inline nlohmann::json to_json(const TrackReport& row) {
    nlohmann::json j{{"track_id", row.track_id}, {"ok", row.ok}};
    if (row.ok) {
        j["threshold_db"] = row.threshold_db;
        j["max_reduction_db"] = row.max_reduction_db;
        j["lufs_in"] = row.lufs_in;
        j["lufs_out"] = row.lufs_out;
        j["mixture_rebuilt"] = row.mixture_rebuilt;
    } else {
        j["error"] = row.error;
    }
    return j;
}

inline nlohmann::json to_json(const DatasetReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : report.tracks) rows.push_back(to_json(row));
    nlohmann::json j{{"recipe", report.recipe_name},
                     {"tracks", rows},
                     {"n_failed", report.n_failed}};
    if (report.output_stats.n_tracks > 0) {
        j["input_stats"] = to_json(report.input_stats);
        j["output_stats"] = to_json(report.output_stats);
    }
    return j;
}

inline nlohmann::json to_json(const FramewiseScore& score) {
    return {{"median", score.median},
            {"mean", score.mean},
            {"n_windows", score.per_window.size()},
            {"n_excluded", score.n_excluded},
            {"per_window", score.per_window}};
}

inline nlohmann::json to_json(const EvalResult& result) {
    nlohmann::json stems;
    for (const auto& [name, score] : result.stems) {
        nlohmann::json s = to_json(score.sdr);
        s["si_sdr"] = score.si_sdr_db;
        stems[name] = s;
    }
    return {{"track_id", result.track_id}, {"stems", stems}};
}

inline nlohmann::json to_json(const SegmentSpec& spec) {
    nlohmann::json stems;
    for (std::size_t s = 0; s < kStemNames.size(); ++s) {
        const StemDraw& draw = spec.stems[s];
        stems[kStemNames[s]] = {{"track_id", draw.track_id},
                                {"offset_s", draw.offset_s},
                                {"gain_db", draw.gain_db},
                                {"channel_swap", draw.channel_swap}};
    }
    return {{"duration_s", spec.duration_s}, {"rng_seed", spec.rng_seed}, {"stems", stems}};
}

inline nlohmann::json to_json(const VerificationRow& row) {
    return {{"track_id", row.track_id},
            {"ok", row.ok()},
            {"additive_ok", row.additive_ok},
            {"ceiling_ok", row.ceiling_ok},
            {"ratio_ok", row.ratio_ok},
            {"additivity_error", row.additivity_error},
            {"peak_linear", row.peak_linear},
            {"max_ratio_error", row.max_ratio_error}};
}

inline nlohmann::json to_json(const VerificationReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : report.rows) rows.push_back(to_json(row));
    return {{"all_ok", report.all_ok}, {"tracks", rows}};
}

/// Summary CSV with the stem-per-row layout of the evaluation tables.
inline std::string summary_csv(const std::vector<SummaryRow>& rows) {
    std::string csv = "stem,sdr_median,sdr_mean,si_sdr_mean\n";
    for (const auto& row : rows)
        csv += row.stem + "," + std::to_string(row.sdr_median) + "," +
               std::to_string(row.sdr_mean) + "," + std::to_string(row.si_sdr_mean) + "\n";
    return csv;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write: " + path.string());
    out << text;
    if (!out) throw IoError("short write: " + path.string());
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

} // namespace loudkit
