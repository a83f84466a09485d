// loudkit command line front end: loudness measurement, limiting,
// dataset construction, LimitAug example generation, separation scoring
// and the loudness-normalized inference wrapper.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "loudkit/augment.hpp"
#include "loudkit/dataset.hpp"
#include "loudkit/errors.hpp"
#include "loudkit/limiter.hpp"
#include "loudkit/log.hpp"
#include "loudkit/loudness.hpp"
#include "loudkit/metrics.hpp"
#include "loudkit/parallel.hpp"
#include "loudkit/reports.hpp"
#include "loudkit/separate.hpp"
#include "loudkit/stems.hpp"
#include "loudkit/wav.hpp"

namespace fs = std::filesystem;
using namespace loudkit;

namespace {

// CLI11 config reader for a JSON document mirroring the flag names:
// top-level keys feed global options, one nested object per subcommand.
class JsonConfig : public CLI::Config {
public:
    std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}\n"; }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        nlohmann::json doc;
        try {
            input >> doc;
        } catch (const nlohmann::json::exception& e) {
            throw CLI::FileError(std::string("config is not valid JSON: ") + e.what());
        }
        std::vector<CLI::ConfigItem> items;
        flatten(doc, {}, items);
        return items;
    }

private:
    static std::string scalar_text(const nlohmann::json& v) {
        return v.is_string() ? v.get<std::string>() : v.dump();
    }

    static void flatten(const nlohmann::json& node, std::vector<std::string> parents,
                        std::vector<CLI::ConfigItem>& items) {
        for (const auto& [key, value] : node.items()) {
            if (value.is_object()) {
                auto nested = parents;
                nested.push_back(key);
                flatten(value, nested, items);
                continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = key;
            if (value.is_array())
                for (const auto& element : value) item.inputs.push_back(scalar_text(element));
            else
                item.inputs.push_back(scalar_text(value));
            items.push_back(std::move(item));
        }
    }
};

std::pair<double, double> parse_pair(const std::string& text, const char* flag) {
    const auto comma = text.find(',');
    if (comma == std::string::npos)
        throw ConfigError(std::string(flag) + " expects LO,HI (got '" + text + "')");
    try {
        return {std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
    } catch (const std::exception&) {
        throw ConfigError(std::string(flag) + " expects numeric LO,HI (got '" + text + "')");
    }
}

TargetLoudnessDist parse_target_dist(const std::string& text) {
    const auto colon = text.find(':');
    const std::string kind = text.substr(0, colon);
    const std::string args = colon == std::string::npos ? "" : text.substr(colon + 1);
    try {
        if (kind == "normal") {
            const auto [mu, sigma] = parse_pair(args, "--target-dist normal");
            return TargetLoudnessDist::normal(mu, sigma);
        }
        if (kind == "uniform") {
            const auto [lo, hi] = parse_pair(args, "--target-dist uniform");
            return TargetLoudnessDist::uniform(lo, hi);
        }
        if (kind == "fixed") return TargetLoudnessDist::fixed(std::stod(args));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("bad --target-dist value '" + text + "'");
    }
    throw ConfigError("--target-dist expects normal:MU,SIGMA | uniform:LO,HI | fixed:V (got '" +
                      text + "')");
}

std::string format_lufs(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.2f", v);
    return buffer;
}

// ---------------------------------------------------------------- measure

struct MeasureOptions {
    std::string in_dir;
    std::string json_path;
    std::string csv_path;
    unsigned jobs = default_jobs();
};

void run_measure(const MeasureOptions& options) {
    struct Row {
        std::string track_id;
        double lufs = 0.0;
        bool ok = false;
        std::string error;
    };
    std::vector<Row> rows;

    const auto manifests = scan_library(options.in_dir);
    if (!manifests.empty()) {
        rows.resize(manifests.size());
        parallel_for(manifests.size(), options.jobs, [&](std::size_t i) {
            rows[i].track_id = manifests[i].track_id;
            try {
                const StemSet set = load_stem_set(manifests[i]);
                rows[i].lufs = integrated_lufs(set.mixture).lufs;
                rows[i].ok = true;
            } catch (const Error& e) {
                rows[i].error = e.what();
            }
        });
    } else {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(options.in_dir))
            if (entry.path().extension() == ".wav") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw ArgumentError("no tracks or wav files in " + options.in_dir);
        rows.resize(files.size());
        parallel_for(files.size(), options.jobs, [&](std::size_t i) {
            rows[i].track_id = files[i].stem().string();
            try {
                rows[i].lufs = integrated_lufs(read_wav(files[i])).lufs;
                rows[i].ok = true;
            } catch (const Error& e) {
                rows[i].error = e.what();
            }
        });
    }

    std::vector<double> readings;
    std::string csv = "track_id,lufs\n";
    for (const auto& row : rows) {
        if (row.ok) {
            readings.push_back(row.lufs);
            csv += row.track_id + "," + std::to_string(row.lufs) + "\n";
        } else {
            log_warn("track '" + row.track_id + "' skipped: " + row.error);
        }
    }
    if (readings.empty()) throw ArgumentError("no measurable tracks");

    const LoudnessStats stats = loudness_stats(readings);
    nlohmann::json doc = to_json(stats);
    nlohmann::json tracks = nlohmann::json::array();
    for (const auto& row : rows)
        if (row.ok) tracks.push_back({{"track_id", row.track_id}, {"lufs", row.lufs}});
    doc["tracks"] = tracks;

    if (!options.csv_path.empty()) write_text_file(options.csv_path, csv);
    if (!options.json_path.empty()) write_json_file(options.json_path, doc);
    std::cout << "tracks " << stats.n_tracks << "  min " << format_lufs(stats.min) << "  max "
              << format_lufs(stats.max) << "  median " << format_lufs(stats.median) << "  mean ("
              << "std) " << format_lufs(stats.mean) << " (" << format_lufs(stats.std) << ") LUFS\n";
    if (options.json_path.empty() && options.csv_path.empty()) std::cout << doc.dump(2) << '\n';
}

// ------------------------------------------------------------------ limit

struct LimitOptions {
    std::string in_path;
    std::string out_path;
    std::string trace_path;
    double threshold_db = 0.0;
    double attack_ms = 1.0;
    double release_ms = 100.0;
    double lookahead_ms = -1.0;
    bool unlinked = false;
    std::string format = "float32";
};

void run_limit(const LimitOptions& options) {
    LimiterParams params;
    params.threshold_db = options.threshold_db;
    params.attack_ms = options.attack_ms;
    params.release_ms = options.release_ms;
    if (options.lookahead_ms >= 0.0) params.lookahead_ms = options.lookahead_ms;
    params.stereo_link = !options.unlinked;

    const AudioClip clip = read_wav(options.in_path);
    const LimitResult result = limit(clip, params);
    if (fs::path(options.out_path).has_parent_path())
        fs::create_directories(fs::path(options.out_path).parent_path());
    write_wav(result.output, options.out_path, wav_format_from_string(options.format));
    if (!options.trace_path.empty()) {
        AudioClip trace_clip(clip.sample_rate, 1, result.trace.gain.size());
        trace_clip.samples[0] = result.trace.gain;
        write_wav(trace_clip, options.trace_path, WavFormat::float32);
    }
    std::cout << "peak in " << format_lufs(peak_db(clip)) << " dBFS, out "
              << format_lufs(peak_db(result.output)) << " dBFS, max reduction "
              << format_lufs(max_reduction_db(result.trace)) << " dB\n";
}

// ---------------------------------------------------------- build-dataset

struct BuildOptionsCli {
    std::string in_dir;
    std::string out_dir;
    std::string recipe = "L";
    std::string reduction;
    double release_ms = 100.0;
    std::string report_path;
    std::string format = "float32";
    unsigned jobs = default_jobs();
};

void run_build_dataset(const BuildOptionsCli& options) {
    DatasetRecipe recipe;
    if (options.recipe == "L")
        recipe = recipe_L();
    else if (options.recipe == "XL")
        recipe = recipe_XL();
    else if (options.recipe == "custom")
        recipe.name = "custom";
    else
        throw ConfigError("--recipe expects L, XL or custom");
    if (!options.reduction.empty()) {
        const auto [lo, hi] = parse_pair(options.reduction, "--reduction");
        recipe.reduction_lo_db = lo;
        recipe.reduction_hi_db = hi;
    } else if (options.recipe == "custom") {
        throw ConfigError("--recipe custom requires --reduction LO,HI");
    }
    recipe.limiter_template.release_ms = options.release_ms;

    BuildOptions build;
    build.jobs = options.jobs;
    build.format = wav_format_from_string(options.format);

    const auto library = scan_library(options.in_dir);
    const DatasetReport report = build_dataset(library, recipe, options.out_dir, build);
    if (!options.report_path.empty()) write_json_file(options.report_path, to_json(report));

    const std::size_t built = report.tracks.size() - report.n_failed;
    std::cout << "built " << built << "/" << report.tracks.size() << " tracks";
    if (report.output_stats.n_tracks > 0)
        std::cout << ", output mean " << format_lufs(report.output_stats.mean) << " LUFS (input "
                  << format_lufs(report.input_stats.mean) << ")";
    std::cout << '\n';
    if (built == 0) throw Error("no track could be built");
}

// ---------------------------------------------------------------- augment

struct AugmentOptions {
    std::string in_dir;
    std::string out_dir;
    std::string strategy = "limitaug";
    std::string target_dist = "normal:-10.89,1.19";
    std::string release_ms = "30,200";
    double threshold_db = 0.0;
    double post_norm = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t seed = 0;
    std::size_t count = 10;
    double duration_s = 6.0;
    std::string target_stem = "vocals";
    std::string gain_range = "-6,6";
    double swap_prob = 0.5;
    std::string format = "float32";
    unsigned jobs = default_jobs();
};

void run_augment(const AugmentOptions& options) {
    LimitAugConfig config;
    config.strategy = strategy_from_string(options.strategy);
    config.target_dist = parse_target_dist(options.target_dist);
    const auto [release_lo, release_hi] = parse_pair(options.release_ms, "--release-ms");
    config.release_ms_lo = release_lo;
    config.release_ms_hi = release_hi;
    config.threshold_db = options.threshold_db;
    if (!std::isnan(options.post_norm)) config.post_norm_lufs = options.post_norm;

    SegmentOptions segment;
    const auto [gain_lo, gain_hi] = parse_pair(options.gain_range, "--gain-range");
    segment.gain_db_lo = gain_lo;
    segment.gain_db_hi = gain_hi;
    segment.swap_probability = options.swap_prob;

    const LibraryIndex library = LibraryIndex::build(scan_library(options.in_dir));
    fs::create_directories(options.out_dir);
    const WavFormat format = wav_format_from_string(options.format);

    std::vector<nlohmann::json> sidecar(options.count);
    parallel_for(options.count, options.jobs, [&](std::size_t i) {
        const std::uint64_t example_seed = options.seed + i;
        constexpr int kMaxAttempts = 100;
        for (int attempt = 0;; ++attempt) {
            Rng rng(attempt == 0 ? example_seed
                                 : mix_seed(example_seed, static_cast<std::uint64_t>(attempt)));
            try {
                SegmentSample sample = sample_segment(library, rng, options.duration_s, segment);
                sample.spec.rng_seed = example_seed;
                const LimitAugResult result =
                    build_training_example(sample.stems, options.target_stem, config, rng);

                char stem_name[32];
                std::snprintf(stem_name, sizeof stem_name, "ex_%06zu", i);
                const std::string base = stem_name;
                write_wav(result.mixture, fs::path(options.out_dir) / (base + "_mixture.wav"),
                          format);
                write_wav(result.target, fs::path(options.out_dir) / (base + "_target.wav"),
                          format);

                nlohmann::json row = {{"index", i},
                                      {"seed", example_seed},
                                      {"attempts", attempt + 1},
                                      {"strategy", to_string(config.strategy)},
                                      {"target_stem", options.target_stem},
                                      {"drawn_target_lufs", result.drawn_target_lufs},
                                      {"achieved_lufs", result.achieved_lufs},
                                      {"gain_db", result.gain_db},
                                      {"release_ms", result.release_ms},
                                      {"segment", to_json(sample.spec)}};
                sidecar[i] = std::move(row);
                return;
            } catch (const SilenceError&) {
                if (attempt + 1 >= kMaxAttempts)
                    throw Error("example " + std::to_string(i) + ": " +
                                std::to_string(kMaxAttempts) + " segment draws were all silent");
            }
        }
    });

    std::string lines;
    for (const auto& row : sidecar) lines += row.dump() + "\n";
    write_text_file(fs::path(options.out_dir) / "examples.jsonl", lines);
    std::cout << "wrote " << options.count << " examples to " << options.out_dir << '\n';
}

// ------------------------------------------------------------------- eval

struct EvalOptions {
    std::string ref_dir;
    std::string est_dir;
    std::size_t filter_len = 512;
    double window_s = 1.0;
    double hop_s = 1.0;
    std::string out_path;
    std::string csv_path;
    unsigned jobs = default_jobs();
};

void run_eval(const EvalOptions& options) {
    ProjectionConfig config;
    config.filter_len = options.filter_len;
    config.window_s = options.window_s;
    config.hop_s = options.hop_s;

    const auto references = scan_library(options.ref_dir);
    if (references.empty()) throw ArgumentError("no reference tracks in " + options.ref_dir);

    std::vector<EvalResult> results(references.size());
    parallel_for(references.size(), options.jobs, [&](std::size_t i) {
        const StemSet ref = load_stem_set(references[i]);
        StemSet est;
        for (const char* name : kStemNames) {
            const auto path =
                fs::path(options.est_dir) / references[i].track_id / (std::string(name) + ".wav");
            if (!fs::exists(path))
                throw ConsistencyError("estimate missing for track '" + references[i].track_id +
                                       "', stem " + name);
            est.stems[name] = read_wav(path);
        }
        est.mixture = ref.mixture;
        results[i] = evaluate_stemsets(ref, est, config, references[i].track_id);
    });

    const auto summary = aggregate_tracks(results);
    nlohmann::json doc;
    doc["tracks"] = nlohmann::json::array();
    for (const auto& r : results) doc["tracks"].push_back(to_json(r));
    doc["summary"] = nlohmann::json::array();
    for (const auto& row : summary)
        doc["summary"].push_back({{"stem", row.stem},
                                  {"sdr_median", row.sdr_median},
                                  {"sdr_mean", row.sdr_mean},
                                  {"si_sdr_mean", row.si_sdr_mean}});
    if (!options.out_path.empty()) write_json_file(options.out_path, doc);
    if (!options.csv_path.empty()) write_text_file(options.csv_path, summary_csv(summary));

    for (const auto& row : summary)
        std::cout << row.stem << "  median " << format_lufs(row.sdr_median) << "  mean "
                  << format_lufs(row.sdr_mean) << "  si-sdr " << format_lufs(row.si_sdr_mean)
                  << " dB\n";
}

// ---------------------------------------------------------- wrap-separate

struct WrapOptions {
    std::string in_path;
    std::string out_dir;
    std::string command;
    double target_lufs = -14.0;
    std::string target_from;
    bool no_restore = false;
    std::vector<std::string> stems = {"vocals", "bass", "drums", "other"};
    std::string format = "float64";
};

void run_wrap(const WrapOptions& options) {
    WrapConfig config;
    config.command_template = options.command;
    config.target_lufs = options.target_lufs;
    if (!options.target_from.empty()) config.target_from = options.target_from;
    config.restore_gain = !options.no_restore;
    config.expected_stems = options.stems;
    config.output_format = wav_format_from_string(options.format);

    const WrapResult result = wrap_separate(options.in_path, options.out_dir, config);
    std::cout << "input " << format_lufs(result.input_lufs) << " LUFS, applied "
              << format_lufs(result.gain_db) << " dB, separator took "
              << format_lufs(result.seconds) << " s\n";
}

// ----------------------------------------------------------------- verify

struct VerifyOptions {
    std::string original_dir;
    std::string limited_dir;
    double ceiling_db = 0.0;
    double tolerance = 1e-4;
    std::string report_path;
};

void run_verify(const VerifyOptions& options) {
    const VerificationReport report =
        verify_dataset(options.original_dir, options.limited_dir, options.ceiling_db,
                       options.tolerance);
    for (const auto& row : report.rows)
        std::cout << (row.ok() ? "ok   " : "FAIL ") << row.track_id << "  additivity "
                  << row.additivity_error << "  peak " << row.peak_linear << "  ratio error "
                  << row.max_ratio_error << '\n';
    if (!options.report_path.empty()) write_json_file(options.report_path, to_json(report));
    if (!report.all_ok) throw Error("dataset verification failed");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"loudkit: loudness, limiting and separation-evaluation toolkit"};
    app.set_config("--config", "", "JSON config file mirroring the flag names");
    app.config_formatter(std::make_shared<JsonConfig>());
    app.require_subcommand(1);

    MeasureOptions measure;
    auto* measure_cmd = app.add_subcommand("measure", "integrated loudness of a track collection");
    measure_cmd->add_option("--in", measure.in_dir, "library directory")->required();
    measure_cmd->add_option("--json", measure.json_path, "write stats + per-track JSON here");
    measure_cmd->add_option("--csv", measure.csv_path, "write track_id,lufs CSV here");
    measure_cmd->add_option("--jobs", measure.jobs, "worker threads");
    measure_cmd->callback([&] { run_measure(measure); });

    LimitOptions limit_options;
    auto* limit_cmd = app.add_subcommand("limit", "run the lookahead limiter over one file");
    limit_cmd->add_option("--in", limit_options.in_path, "input WAV")->required();
    limit_cmd->add_option("--out", limit_options.out_path, "output WAV")->required();
    limit_cmd->add_option("--threshold", limit_options.threshold_db, "ceiling in dBFS");
    limit_cmd->add_option("--release", limit_options.release_ms, "release in ms");
    limit_cmd->add_option("--attack", limit_options.attack_ms, "attack in ms");
    limit_cmd->add_option("--lookahead", limit_options.lookahead_ms, "lookahead in ms (default attack)");
    limit_cmd->add_flag("--unlinked", limit_options.unlinked, "per-channel detection");
    limit_cmd->add_option("--format", limit_options.format, "pcm16|pcm24|float32|float64");
    limit_cmd->add_option("--trace-out", limit_options.trace_path,
                          "write the gain trace as a mono float32 WAV");
    limit_cmd->callback([&] { run_limit(limit_options); });

    BuildOptionsCli build;
    auto* build_cmd = app.add_subcommand("build-dataset", "limit a stem library into a loud dataset");
    build_cmd->add_option("--in", build.in_dir, "input library")->required();
    build_cmd->add_option("--out", build.out_dir, "output directory")->required();
    build_cmd->add_option("--recipe", build.recipe, "L|XL|custom");
    build_cmd->add_option("--reduction", build.reduction, "target max reduction LO,HI in dB");
    build_cmd->add_option("--release-ms", build.release_ms, "limiter release");
    build_cmd->add_option("--report", build.report_path, "write the build report JSON here");
    build_cmd->add_option("--format", build.format, "output sample format");
    build_cmd->add_option("--jobs", build.jobs, "worker threads");
    build_cmd->callback([&] { run_build_dataset(build); });

    AugmentOptions augment;
    auto* augment_cmd = app.add_subcommand("augment", "generate training examples");
    augment_cmd->add_option("--in", augment.in_dir, "input stem library")->required();
    augment_cmd->add_option("--out", augment.out_dir, "output directory")->required();
    augment_cmd->add_option("--strategy", augment.strategy,
                            "baseline|linear-gain|limitaug|loudnorm|limitaug-loudnorm");
    augment_cmd->add_option("--target-dist", augment.target_dist,
                            "normal:MU,SIGMA | uniform:LO,HI | fixed:V");
    augment_cmd->add_option("--release-ms", augment.release_ms, "limiter release range LO,HI");
    augment_cmd->add_option("--threshold", augment.threshold_db, "limiter ceiling in dBFS");
    augment_cmd->add_option("--post-norm", augment.post_norm, "final normalization target LUFS");
    augment_cmd->add_option("--seed", augment.seed, "base RNG seed");
    augment_cmd->add_option("--count", augment.count, "number of examples");
    augment_cmd->add_option("--duration", augment.duration_s, "segment length in seconds");
    augment_cmd->add_option("--target-stem", augment.target_stem, "stem used as the target");
    augment_cmd->add_option("--gain-range", augment.gain_range, "per-stem gain range LO,HI dB");
    augment_cmd->add_option("--swap-prob", augment.swap_prob, "channel swap probability");
    augment_cmd->add_option("--format", augment.format, "output sample format");
    augment_cmd->add_option("--jobs", augment.jobs, "worker threads");
    augment_cmd->callback([&] { run_augment(augment); });

    EvalOptions eval;
    auto* eval_cmd = app.add_subcommand("eval", "score separation estimates against references");
    eval_cmd->add_option("--ref", eval.ref_dir, "reference library")->required();
    eval_cmd->add_option("--est", eval.est_dir, "estimates directory")->required();
    eval_cmd->add_option("--filter-len", eval.filter_len, "distortion filter taps");
    eval_cmd->add_option("--window", eval.window_s, "window length in seconds");
    eval_cmd->add_option("--hop", eval.hop_s, "hop in seconds");
    eval_cmd->add_option("--out", eval.out_path, "write results JSON here");
    eval_cmd->add_option("--csv", eval.csv_path, "write the summary CSV here");
    eval_cmd->add_option("--jobs", eval.jobs, "worker threads");
    eval_cmd->callback([&] { run_eval(eval); });

    WrapOptions wrap;
    auto* wrap_cmd = app.add_subcommand("wrap-separate",
                                        "loudness-normalized inference around a separator command");
    wrap_cmd->add_option("--in", wrap.in_path, "input mixture WAV")->required();
    wrap_cmd->add_option("--out", wrap.out_dir, "output stem directory")->required();
    wrap_cmd->add_option("--cmd", wrap.command, "command with {input} and {output_dir}")->required();
    wrap_cmd->add_option("--target-lufs", wrap.target_lufs, "normalization target");
    wrap_cmd->add_option("--target-from", wrap.target_from,
                         "measure this file for the target instead");
    wrap_cmd->add_flag("--no-restore", wrap.no_restore, "keep outputs at the normalized scale");
    wrap_cmd->add_option("--stems", wrap.stems, "expected stem names")->delimiter(',');
    wrap_cmd->add_option("--format", wrap.format, "output sample format");
    wrap_cmd->callback([&] { run_wrap(wrap); });

    VerifyOptions verify;
    auto* verify_cmd = app.add_subcommand("verify", "check a built dataset against its source");
    verify_cmd->add_option("--original", verify.original_dir, "source library")->required();
    verify_cmd->add_option("--limited", verify.limited_dir, "built dataset")->required();
    verify_cmd->add_option("--ceiling", verify.ceiling_db, "expected peak ceiling dBFS");
    verify_cmd->add_option("--tolerance", verify.tolerance, "ratio reproduction tolerance");
    verify_cmd->add_option("--report", verify.report_path, "write the verification JSON here");
    verify_cmd->callback([&] { run_verify(verify); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
