#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "loudkit/dataset.hpp"
#include "support/synth.hpp"

using namespace loudkit;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("loudkit-test-dataset-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_track(const StemSet& stems, const fs::path& dir, bool with_mixture = false) {
    fs::create_directories(dir);
    for (const char* name : kStemNames)
        write_wav(stems.stems.at(name), dir / (std::string(name) + ".wav"), WavFormat::float64);
    if (with_mixture) write_wav(stems.mixture, dir / "mixture.wav", WavFormat::float64);
}

} // namespace

TEST_CASE("build_limited_track keeps stems additive and under the ceiling") {
    Rng rng(900);
    for (int i = 0; i < 4; ++i) {
        const StemSet track = testsupport::make_toy_stems(rng, 44100, 2.0);
        const BuiltTrack built = build_limited_track(track, recipe_L());

        CHECK(additivity_error(built.stems) <= 1e-9);
        CHECK(peak(built.stems.mixture) <= 1.0 * (1.0 + 1e-6));
        CHECK(built.max_reduction_db >= 3.0 - 0.25);
        CHECK(built.max_reduction_db <= 4.0 + 0.25);
        CHECK(built.lufs_out > built.lufs_in);
    }
}

TEST_CASE("XL recipe compresses deeper and lands louder than L") {
    Rng rng(901);
    const StemSet track = testsupport::make_toy_stems(rng, 44100, 2.0);
    const BuiltTrack l = build_limited_track(track, recipe_L());
    const BuiltTrack xl = build_limited_track(track, recipe_XL());
    CHECK(xl.threshold_db < l.threshold_db);
    CHECK(xl.lufs_out >= l.lufs_out);
}

TEST_CASE("non-additive input is rejected") {
    Rng rng(902);
    StemSet track = testsupport::make_toy_stems(rng, 44100, 1.0);
    for (double& v : track.mixture.samples[0]) v += 0.01;
    track.additive = false;
    CHECK_THROWS_AS(build_limited_track(track, recipe_L()), ConsistencyError);
}

TEST_CASE("recovered ratio reproduces the limited stems") {
    Rng rng(903);
    const StemSet track = testsupport::make_toy_stems(rng, 44100, 2.0);
    const BuiltTrack built = build_limited_track(track, recipe_XL());
    const std::vector<double> ratio = sample_ratio_raw(track.mixture, built.stems.mixture);
    for (const char* name : kStemNames) {
        const AudioClip reproduced = apply_multiplier(track.stems.at(name), ratio);
        const AudioClip& expected = built.stems.stems.at(name);
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t n = 0; n < reproduced.n_frames(); ++n)
                REQUIRE(std::abs(reproduced.samples[c][n] - expected.samples[c][n]) <= 1e-4);
    }
}

TEST_CASE("build_dataset reports per-track rows and collection stats") {
    Rng rng(904);
    const auto in_dir = fresh_dir("in");
    for (int t = 0; t < 2; ++t)
        write_track(testsupport::make_toy_stems(rng, 44100, 1.5),
                    in_dir / ("track" + std::to_string(t)));

    const auto out_dir = fresh_dir("out");
    const auto library = scan_library(in_dir);
    const DatasetReport report = build_dataset(library, recipe_L(), out_dir);

    REQUIRE(report.tracks.size() == 2);
    CHECK(report.n_failed == 0);
    for (const auto& row : report.tracks) {
        CHECK(row.ok);
        CHECK(row.lufs_out > row.lufs_in);
        CHECK(fs::exists(out_dir / row.track_id / "mixture.wav"));
        for (const char* name : kStemNames)
            CHECK(fs::exists(out_dir / row.track_id / (std::string(name) + ".wav")));
    }
    CHECK(report.output_stats.n_tracks == 2);
    CHECK(report.output_stats.mean > report.input_stats.mean);

    CHECK_THROWS_AS(build_dataset({}, recipe_L(), out_dir), ArgumentError);
}

TEST_CASE("inconsistent file mixtures are rebuilt from stem sums") {
    Rng rng(905);
    const auto in_dir = fresh_dir("in-panned");
    StemSet track = testsupport::make_toy_stems(rng, 44100, 1.5);
    // hard-pan the file mixture so it no longer matches the stem sum
    track.mixture.samples[1] = track.mixture.samples[0];
    for (double& v : track.mixture.samples[0]) v = 0.0;
    write_track(track, in_dir / "panned", true);

    const auto out_dir = fresh_dir("out-panned");
    const DatasetReport report = build_dataset(scan_library(in_dir), recipe_L(), out_dir);
    REQUIRE(report.tracks.size() == 1);
    CHECK(report.tracks[0].ok);
    CHECK(report.tracks[0].mixture_rebuilt);
}

TEST_CASE("unattainable tracks are skipped with a report") {
    Rng rng(906);
    const auto in_dir = fresh_dir("in-quiet");
    StemSet quiet = testsupport::make_toy_stems(rng, 44100, 1.0);
    for (auto& [name, stem] : quiet.stems)
        for (auto& channel : stem.samples)
            for (double& v : channel) v *= db_to_linear(-60.0);
    quiet.mixture = sum_stems(quiet.stems);
    write_track(quiet, in_dir / "quiet");

    const auto out_dir = fresh_dir("out-quiet");
    const DatasetReport report = build_dataset(scan_library(in_dir), recipe_L(), out_dir);
    REQUIRE(report.tracks.size() == 1);
    CHECK_FALSE(report.tracks[0].ok);
    CHECK(report.n_failed == 1);
    CHECK_FALSE(report.tracks[0].error.empty());
}

TEST_CASE("verify_dataset passes on builder output and catches tampering") {
    Rng rng(907);
    const auto in_dir = fresh_dir("verify-in");
    for (int t = 0; t < 2; ++t)
        write_track(testsupport::make_toy_stems(rng, 44100, 1.5),
                    in_dir / ("track" + std::to_string(t)));
    const auto out_dir = fresh_dir("verify-out");
    build_dataset(scan_library(in_dir), recipe_L(), out_dir);

    const VerificationReport good = verify_dataset(in_dir, out_dir);
    REQUIRE(good.rows.size() == 2);
    CHECK(good.all_ok);

    // identical directories: ratio is 1 everywhere, additivity holds
    const VerificationReport identical = verify_dataset(in_dir, in_dir, 20.0);
    CHECK(identical.all_ok);

    // tamper one stem by a constant offset
    AudioClip tampered = read_wav(out_dir / "track0" / "vocals.wav");
    for (auto& channel : tampered.samples)
        for (double& v : channel) v += 0.01;
    write_wav(tampered, out_dir / "track0" / "vocals.wav", WavFormat::float64);
    const VerificationReport bad = verify_dataset(in_dir, out_dir);
    CHECK_FALSE(bad.all_ok);
    CHECK_FALSE(bad.rows[0].ratio_ok);
    CHECK(bad.rows[1].ok());
}

TEST_CASE("verify_dataset rejects mismatched layouts") {
    Rng rng(908);
    const auto a = fresh_dir("layout-a");
    const auto b = fresh_dir("layout-b");
    write_track(testsupport::make_toy_stems(rng, 44100, 1.0), a / "track0");
    write_track(testsupport::make_toy_stems(rng, 44100, 1.0), b / "track0");
    write_track(testsupport::make_toy_stems(rng, 44100, 1.0), b / "track1");
    CHECK_THROWS_AS(verify_dataset(a, b), ConsistencyError);
}

TEST_CASE("rebuilding a dataset is bit-identical") {
    Rng rng(909);
    const auto in_dir = fresh_dir("repro-in");
    write_track(testsupport::make_toy_stems(rng, 44100, 1.5), in_dir / "track0");
    const auto out1 = fresh_dir("repro-out1");
    const auto out2 = fresh_dir("repro-out2");
    const auto library = scan_library(in_dir);
    build_dataset(library, recipe_XL(), out1);
    build_dataset(library, recipe_XL(), out2);
    for (const char* name : {"mixture", "vocals", "bass", "drums", "other"}) {
        const AudioClip a = read_wav(out1 / "track0" / (std::string(name) + ".wav"));
        const AudioClip b = read_wav(out2 / "track0" / (std::string(name) + ".wav"));
        REQUIRE(a.samples == b.samples);
    }
}
