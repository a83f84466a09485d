#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>
#include <sys/wait.h>

#include "loudkit/stems.hpp"
#include "loudkit/wav.hpp"
#include "support/synth.hpp"

using namespace loudkit;
namespace fs = std::filesystem;

namespace {

struct CliRun {
    int exit_code = -1;
    std::string output;
};

CliRun run_cli(const std::string& args) {
    CliRun run;
    const std::string command = std::string(LOUDKIT_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = ::popen(command.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buffer;
    std::size_t n = 0;
    while ((n = std::fread(buffer.data(), 1, buffer.size(), pipe)) > 0)
        run.output.append(buffer.data(), n);
    const int status = ::pclose(pipe);
    run.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return run;
}

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("loudkit-test-cli-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path make_library(const std::string& name, int tracks, double seconds) {
    const auto dir = fresh_dir(name);
    Rng rng(2000 + tracks);
    for (int t = 0; t < tracks; ++t) {
        const auto track_dir = dir / ("track" + std::to_string(t));
        fs::create_directories(track_dir);
        const StemSet stems = testsupport::make_toy_stems(rng, 44100, seconds);
        for (const char* stem : kStemNames)
            write_wav(stems.stems.at(stem), track_dir / (std::string(stem) + ".wav"),
                      WavFormat::float32);
    }
    return dir;
}

std::uint64_t hash_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::uint64_t h = 1469598103934665603ULL;
    char c;
    while (in.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace

TEST_CASE("no subcommand is a usage error") {
    CHECK(run_cli("").exit_code == 2);
    CHECK(run_cli("frobnicate").exit_code == 2);
    CHECK(run_cli("measure --no-such-flag x").exit_code == 2);
}

TEST_CASE("--help succeeds") {
    const CliRun run = run_cli("--help");
    CHECK(run.exit_code == 0);
    CHECK(run.output.find("measure") != std::string::npos);
    CHECK(run.output.find("wrap-separate") != std::string::npos);
}

TEST_CASE("measure emits parseable stats JSON and CSV") {
    const auto library = make_library("measure", 3, 1.0);
    const auto out = fresh_dir("measure-out");
    const CliRun run = run_cli("measure --in " + library.string() + " --json " +
                               (out / "stats.json").string() + " --csv " +
                               (out / "tracks.csv").string());
    REQUIRE(run.exit_code == 0);

    std::ifstream json_in(out / "stats.json");
    nlohmann::json stats;
    json_in >> stats;
    CHECK(stats["n_tracks"] == 3);
    CHECK(stats["tracks"].size() == 3);
    CHECK(stats["min"].get<double>() <= stats["median"].get<double>());
    CHECK(stats["median"].get<double>() <= stats["max"].get<double>());

    std::ifstream csv_in(out / "tracks.csv");
    std::string header;
    std::getline(csv_in, header);
    CHECK(header == "track_id,lufs");
    int rows = 0;
    for (std::string line; std::getline(csv_in, line);) rows += line.empty() ? 0 : 1;
    CHECK(rows == 3);
}

TEST_CASE("limit subcommand writes output and trace") {
    Rng rng(2100);
    const auto dir = fresh_dir("limit");
    const AudioClip clip = testsupport::make_program_clip(rng, 44100, 1.0, 3.0);
    write_wav(clip, dir / "in.wav", WavFormat::float64);

    const CliRun run = run_cli("limit --in " + (dir / "in.wav").string() + " --out " +
                               (dir / "out.wav").string() + " --threshold -3 --release 80" +
                               " --trace-out " + (dir / "trace.wav").string() +
                               " --format float64");
    REQUIRE(run.exit_code == 0);
    const AudioClip out = read_wav(dir / "out.wav");
    CHECK(peak(out) <= db_to_linear(-3.0) * (1.0 + 1e-6));
    const AudioClip trace = read_wav(dir / "trace.wav");
    CHECK(trace.n_channels() == 1);
    CHECK(trace.n_frames() == clip.n_frames());
}

TEST_CASE("build-dataset then verify round trip") {
    const auto library = make_library("build", 2, 1.5);
    const auto out = fresh_dir("build-out");
    const CliRun build = run_cli("build-dataset --in " + library.string() + " --out " +
                                 out.string() + " --recipe XL --report " +
                                 (out / "report.json").string() + " --format float64 --jobs 2");
    REQUIRE(build.exit_code == 0);

    nlohmann::json report;
    std::ifstream(out / "report.json") >> report;
    CHECK(report["recipe"] == "XL");
    CHECK(report["tracks"].size() == 2);
    for (const auto& row : report["tracks"]) {
        CHECK(row["ok"] == true);
        CHECK(row["max_reduction_db"].get<double>() >= 5.75);
        CHECK(row["max_reduction_db"].get<double>() <= 7.25);
        CHECK(row["lufs_out"].get<double>() > row["lufs_in"].get<double>());
    }

    const CliRun verify = run_cli("verify --original " + library.string() + " --limited " +
                                  out.string() + " --report " + (out / "verify.json").string());
    CHECK(verify.exit_code == 0);

    // tamper and verify again
    AudioClip vocals = read_wav(out / "track0" / "vocals.wav");
    for (auto& channel : vocals.samples)
        for (double& v : channel) v += 0.01;
    write_wav(vocals, out / "track0" / "vocals.wav", WavFormat::float64);
    CHECK(run_cli("verify --original " + library.string() + " --limited " + out.string())
              .exit_code == 1);
}

TEST_CASE("eval scores identical estimates at the cap and fails on mismatched layouts") {
    const auto library = make_library("eval", 1, 2.0);
    const auto est_dir = fresh_dir("eval-est");
    fs::create_directories(est_dir / "track0");
    for (const char* stem : kStemNames)
        fs::copy_file(library / "track0" / (std::string(stem) + ".wav"),
                      est_dir / "track0" / (std::string(stem) + ".wav"));

    const auto out = fresh_dir("eval-out");
    const CliRun run = run_cli("eval --ref " + library.string() + " --est " + est_dir.string() +
                               " --filter-len 32 --out " + (out / "results.json").string() +
                               " --csv " + (out / "summary.csv").string());
    REQUIRE(run.exit_code == 0);
    nlohmann::json results;
    std::ifstream(out / "results.json") >> results;
    REQUIRE(results["tracks"].size() == 1);
    for (const char* stem : kStemNames) {
        CHECK(results["tracks"][0]["stems"][stem]["median"].get<double>() == 300.0);
        CHECK(results["tracks"][0]["stems"][stem]["si_sdr"].get<double>() == 300.0);
    }
    REQUIRE(results["summary"].size() == 5);

    fs::remove(est_dir / "track0" / "drums.wav");
    CHECK(run_cli("eval --ref " + library.string() + " --est " + est_dir.string()).exit_code == 1);
}

TEST_CASE("wrap-separate with an identity separator restores the input") {
    Rng rng(2200);
    const auto dir = fresh_dir("wrap");
    AudioClip clip = testsupport::make_program_clip(rng, 44100, 1.0, -8.0);
    write_wav(clip, dir / "mix.wav", WavFormat::float64);
    clip = read_wav(dir / "mix.wav");

    const std::string cmd =
        "for s in vocals bass drums other; do cp {input} {output_dir}/$s.wav; done";
    const CliRun run = run_cli("wrap-separate --in " + (dir / "mix.wav").string() + " --out " +
                               (dir / "stems").string() + " --cmd \"" + cmd + "\"");
    REQUIRE(run.exit_code == 0);
    for (const char* stem : kStemNames) {
        const AudioClip out = read_wav(dir / "stems" / (std::string(stem) + ".wav"));
        REQUIRE(out.n_frames() == clip.n_frames());
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t n = 0; n < out.n_frames(); ++n)
                REQUIRE(out.samples[c][n] == Catch::Approx(clip.samples[c][n]).margin(1e-9));
    }
}

TEST_CASE("wrap-separate propagates separator failure") {
    Rng rng(2300);
    const auto dir = fresh_dir("wrap-fail");
    write_wav(testsupport::make_program_clip(rng, 44100, 0.5, -8.0), dir / "mix.wav",
              WavFormat::float32);
    const CliRun run = run_cli("wrap-separate --in " + (dir / "mix.wav").string() + " --out " +
                               (dir / "stems").string() + " --cmd \"cp {input} {output_dir}/x.wav; exit 3\"");
    CHECK(run.exit_code == 1);
    CHECK_FALSE(fs::exists(dir / "stems" / "vocals.wav"));
}

TEST_CASE("augment is seed-deterministic across runs") {
    const auto library = make_library("augment", 2, 3.0);
    const auto out1 = fresh_dir("augment-out1");
    const auto out2 = fresh_dir("augment-out2");
    const std::string base = "augment --in " + library.string() +
                             " --strategy limitaug --target-dist normal:-8.61,1.17 --seed 99 "
                             "--count 3 --duration 1.0 --jobs 2 --out ";
    REQUIRE(run_cli(base + out1.string()).exit_code == 0);
    REQUIRE(run_cli(base + out2.string()).exit_code == 0);

    for (int i = 0; i < 3; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "ex_%06d", i);
        CHECK(hash_file(out1 / (std::string(name) + "_mixture.wav")) ==
              hash_file(out2 / (std::string(name) + "_mixture.wav")));
        CHECK(hash_file(out1 / (std::string(name) + "_target.wav")) ==
              hash_file(out2 / (std::string(name) + "_target.wav")));
    }
    CHECK(hash_file(out1 / "examples.jsonl") == hash_file(out2 / "examples.jsonl"));

    // sidecar rows are valid JSON with the recorded draw
    std::ifstream jsonl(out1 / "examples.jsonl");
    std::string line;
    int rows = 0;
    while (std::getline(jsonl, line)) {
        if (line.empty()) continue;
        const nlohmann::json row = nlohmann::json::parse(line);
        CHECK(row["strategy"] == "limitaug");
        CHECK(row["achieved_lufs"].get<double>() <= row["drawn_target_lufs"].get<double>() + 0.5);
        ++rows;
    }
    CHECK(rows == 3);
}

TEST_CASE("JSON config supplies defaults and flags override it") {
    const auto library = make_library("config", 1, 2.0);
    const auto dir = fresh_dir("config-out");
    const auto config_path = dir / "config.json";
    {
        std::ofstream out(config_path);
        out << R"({"augment": {"count": 2, "duration": 0.8, "seed": 5, "strategy": "loudnorm",)"
            << R"( "in": ")" << library.string() << R"(", "out": ")" << (dir / "from-config").string()
            << R"("}})";
    }
    const CliRun defaults = run_cli("--config " + config_path.string() + " augment");
    REQUIRE(defaults.exit_code == 0);
    CHECK(fs::exists(dir / "from-config" / "ex_000001_mixture.wav"));
    CHECK_FALSE(fs::exists(dir / "from-config" / "ex_000002_mixture.wav"));

    const CliRun overridden = run_cli("--config " + config_path.string() + " augment --count 1 --out " +
                                      (dir / "overridden").string());
    REQUIRE(overridden.exit_code == 0);
    CHECK(fs::exists(dir / "overridden" / "ex_000000_mixture.wav"));
    CHECK_FALSE(fs::exists(dir / "overridden" / "ex_000001_mixture.wav"));
}
