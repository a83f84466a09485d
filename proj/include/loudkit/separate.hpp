#pragma once

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "loudkit/audio.hpp"
#include "loudkit/errors.hpp"
#include "loudkit/log.hpp"
#include "loudkit/loudness.hpp"
#include "loudkit/rng.hpp"
#include "loudkit/stems.hpp"
#include "loudkit/wav.hpp"

namespace loudkit {

/// Loudness-normalized inference wrapper: (i) gain the input to the
/// target loudness, (ii) run the external separator on the normalized
/// file, (iii) scale every produced stem back by the inverse gain.
struct WrapConfig {
    double target_lufs = -14.0;
    std::string command_template; // must contain {input} and {output_dir}
    bool restore_gain = true;
    std::vector<std::string> expected_stems = {"vocals", "bass", "drums", "other"};
    std::optional<std::filesystem::path> target_from; // measure this file for the target
    WavFormat output_format = WavFormat::float64;
};

struct WrapResult {
    std::map<std::string, std::filesystem::path> stem_files;
    double input_lufs = 0.0;
    double gain_db = 0.0;
    int exit_code = 0;
    double seconds = 0.0;
};

namespace detail {

inline std::string substitute_placeholder(std::string text, const std::string& key,
                                          const std::string& value) {
    std::size_t pos = 0;
    while ((pos = text.find(key, pos)) != std::string::npos) {
        text.replace(pos, key.size(), value);
        pos += value.size();
    }
    return text;
}

struct CommandResult {
    int exit_code = -1;
    std::string output;
};

inline CommandResult run_command(const std::string& command) {
    CommandResult result;
    FILE* pipe = ::popen((command + " 2>&1").c_str(), "r");
    if (!pipe) throw ProcessError("failed to launch: " + command);
    std::array<char, 4096> buffer;
    std::size_t n = 0;
    while ((n = std::fread(buffer.data(), 1, buffer.size(), pipe)) > 0)
        result.output.append(buffer.data(), n);
    const int status = ::pclose(pipe);
    result.exit_code = status >= 0 && WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

inline std::filesystem::path fresh_temp_dir(const char* prefix) {
    const auto base = std::filesystem::temp_directory_path();
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    const auto dir = base / (std::string(prefix) + std::to_string(mix_seed(
                                 static_cast<std::uint64_t>(stamp),
                                 static_cast<std::uint64_t>(::getpid()))));
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace detail

inline WrapResult wrap_separate(const std::filesystem::path& input,
                                const std::filesystem::path& out_dir, const WrapConfig& config) {
    if (config.command_template.find("{input}") == std::string::npos ||
        config.command_template.find("{output_dir}") == std::string::npos)
        throw ArgumentError("command template must contain {input} and {output_dir}");

    const AudioClip clip = read_wav(input);
    WrapResult result;
    result.input_lufs = integrated_lufs(clip).lufs;
    const double target = config.target_from
                              ? integrated_lufs(read_wav(*config.target_from)).lufs
                              : config.target_lufs;
    result.gain_db = target - result.input_lufs;

    const auto work_dir = detail::fresh_temp_dir("loudkit-wrap-");
    const auto stems_dir = work_dir / "stems";
    std::filesystem::create_directories(stems_dir);
    const auto normalized_path = work_dir / "input.wav";
    // float64 temporaries: the down/up gain round trip must not be
    // limited by intermediate file precision
    write_wav(apply_gain_db(clip, result.gain_db), normalized_path, WavFormat::float64);

    std::string command = detail::substitute_placeholder(config.command_template, "{input}",
                                                         "'" + normalized_path.string() + "'");
    command = detail::substitute_placeholder(command, "{output_dir}",
                                             "'" + stems_dir.string() + "'");
    log_info("running separator: " + command);
    const auto started = std::chrono::steady_clock::now();
    const auto run = detail::run_command(command);
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.exit_code = run.exit_code;
    log_info("separator finished in " + std::to_string(result.seconds) + " s, exit " +
             std::to_string(run.exit_code));
    if (run.exit_code != 0) {
        std::filesystem::remove_all(work_dir);
        throw ProcessError("separator exited with code " + std::to_string(run.exit_code) +
                           "; output:\n" + run.output);
    }

    std::filesystem::create_directories(out_dir);
    for (const auto& name : config.expected_stems) {
        const auto produced = stems_dir / (name + ".wav");
        if (!std::filesystem::exists(produced)) {
            std::filesystem::remove_all(work_dir);
            throw ConsistencyError("separator did not produce expected stem: " + name);
        }
        AudioClip stem = read_wav(produced);
        if (config.restore_gain) stem = apply_gain_db(stem, -result.gain_db);
        const auto final_path = out_dir / (name + ".wav");
        write_wav(stem, final_path, config.output_format);
        result.stem_files[name] = final_path;
    }
    std::filesystem::remove_all(work_dir);
    return result;
}

} // namespace loudkit
