#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "loudkit/audio.hpp"
#include "loudkit/errors.hpp"

namespace loudkit {

enum class WavFormat { pcm16, pcm24, float32, float64 };

inline const char* to_string(WavFormat f) {
    switch (f) {
    case WavFormat::pcm16: return "pcm16";
    case WavFormat::pcm24: return "pcm24";
    case WavFormat::float32: return "float32";
    case WavFormat::float64: return "float64";
    }
    return "?";
}

inline WavFormat wav_format_from_string(const std::string& s) {
    if (s == "pcm16") return WavFormat::pcm16;
    if (s == "pcm24") return WavFormat::pcm24;
    if (s == "float32") return WavFormat::float32;
    if (s == "float64") return WavFormat::float64;
    throw ConfigError("unknown wav format '" + s + "' (expected pcm16|pcm24|float32|float64)");
}

struct WavInfo {
    int sample_rate = 0;
    std::size_t n_channels = 0;
    std::size_t n_frames = 0;
    int bits_per_sample = 0;
    bool is_float = false;
};

namespace detail {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatFloat = 0x0003;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

struct WavLayout {
    WavInfo info;
    std::uint16_t block_align = 0;
    std::streamoff data_offset = 0;
    std::uint32_t data_size = 0;
};

inline std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline WavLayout parse_wav_header(std::ifstream& in, const std::filesystem::path& path) {
    const auto fail_io = [&](const char* what) -> WavLayout {
        throw IoError(std::string(what) + ": " + path.string());
    };
    const auto fail_fmt = [&](const std::string& what) -> WavLayout {
        throw FormatError(what + ": " + path.string());
    };

    unsigned char head[12];
    if (!in.read(reinterpret_cast<char*>(head), 12)) return fail_io("truncated RIFF header");
    if (std::memcmp(head, "RIFF", 4) != 0 || std::memcmp(head + 8, "WAVE", 4) != 0)
        return fail_fmt("not a RIFF/WAVE file");

    WavLayout layout;
    std::uint16_t format_tag = 0;
    bool have_fmt = false;
    bool have_data = false;

    while (!have_data || !have_fmt) {
        unsigned char chunk_head[8];
        if (!in.read(reinterpret_cast<char*>(chunk_head), 8)) {
            if (have_fmt && have_data) break;
            return fail_io(have_fmt ? "missing data chunk" : "missing fmt chunk");
        }
        const std::uint32_t chunk_size = read_u32(chunk_head + 4);
        if (std::memcmp(chunk_head, "fmt ", 4) == 0) {
            if (chunk_size < 16) return fail_fmt("fmt chunk too small");
            std::vector<unsigned char> fmt(chunk_size);
            if (!in.read(reinterpret_cast<char*>(fmt.data()), chunk_size))
                return fail_io("truncated fmt chunk");
            format_tag = read_u16(fmt.data());
            layout.info.n_channels = read_u16(fmt.data() + 2);
            layout.info.sample_rate = static_cast<int>(read_u32(fmt.data() + 4));
            layout.block_align = read_u16(fmt.data() + 12);
            layout.info.bits_per_sample = read_u16(fmt.data() + 14);
            if (format_tag == kFormatExtensible) {
                if (chunk_size < 40) return fail_fmt("extensible fmt chunk too small");
                format_tag = read_u16(fmt.data() + 24); // first two bytes of the SubFormat GUID
            }
            have_fmt = true;
            if (chunk_size % 2) in.seekg(1, std::ios::cur);
        } else if (std::memcmp(chunk_head, "data", 4) == 0) {
            layout.data_offset = in.tellg();
            layout.data_size = chunk_size;
            have_data = true;
            in.seekg(static_cast<std::streamoff>(chunk_size + (chunk_size % 2)), std::ios::cur);
        } else {
            in.seekg(static_cast<std::streamoff>(chunk_size + (chunk_size % 2)), std::ios::cur);
            if (!in) return fail_io("truncated chunk list");
        }
    }

    if (format_tag == kFormatPcm) {
        layout.info.is_float = false;
        if (layout.info.bits_per_sample != 16 && layout.info.bits_per_sample != 24 &&
            layout.info.bits_per_sample != 32)
            return fail_fmt("unsupported PCM bit depth " + std::to_string(layout.info.bits_per_sample));
    } else if (format_tag == kFormatFloat) {
        layout.info.is_float = true;
        if (layout.info.bits_per_sample != 32 && layout.info.bits_per_sample != 64)
            return fail_fmt("unsupported float bit depth " + std::to_string(layout.info.bits_per_sample));
    } else {
        return fail_fmt("unsupported codec tag " + std::to_string(format_tag));
    }
    if (layout.info.n_channels == 0) return fail_fmt("zero channels");
    if (layout.info.sample_rate <= 0) return fail_fmt("non-positive sample rate");
    const std::size_t bytes_per_frame = layout.info.n_channels * (layout.info.bits_per_sample / 8u);
    if (layout.block_align != bytes_per_frame) return fail_fmt("inconsistent block alignment");
    layout.info.n_frames = layout.data_size / bytes_per_frame;
    return layout;
}

inline double decode_sample(const unsigned char* p, int bits, bool is_float) {
    if (is_float) {
        if (bits == 32) {
            float v;
            std::memcpy(&v, p, 4);
            return static_cast<double>(v);
        }
        double v;
        std::memcpy(&v, p, 8);
        return v;
    }
    if (bits == 16) {
        std::int16_t v;
        std::memcpy(&v, p, 2);
        return static_cast<double>(v) / 32768.0;
    }
    if (bits == 24) {
        std::int32_t v = static_cast<std::int32_t>(p[0]) | (static_cast<std::int32_t>(p[1]) << 8) |
                         (static_cast<std::int32_t>(static_cast<std::int8_t>(p[2])) << 16);
        return static_cast<double>(v) / 8388608.0;
    }
    std::int32_t v;
    std::memcpy(&v, p, 4);
    return static_cast<double>(v) / 2147483648.0;
}

} // namespace detail

/// Header-only probe: sample rate, channel and frame counts without
/// touching the payload.
inline WavInfo wav_info(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    return detail::parse_wav_header(in, path).info;
}

/// Read a contiguous frame range from a WAV file into a planar clip.
/// Integer payloads are scaled by 1/2^(bits-1); float payloads are taken
/// as-is and must be finite.
inline AudioClip read_wav_segment(const std::filesystem::path& path, std::size_t start_frame,
                                  std::size_t n_frames) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    const auto layout = detail::parse_wav_header(in, path);
    if (start_frame + n_frames > layout.info.n_frames)
        throw ArgumentError("segment [" + std::to_string(start_frame) + ", " +
                            std::to_string(start_frame + n_frames) + ") exceeds " +
                            std::to_string(layout.info.n_frames) + " frames: " + path.string());

    const std::size_t bytes_per_sample = layout.info.bits_per_sample / 8u;
    const std::size_t bytes_per_frame = layout.info.n_channels * bytes_per_sample;
    in.clear();
    in.seekg(layout.data_offset + static_cast<std::streamoff>(start_frame * bytes_per_frame));
    std::vector<unsigned char> raw(n_frames * bytes_per_frame);
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
        throw IoError("truncated payload: " + path.string());

    AudioClip clip(layout.info.sample_rate, layout.info.n_channels, n_frames);
    for (std::size_t n = 0; n < n_frames; ++n) {
        const unsigned char* frame = raw.data() + n * bytes_per_frame;
        for (std::size_t c = 0; c < layout.info.n_channels; ++c) {
            const double v = detail::decode_sample(frame + c * bytes_per_sample,
                                                   layout.info.bits_per_sample, layout.info.is_float);
            if (!std::isfinite(v))
                throw DataError("non-finite sample in float payload: " + path.string());
            clip.samples[c][n] = v;
        }
    }
    return clip;
}

inline AudioClip read_wav(const std::filesystem::path& path) {
    const WavInfo info = wav_info(path);
    return read_wav_segment(path, 0, info.n_frames);
}

/// Write a clip as RIFF/WAVE. Integer formats round to nearest and
/// saturate at full scale; float32 write round-trips exactly through
/// read_wav for values representable in 32 bits, float64 is lossless.
inline void write_wav(const AudioClip& clip, const std::filesystem::path& path,
                      WavFormat format = WavFormat::float32) {
    validate(clip);
    const std::size_t channels = clip.n_channels();
    const std::size_t frames = clip.n_frames();

    int bits = 0;
    bool is_float = false;
    switch (format) {
    case WavFormat::pcm16: bits = 16; break;
    case WavFormat::pcm24: bits = 24; break;
    case WavFormat::float32: bits = 32; is_float = true; break;
    case WavFormat::float64: bits = 64; is_float = true; break;
    }
    const std::size_t bytes_per_sample = bits / 8u;
    const std::size_t data_size = frames * channels * bytes_per_sample;

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write: " + path.string());

    const auto put_u16 = [&](std::uint16_t v) {
        const unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
        out.write(reinterpret_cast<const char*>(b), 2);
    };
    const auto put_u32 = [&](std::uint32_t v) {
        const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                    static_cast<unsigned char>(v >> 16),
                                    static_cast<unsigned char>(v >> 24)};
        out.write(reinterpret_cast<const char*>(b), 4);
    };

    const std::uint32_t fact_size = is_float ? 12u : 0u;
    out.write("RIFF", 4);
    put_u32(static_cast<std::uint32_t>(4 + 24 + fact_size + 8 + data_size));
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    put_u32(16);
    put_u16(is_float ? detail::kFormatFloat : detail::kFormatPcm);
    put_u16(static_cast<std::uint16_t>(channels));
    put_u32(static_cast<std::uint32_t>(clip.sample_rate));
    put_u32(static_cast<std::uint32_t>(clip.sample_rate * channels * bytes_per_sample));
    put_u16(static_cast<std::uint16_t>(channels * bytes_per_sample));
    put_u16(static_cast<std::uint16_t>(bits));
    if (is_float) {
        out.write("fact", 4);
        put_u32(4);
        put_u32(static_cast<std::uint32_t>(frames));
    }
    out.write("data", 4);
    put_u32(static_cast<std::uint32_t>(data_size));

    std::vector<unsigned char> raw(data_size);
    std::size_t pos = 0;
    for (std::size_t n = 0; n < frames; ++n) {
        for (std::size_t c = 0; c < channels; ++c) {
            const double v = clip.samples[c][n];
            unsigned char* p = raw.data() + pos;
            switch (format) {
            case WavFormat::pcm16: {
                const long q = std::lrint(v * 32768.0);
                const auto s = static_cast<std::int16_t>(std::clamp<long>(q, -32768, 32767));
                std::memcpy(p, &s, 2);
                break;
            }
            case WavFormat::pcm24: {
                const long q = std::lrint(v * 8388608.0);
                const auto s = static_cast<std::int32_t>(std::clamp<long>(q, -8388608, 8388607));
                p[0] = static_cast<unsigned char>(s);
                p[1] = static_cast<unsigned char>(s >> 8);
                p[2] = static_cast<unsigned char>(s >> 16);
                break;
            }
            case WavFormat::float32: {
                const float f = static_cast<float>(v);
                std::memcpy(p, &f, 4);
                break;
            }
            case WavFormat::float64:
                std::memcpy(p, &v, 8);
                break;
            }
            pos += bytes_per_sample;
        }
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (data_size % 2) out.put(0);
    if (!out) throw IoError("short write: " + path.string());
}

} // namespace loudkit
