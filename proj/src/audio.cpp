#include "tempokit/audio.hpp"
#include "tempokit/error.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace tempokit {

namespace {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatIeeeFloat = 0x0003;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

struct FmtChunk {
    std::uint16_t format = 0;
    std::uint16_t channels = 0;
    std::uint32_t sample_rate = 0;
    std::uint16_t bits_per_sample = 0;
};

double decode_sample(const unsigned char* p, std::uint16_t bits, std::uint16_t format) {
    if (format == kFormatIeeeFloat) {
        float v;
        std::memcpy(&v, p, 4);
        return std::clamp(static_cast<double>(v), -1.0, 1.0);
    }
    switch (bits) {
        case 8:
            // 8-bit WAV is unsigned
            return (static_cast<int>(p[0]) - 128) / 128.0;
        case 16: {
            const std::int16_t v = static_cast<std::int16_t>(p[0] | (p[1] << 8));
            return v / 32768.0;
        }
        case 24: {
            std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
            if (v & 0x800000) v |= ~0xFFFFFF;
            return v / 8388608.0;
        }
        case 32: {
            std::int32_t v;
            std::memcpy(&v, p, 4);
            return v / 2147483648.0;
        }
        default:
            raise(Errc::unsupported_encoding, "unsupported bit depth " + std::to_string(bits));
    }
}

} // namespace

AudioClip load_audio(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::file_not_found, path);

    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        raise(Errc::malformed_header, path + ": not a RIFF/WAVE file");
    }

    FmtChunk fmt;
    bool have_fmt = false;
    const unsigned char* data = nullptr;
    std::size_t data_size = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const char* tag = reinterpret_cast<const char*>(bytes.data() + pos);
        const std::uint32_t chunk_size = read_u32(bytes.data() + pos + 4);
        const std::size_t body = pos + 8;
        if (body + chunk_size > bytes.size()) {
            raise(Errc::malformed_header, path + ": chunk extends past end of file");
        }
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            if (chunk_size < 16) raise(Errc::malformed_header, path + ": fmt chunk too small");
            const unsigned char* f = bytes.data() + body;
            fmt.format = read_u16(f + 0);
            fmt.channels = read_u16(f + 2);
            fmt.sample_rate = read_u32(f + 4);
            fmt.bits_per_sample = read_u16(f + 14);
            if (fmt.format == kFormatExtensible) {
                // sub-format code sits in the first two bytes of the GUID
                if (chunk_size < 40) raise(Errc::malformed_header, path + ": extensible fmt chunk too small");
                fmt.format = read_u16(f + 24);
            }
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            data = bytes.data() + body;
            data_size = chunk_size;
        }
        // chunks are word-aligned
        pos = body + chunk_size + (chunk_size & 1);
    }

    if (!have_fmt || data == nullptr) {
        raise(Errc::malformed_header, path + ": missing fmt or data chunk");
    }
    if (fmt.format != kFormatPcm && fmt.format != kFormatIeeeFloat) {
        raise(Errc::unsupported_encoding,
              path + ": compressed or non-PCM format tag " + std::to_string(fmt.format));
    }
    if (fmt.format == kFormatIeeeFloat && fmt.bits_per_sample != 32) {
        raise(Errc::unsupported_encoding, path + ": only 32-bit float is supported");
    }
    if (fmt.channels == 0 || fmt.sample_rate == 0) {
        raise(Errc::malformed_header, path + ": zero channels or sample rate");
    }

    const std::size_t bytes_per_sample = fmt.bits_per_sample / 8;
    if (bytes_per_sample == 0) raise(Errc::malformed_header, path + ": zero bit depth");
    const std::size_t frame_bytes = bytes_per_sample * fmt.channels;
    const std::size_t num_frames = data_size / frame_bytes;

    AudioClip clip;
    clip.sample_rate = static_cast<int>(fmt.sample_rate);
    clip.samples.resize(static_cast<Eigen::Index>(num_frames));
    for (std::size_t i = 0; i < num_frames; ++i) {
        double acc = 0.0;
        for (std::uint16_t c = 0; c < fmt.channels; ++c) {
            acc += decode_sample(data + i * frame_bytes + c * bytes_per_sample,
                                 fmt.bits_per_sample, fmt.format);
        }
        clip.samples[static_cast<Eigen::Index>(i)] = acc / fmt.channels;
    }
    return clip;
}

void save_audio_wav16(const std::string& path, const AudioClip& clip) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::file_not_found, "cannot open for writing: " + path);

    const std::uint32_t num_samples = static_cast<std::uint32_t>(clip.samples.size());
    const std::uint32_t data_size = num_samples * 2;
    const std::uint32_t riff_size = 36 + data_size;

    auto put_u32 = [&](std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                              static_cast<unsigned char>((v >> 8) & 0xFF),
                              static_cast<unsigned char>((v >> 16) & 0xFF),
                              static_cast<unsigned char>((v >> 24) & 0xFF)};
        out.write(reinterpret_cast<const char*>(b), 4);
    };
    auto put_u16 = [&](std::uint16_t v) {
        unsigned char b[2] = {static_cast<unsigned char>(v & 0xFF),
                              static_cast<unsigned char>((v >> 8) & 0xFF)};
        out.write(reinterpret_cast<const char*>(b), 2);
    };

    out.write("RIFF", 4);
    put_u32(riff_size);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    put_u32(16);
    put_u16(kFormatPcm);
    put_u16(1); // mono
    put_u32(static_cast<std::uint32_t>(clip.sample_rate));
    put_u32(static_cast<std::uint32_t>(clip.sample_rate) * 2);
    put_u16(2);
    put_u16(16);
    out.write("data", 4);
    put_u32(data_size);
    for (Eigen::Index i = 0; i < clip.samples.size(); ++i) {
        const double v = std::clamp(clip.samples[i], -1.0, 1.0);
        const auto q = static_cast<std::int16_t>(std::lround(v * 32767.0));
        put_u16(static_cast<std::uint16_t>(q));
    }
    if (!out) raise(Errc::file_not_found, "write failed: " + path);
}

} // namespace tempokit
