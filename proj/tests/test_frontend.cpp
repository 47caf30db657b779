#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tempokit/audio.hpp"
#include "tempokit/error.hpp"
#include "tempokit/frontend.hpp"
#include "tempokit/rng.hpp"

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <vector>

using namespace tempokit;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const auto dir = fs::temp_directory_path() / "tempokit_frontend_tests";
    fs::create_directories(dir);
    return dir;
}

void put_u32(std::vector<unsigned char>& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}
void put_u16(std::vector<unsigned char>& b, std::uint16_t v) {
    b.push_back(static_cast<unsigned char>(v & 0xFF));
    b.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
}

// hand-rolled WAV writer so load_audio is tested against independent bytes
std::string write_wav(const std::string& name, std::uint16_t format_tag, std::uint16_t bits,
                      std::uint16_t channels, std::uint32_t rate,
                      const std::vector<unsigned char>& payload) {
    std::vector<unsigned char> b;
    b.insert(b.end(), {'R', 'I', 'F', 'F'});
    put_u32(b, 36 + static_cast<std::uint32_t>(payload.size()));
    b.insert(b.end(), {'W', 'A', 'V', 'E'});
    b.insert(b.end(), {'f', 'm', 't', ' '});
    put_u32(b, 16);
    put_u16(b, format_tag);
    put_u16(b, channels);
    put_u32(b, rate);
    put_u32(b, rate * channels * bits / 8);
    put_u16(b, static_cast<std::uint16_t>(channels * bits / 8));
    put_u16(b, bits);
    b.insert(b.end(), {'d', 'a', 't', 'a'});
    put_u32(b, static_cast<std::uint32_t>(payload.size()));
    b.insert(b.end(), payload.begin(), payload.end());

    const auto path = (temp_dir() / name).string();
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
    return path;
}

std::vector<unsigned char> int16_payload(const std::vector<std::int16_t>& samples) {
    std::vector<unsigned char> p;
    for (std::int16_t s : samples) {
        p.push_back(static_cast<unsigned char>(s & 0xFF));
        p.push_back(static_cast<unsigned char>((s >> 8) & 0xFF));
    }
    return p;
}

AudioClip sine_clip(double freq, double seconds, double amp = 0.5, int rate = 44100) {
    AudioClip clip;
    clip.sample_rate = rate;
    const auto n = static_cast<Eigen::Index>(std::llround(seconds * rate));
    clip.samples.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        clip.samples[i] = amp * std::sin(2.0 * std::numbers::pi * freq * i / rate);
    }
    return clip;
}

} // namespace

TEST_CASE("load_audio decodes 16-bit mono at 44.1 kHz") {
    std::vector<std::int16_t> samples(44100, 0);
    samples[0] = 16384;
    samples[1] = -32768;
    const auto path = write_wav("mono16.wav", 1, 16, 1, 44100, int16_payload(samples));

    const AudioClip clip = load_audio(path);
    CHECK(clip.sample_rate == 44100);
    CHECK(clip.samples.size() == 44100); // 1.0 s at 44.1 kHz
    CHECK(clip.samples[0] == doctest::Approx(0.5));
    CHECK(clip.samples[1] == doctest::Approx(-1.0));
}

TEST_CASE("load_audio downmixes stereo by mean") {
    // one stereo frame (0.2, 0.6)
    std::vector<std::int16_t> frame = {static_cast<std::int16_t>(std::lround(0.2 * 32768)),
                                       static_cast<std::int16_t>(std::lround(0.6 * 32768))};
    const auto path = write_wav("stereo16.wav", 1, 16, 2, 44100, int16_payload(frame));
    const AudioClip clip = load_audio(path);
    CHECK(clip.samples.size() == 1);
    CHECK(clip.samples[0] == doctest::Approx(0.4).epsilon(1e-4));
}

TEST_CASE("load_audio handles 8/24/32-bit and float32") {
    {
        std::vector<unsigned char> p = {128 + 64}; // +0.5 in unsigned 8-bit
        const auto clip = load_audio(write_wav("m8.wav", 1, 8, 1, 44100, p));
        CHECK(clip.samples[0] == doctest::Approx(0.5));
    }
    {
        std::vector<unsigned char> p = {0x00, 0x00, 0x40}; // 0x400000 = 2^22 -> 0.5
        const auto clip = load_audio(write_wav("m24.wav", 1, 24, 1, 44100, p));
        CHECK(clip.samples[0] == doctest::Approx(0.5));
    }
    {
        std::vector<unsigned char> p = {0x00, 0x00, 0x00, 0x40}; // 2^30 -> 0.5
        const auto clip = load_audio(write_wav("m32.wav", 1, 32, 1, 44100, p));
        CHECK(clip.samples[0] == doctest::Approx(0.5));
    }
    {
        const float v = -0.25f;
        std::vector<unsigned char> p(4);
        std::memcpy(p.data(), &v, 4);
        const auto clip = load_audio(write_wav("f32.wav", 3, 32, 1, 44100, p));
        CHECK(clip.samples[0] == doctest::Approx(-0.25));
    }
}

TEST_CASE("load_audio error paths") {
    try {
        load_audio((temp_dir() / "nope.wav").string());
        FAIL("expected FileNotFound");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::file_not_found);
    }

    // compressed format tag (MPEG layer 3)
    const auto mp3ish = write_wav("mp3ish.wav", 0x0055, 16, 1, 44100, int16_payload({0, 0}));
    try {
        load_audio(mp3ish);
        FAIL("expected UnsupportedEncoding");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::unsupported_encoding);
    }

    const auto garbage = (temp_dir() / "garbage.wav").string();
    std::ofstream(garbage, std::ios::binary) << "this is not a wav file at all";
    try {
        load_audio(garbage);
        FAIL("expected MalformedHeader");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::malformed_header);
    }
}

TEST_CASE("wav round trip through the 16-bit writer") {
    AudioClip clip = sine_clip(300.0, 0.05);
    const auto path = (temp_dir() / "rt.wav").string();
    save_audio_wav16(path, clip);
    const AudioClip back = load_audio(path);
    REQUIRE(back.samples.size() == clip.samples.size());
    for (Eigen::Index i = 0; i < clip.samples.size(); i += 17) {
        CHECK(back.samples[i] == doctest::Approx(clip.samples[i]).epsilon(1e-3));
    }
}

TEST_CASE("frame count law") {
    // 44.1 kHz at fps 100 -> hop 441; 10 s -> 1000 frames
    CHECK(frame_count(441000, 100.0, 44100) == 1000);
    CHECK(frame_count(44100, 100.0, 44100) == 100);
    CHECK(frame_count(441000, 105.0, 44100) == 1050);
    CHECK(frame_count(441000, 95.0, 44100) == 950);

    for (Eigen::Index n : {4410L, 44100L, 441000L, 12345L, 99999L}) {
        for (double fps : {95.0, 100.0, 105.0, 61.5}) {
            const auto frames = frame_count(n, fps, 44100);
            CHECK(frames == static_cast<Eigen::Index>(
                                std::ceil(static_cast<double>(n) * fps / 44100.0)));
            // agrees with round-based hop arithmetic within one frame
            const double hop = std::round(44100.0 / fps);
            const auto hop_frames =
                static_cast<Eigen::Index>(std::ceil(static_cast<double>(n) / hop));
            CHECK(std::abs(frames - hop_frames) <= 1);

            AudioClip clip;
            clip.sample_rate = 44100;
            clip.samples = Eigen::ArrayXd::Zero(n);
            FrontendConfig cfg;
            cfg.fps = fps;
            CHECK(compute_spectrogram(clip, cfg).frames() == frames);
        }
    }
}

TEST_CASE("silence baseline equals log(log_offset)") {
    AudioClip clip;
    clip.sample_rate = 44100;
    clip.samples = Eigen::ArrayXd::Zero(44100);

    FrontendConfig cfg;
    const Spectrogram spec = compute_spectrogram(clip, cfg);
    CHECK((spec.values.array() == std::log(1.0)).all());

    cfg.log_offset = 2.5;
    const Spectrogram spec2 = compute_spectrogram(clip, cfg);
    CHECK((spec2.values.array() == std::log(2.5)).all());
}

TEST_CASE("determinism: identical clip and config give bit-identical spectrograms") {
    const AudioClip clip = sine_clip(441.0, 2.0);
    FrontendConfig cfg;
    const Spectrogram a = compute_spectrogram(clip, cfg);
    const Spectrogram b = compute_spectrogram(clip, cfg);
    CHECK(a.values == b.values);
}

TEST_CASE("energy monotonicity under amplitude scaling") {
    Rng rng(7);
    AudioClip clip;
    clip.sample_rate = 44100;
    clip.samples.resize(44100);
    for (Eigen::Index i = 0; i < clip.samples.size(); ++i) {
        clip.samples[i] = rng.uniform(-0.3, 0.3);
    }
    AudioClip louder = clip;
    louder.samples *= 3.0;

    FrontendConfig cfg;
    const Spectrogram a = compute_spectrogram(clip, cfg);
    const Spectrogram b = compute_spectrogram(louder, cfg);
    CHECK(((b.values - a.values).array() >= -1e-9).all());
}

TEST_CASE("441 Hz sinusoid peaks in the band nearest 441 Hz") {
    const AudioClip clip = sine_clip(441.0, 1.0);
    FrontendConfig cfg;
    const Spectrogram spec = compute_spectrogram(clip, cfg);

    const Eigen::VectorXd mean_spectrum = spec.values.colwise().mean();
    Eigen::Index argmax_band = 0;
    mean_spectrum.maxCoeff(&argmax_band);

    Eigen::Index nearest = 0;
    (spec.band_centers - 441.0).abs().minCoeff(&nearest);
    CHECK(argmax_band == nearest);

    // independent oracle: direct DFT of one Hann window, band energies from a
    // re-derived triangular filterbank
    const Eigen::Index center = 22050;
    const int win = cfg.window_size;
    std::vector<double> frame(static_cast<std::size_t>(win));
    for (int i = 0; i < win; ++i) {
        const Eigen::Index s = center - win / 2 + i;
        const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (win - 1));
        frame[static_cast<std::size_t>(i)] =
            (s >= 0 && s < clip.samples.size()) ? clip.samples[s] * w : 0.0;
    }
    const int bins = win / 2 + 1;
    std::vector<double> mag(static_cast<std::size_t>(bins));
    for (int k = 0; k < bins; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (int i = 0; i < win; ++i) {
            const double phi = -2.0 * std::numbers::pi * k * i / win;
            acc += frame[static_cast<std::size_t>(i)] *
                   std::complex<double>(std::cos(phi), std::sin(phi));
        }
        mag[static_cast<std::size_t>(k)] = std::abs(acc);
    }
    const int ne = cfg.num_bands + 2;
    std::vector<double> edges(static_cast<std::size_t>(ne));
    for (int j = 0; j < ne; ++j) {
        edges[static_cast<std::size_t>(j)] =
            cfg.fmin * std::pow(cfg.fmax / cfg.fmin, static_cast<double>(j) / (ne - 1));
    }
    Eigen::Index oracle_best = 0;
    double oracle_best_energy = -1.0;
    for (int b = 0; b < cfg.num_bands; ++b) {
        double energy = 0.0;
        for (int k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * clip.sample_rate / win;
            const double lo = edges[static_cast<std::size_t>(b)];
            const double mid = edges[static_cast<std::size_t>(b + 1)];
            const double hi = edges[static_cast<std::size_t>(b + 2)];
            if (f <= lo || f >= hi) continue;
            const double w = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
            energy += w * mag[static_cast<std::size_t>(k)];
        }
        if (energy > oracle_best_energy) {
            oracle_best_energy = energy;
            oracle_best = b;
        }
    }
    CHECK(oracle_best == nearest);
}

TEST_CASE("spectrogram error paths") {
    AudioClip clip;
    clip.sample_rate = 44100;
    clip.samples = Eigen::ArrayXd::Zero(100); // shorter than one hop at fps 100
    FrontendConfig cfg;
    try {
        compute_spectrogram(clip, cfg);
        FAIL("expected ClipTooShort");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::clip_too_short);
    }

    clip.samples = Eigen::ArrayXd::Zero(44100);
    cfg.fmin = -5.0;
    try {
        compute_spectrogram(clip, cfg);
        FAIL("expected InvalidConfig");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::invalid_config);
    }
}

TEST_CASE("augment_fps") {
    const AudioClip clip = sine_clip(441.0, 10.0);
    FrontendConfig cfg;

    const auto specs = augment_fps(clip, cfg);
    REQUIRE(specs.size() == 3); // the default set makes three spectrograms
    CHECK(specs[0].fps == 95.0);
    CHECK(specs[1].fps == 100.0);
    CHECK(specs[2].fps == 105.0);
    CHECK(specs[2].frames() == 1050);

    const auto single = augment_fps(clip, cfg, {100.0});
    REQUIRE(single.size() == 1);
    CHECK(single[0].values == compute_spectrogram(clip, cfg).values);

    CHECK_THROWS_AS(augment_fps(clip, cfg, {}), Error);
}
