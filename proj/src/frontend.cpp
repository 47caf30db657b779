#include "tempokit/frontend.hpp"
#include "tempokit/error.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>

namespace tempokit {

void FrontendConfig::validate(int sample_rate) const {
    if (fps <= 0.0) raise(Errc::invalid_config, "fps must be positive");
    if (window_size <= 0 || (window_size & (window_size - 1)) != 0) {
        raise(Errc::invalid_config, "window_size must be a positive power of two");
    }
    if (window_size < sample_rate / fps) {
        raise(Errc::invalid_config, "window_size must cover at least one hop");
    }
    if (num_bands <= 0) raise(Errc::invalid_config, "num_bands must be positive");
    if (!(0.0 < fmin && fmin < fmax && fmax <= sample_rate / 2.0)) {
        raise(Errc::invalid_config, "need 0 < fmin < fmax <= sample_rate/2");
    }
    if (log_offset <= 0.0) raise(Errc::invalid_config, "log_offset must be positive");
}

Eigen::Index frame_count(Eigen::Index num_samples, double fps, int sample_rate) {
    return static_cast<Eigen::Index>(
        std::ceil(static_cast<double>(num_samples) * fps / sample_rate));
}

namespace {

// Triangular filterbank on log-spaced centers. Row b holds the weights of
// band b over the positive-frequency FFT bins; peak weight is 1.
struct Filterbank {
    Eigen::MatrixXd weights; // bands x (window/2 + 1)
    Eigen::ArrayXd centers;  // Hz, one per band
};

Filterbank make_filterbank(const FrontendConfig& cfg, int sample_rate) {
    const int num_bins = cfg.window_size / 2 + 1;
    const double bin_hz = static_cast<double>(sample_rate) / cfg.window_size;

    // num_bands + 2 log-spaced edge frequencies from fmin to fmax; band b
    // peaks at edge b+1 and spans (edge b, edge b+2).
    const int ne = cfg.num_bands + 2;
    Eigen::ArrayXd edges(ne);
    const double ratio = std::log(cfg.fmax / cfg.fmin) / (ne - 1);
    for (int j = 0; j < ne; ++j) edges[j] = cfg.fmin * std::exp(ratio * j);

    Filterbank fb;
    fb.weights = Eigen::MatrixXd::Zero(cfg.num_bands, num_bins);
    fb.centers.resize(cfg.num_bands);
    for (int b = 0; b < cfg.num_bands; ++b) {
        const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
        fb.centers[b] = mid;
        for (int k = 0; k < num_bins; ++k) {
            const double f = k * bin_hz;
            if (f <= lo || f >= hi) continue;
            fb.weights(b, k) = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
        }
    }
    return fb;
}

} // namespace

Spectrogram compute_spectrogram(const AudioClip& clip, const FrontendConfig& cfg) {
    cfg.validate(clip.sample_rate);
    const Eigen::Index n = clip.samples.size();
    const double hop = clip.sample_rate / cfg.fps;
    if (static_cast<double>(n) < hop) {
        raise(Errc::clip_too_short, "clip shorter than one hop");
    }

    const Eigen::Index num_frames = frame_count(n, cfg.fps, clip.sample_rate);
    const int win = cfg.window_size;
    const int num_bins = win / 2 + 1;

    Eigen::ArrayXd window(win);
    for (int i = 0; i < win; ++i) {
        window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (win - 1));
    }

    const Filterbank fb = make_filterbank(cfg, clip.sample_rate);

    Eigen::FFT<double> fft;
    std::vector<double> frame(static_cast<std::size_t>(win));
    std::vector<std::complex<double>> spectrum;

    Spectrogram spec;
    spec.fps = cfg.fps;
    spec.band_centers = fb.centers;
    spec.values.resize(num_frames, cfg.num_bands);

    Eigen::VectorXd mags(num_bins);
    for (Eigen::Index t = 0; t < num_frames; ++t) {
        const auto center = static_cast<Eigen::Index>(
            std::llround(static_cast<double>(t) * clip.sample_rate / cfg.fps));
        const Eigen::Index start = center - win / 2;
        for (int i = 0; i < win; ++i) {
            const Eigen::Index s = start + i;
            frame[static_cast<std::size_t>(i)] =
                (s >= 0 && s < n) ? clip.samples[s] * window[i] : 0.0;
        }
        fft.fwd(spectrum, frame);
        for (int k = 0; k < num_bins; ++k) mags[k] = std::abs(spectrum[static_cast<std::size_t>(k)]);
        spec.values.row(t) =
            ((fb.weights * mags).array() + cfg.log_offset).log().transpose();
    }
    return spec;
}

std::vector<Spectrogram> augment_fps(const AudioClip& clip, const FrontendConfig& cfg,
                                     const std::vector<double>& fps_set) {
    if (fps_set.empty()) raise(Errc::invalid_config, "fps_set must be non-empty");
    std::vector<Spectrogram> out;
    out.reserve(fps_set.size());
    for (double fps : fps_set) {
        FrontendConfig c = cfg;
        c.fps = fps;
        out.push_back(compute_spectrogram(clip, c));
    }
    return out;
}

} // namespace tempokit
