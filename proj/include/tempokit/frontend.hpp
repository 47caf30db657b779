#pragma once

#include "tempokit/audio.hpp"

#include <Eigen/Dense>

#include <vector>

namespace tempokit {

// STFT + log filterbank parameters. The augmentation FPS set {95, 100, 105}
// is handled by per-frame sample centers, so non-integer hops are exact.
struct FrontendConfig {
    double fps = 100.0;
    int window_size = 2048; // power of two
    int num_bands = 81;
    double fmin = 30.0;
    double fmax = 17000.0;
    double log_offset = 1.0;

    void validate(int sample_rate) const;
};

// Log-magnitude filterbank features, one row per frame.
struct Spectrogram {
    Eigen::MatrixXd values; // frames x bands
    double fps = 100.0;
    Eigen::ArrayXd band_centers; // Hz

    Eigen::Index frames() const { return values.rows(); }
    Eigen::Index bands() const { return values.cols(); }
};

// Frame count for a clip: ceil(num_samples * fps / sample_rate). This is the
// exact per-frame-center arithmetic; it agrees with ceil(num_samples / hop)
// whenever sample_rate / fps is an integer.
Eigen::Index frame_count(Eigen::Index num_samples, double fps, int sample_rate);

// Hann-windowed STFT magnitudes through a triangular log-spaced filterbank,
// then log(value + log_offset). Frame t is centered at sample
// round(t * sample_rate / fps); edges are zero-padded.
Spectrogram compute_spectrogram(const AudioClip& clip, const FrontendConfig& cfg);

// One spectrogram per FPS value over the same audio.
std::vector<Spectrogram> augment_fps(const AudioClip& clip, const FrontendConfig& cfg,
                                     const std::vector<double>& fps_set = {95.0, 100.0, 105.0});

} // namespace tempokit
