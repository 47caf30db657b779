#pragma once

#include <Eigen/Dense>

#include <string>

namespace tempokit {

// Mono audio in [-1, 1].
struct AudioClip {
    Eigen::ArrayXd samples;
    int sample_rate = 44100;

    double duration() const {
        return static_cast<double>(samples.size()) / sample_rate;
    }
};

// Reads a RIFF PCM WAV file (8/16/24/32-bit integer or 32-bit float).
// Integer samples are scaled by 1/2^(bits-1); multichannel input is
// downmixed by arithmetic mean.
AudioClip load_audio(const std::string& path);

// Writes mono audio as 16-bit PCM.
void save_audio_wav16(const std::string& path, const AudioClip& clip);

} // namespace tempokit
