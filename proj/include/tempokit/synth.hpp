#pragma once

#include "tempokit/annotation.hpp"
#include "tempokit/audio.hpp"
#include "tempokit/postproc.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace tempokit {

// Click-track synthesis: a decaying sinusoid burst at every beat over
// silence, with optional Gaussian timing jitter.
struct ClickTrackSpec {
    double bpm = 120.0;
    double duration = 10.0; // seconds
    int sample_rate = 44100;
    double click_freq = 1000.0;  // Hz
    double click_len = 0.02;     // seconds
    double timing_jitter_std = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

// Synthetic beat activation: triangular pulses of height 1 on a beat grid,
// plus Gaussian noise, clipped to [0, 1].
struct SyntheticActivationSpec {
    double bpm = 120.0;
    double fps = 100.0;
    double duration = 10.0; // seconds
    int pulse_width = 1;    // half-width in frames; shoulders taper to zero
    double noise_std = 0.0;
    double phase = 0.0; // seconds
    std::uint64_t seed = 0;

    void validate() const;
};

std::pair<AudioClip, ClipAnnotation> gen_click_track(const ClickTrackSpec& spec);

std::pair<BeatActivation, ClipAnnotation> gen_activation(const SyntheticActivationSpec& spec);

// Pulse train over arbitrary beat times (e.g. a jittered annotation); used
// as the oracle activation source by the evaluation harness.
BeatActivation activation_from_beats(const std::vector<double>& beat_times, double fps,
                                     double duration, int pulse_width, double noise_std,
                                     std::uint64_t seed);

// Independent tempo oracle: exhaustively scores every integer lag with a
// direct double loop. Deliberately shares no code with the decoders in
// postproc.hpp, so tests can cross-check them against it.
double brute_force_tempo(const BeatActivation& act, double bpm_min, double bpm_max);

} // namespace tempokit
