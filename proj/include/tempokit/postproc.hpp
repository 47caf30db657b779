#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace tempokit {

// Per-frame beat probability, the common currency between the model and the
// decoders below.
struct BeatActivation {
    Eigen::ArrayXd values; // in [0, 1]
    double fps = 100.0;

    Eigen::Index frames() const { return values.size(); }
};

// Probability mass over 1-BPM histogram bins; bin b covers BPM b.
struct TempoActivation {
    Eigen::ArrayXd mass;

    Eigen::Index bins() const { return mass.size(); }
};

// Strictly ascending beat timestamps in seconds.
struct BeatSequence {
    std::vector<double> times;
};

struct TempoEstimate {
    double bpm = 0.0;
    double confidence = 0.0;
    std::string method;
    bool clamped = false; // set when the raw estimate fell outside [bpm_min, bpm_max]
};

struct DecoderConfig {
    double bpm_min = 40.0;
    double bpm_max = 250.0;
    double comb_alpha = 0.79;            // feedback gain of the resonating comb
    double dbn_tempo_change_prob = 0.02; // per-beat probability of a tempo change
    double dbn_tempo_penalty = 100.0;    // rate on |log tempo ratio|
    int smoothing_width = 7;             // Hamming kernel bins for detect_tempo

    void validate() const;
};

// Lag range in frames corresponding to [bpm_min, bpm_max] at a given frame rate:
// lag l <-> BPM 60*fps/l, l in [ceil(60*fps/bpm_max), floor(60*fps/bpm_min)].
struct LagRange {
    Eigen::Index min_lag = 0;
    Eigen::Index max_lag = 0;
};
LagRange lag_range(double fps, const DecoderConfig& cfg);

// --- direct detection -------------------------------------------------------

// Smooths the histogram with a Hamming kernel, takes the in-range argmax and
// refines it by parabolic interpolation through the neighbouring bins.
TempoEstimate detect_tempo(const TempoActivation& activation, const DecoderConfig& cfg);

// --- tempo estimation from the beat activation ------------------------------

TempoEstimate acf_tempo(const BeatActivation& act, const DecoderConfig& cfg);
TempoEstimate comb_tempo(const BeatActivation& act, const DecoderConfig& cfg);
TempoEstimate dbn_tempo(const BeatActivation& act, const DecoderConfig& cfg);

// --- beat decoding from the beat activation ---------------------------------

BeatSequence dbn_beats(const BeatActivation& act, const DecoderConfig& cfg);
BeatSequence crf_beats(const BeatActivation& act, const DecoderConfig& cfg);
BeatSequence comb_beats(const BeatActivation& act, const DecoderConfig& cfg);

// --- tempo inference from beats ----------------------------------------------

// 60 / median(inter-beat interval), clamped to [bpm_min, bpm_max]; confidence
// is the fraction of intervals within 10% of the median.
TempoEstimate infer_tempo_from_beats(const BeatSequence& beats, const DecoderConfig& cfg);

// Median inter-beat interval of an ascending time sequence (>= 2 entries).
double median_interbeat_interval(const std::vector<double>& times);

} // namespace tempokit
