#include "tempokit/synth.hpp"
#include "tempokit/error.hpp"
#include "tempokit/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tempokit {

void ClickTrackSpec::validate() const {
    if (!(0.0 < bpm && bpm < 1000.0)) raise(Errc::invalid_spec, "bpm must lie in (0, 1000)");
    if (duration <= 0.0) raise(Errc::invalid_spec, "duration must be positive");
    if (sample_rate <= 0) raise(Errc::invalid_spec, "sample_rate must be positive");
    if (click_freq <= 0.0 || click_freq >= sample_rate / 2.0) {
        raise(Errc::invalid_spec, "click_freq must lie below Nyquist");
    }
    if (click_len <= 0.0) raise(Errc::invalid_spec, "click_len must be positive");
    if (timing_jitter_std < 0.0) raise(Errc::invalid_spec, "jitter std must be >= 0");
}

void SyntheticActivationSpec::validate() const {
    if (!(0.0 < bpm && bpm < 1000.0)) raise(Errc::invalid_spec, "bpm must lie in (0, 1000)");
    if (fps <= 0.0) raise(Errc::invalid_spec, "fps must be positive");
    if (duration <= 0.0) raise(Errc::invalid_spec, "duration must be positive");
    if (pulse_width < 1) raise(Errc::invalid_spec, "pulse_width must be >= 1");
    if (noise_std < 0.0) raise(Errc::invalid_spec, "noise std must be >= 0");
    if (phase < 0.0) raise(Errc::invalid_spec, "phase must be >= 0");
}

std::pair<AudioClip, ClipAnnotation> gen_click_track(const ClickTrackSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    ClipAnnotation annotation;
    annotation.reference_bpm = spec.bpm;
    const double ibi = 60.0 / spec.bpm;
    for (int k = 0;; ++k) {
        double t = k * ibi;
        if (spec.timing_jitter_std > 0.0) t += rng.normal(0.0, spec.timing_jitter_std);
        t = std::max(t, 0.0);
        if (t >= spec.duration) break;
        annotation.beat_times.push_back(t);
    }

    AudioClip clip;
    clip.sample_rate = spec.sample_rate;
    const auto num_samples =
        static_cast<Eigen::Index>(std::llround(spec.duration * spec.sample_rate));
    clip.samples = Eigen::ArrayXd::Zero(num_samples);

    const auto click_samples =
        static_cast<Eigen::Index>(std::llround(spec.click_len * spec.sample_rate));
    const double decay = 5.0 / spec.click_len; // ~e^-5 at the tail
    for (double beat : annotation.beat_times) {
        const auto start = static_cast<Eigen::Index>(std::llround(beat * spec.sample_rate));
        for (Eigen::Index i = 0; i < click_samples && start + i < num_samples; ++i) {
            const double t = static_cast<double>(i) / spec.sample_rate;
            clip.samples[start + i] +=
                0.8 * std::sin(2.0 * std::numbers::pi * spec.click_freq * t) *
                std::exp(-decay * t);
        }
    }
    clip.samples = clip.samples.cwiseMax(-1.0).cwiseMin(1.0);
    return {std::move(clip), std::move(annotation)};
}

BeatActivation activation_from_beats(const std::vector<double>& beat_times, double fps,
                                     double duration, int pulse_width, double noise_std,
                                     std::uint64_t seed) {
    const auto num_frames = static_cast<Eigen::Index>(std::llround(duration * fps));
    BeatActivation act;
    act.fps = fps;
    act.values = Eigen::ArrayXd::Zero(std::max<Eigen::Index>(num_frames, 1));

    for (double beat : beat_times) {
        const auto center = static_cast<Eigen::Index>(std::llround(beat * fps));
        for (Eigen::Index off = -pulse_width; off <= pulse_width; ++off) {
            const Eigen::Index f = center + off;
            if (f < 0 || f >= act.values.size()) continue;
            const double v = 1.0 - std::abs(static_cast<double>(off)) / (pulse_width + 1.0);
            act.values[f] = std::max(act.values[f], v);
        }
    }
    if (noise_std > 0.0) {
        Rng rng(seed);
        for (Eigen::Index f = 0; f < act.values.size(); ++f) {
            act.values[f] += rng.normal(0.0, noise_std);
        }
    }
    act.values = act.values.cwiseMax(0.0).cwiseMin(1.0);
    return act;
}

std::pair<BeatActivation, ClipAnnotation> gen_activation(const SyntheticActivationSpec& spec) {
    spec.validate();

    ClipAnnotation annotation;
    annotation.reference_bpm = spec.bpm;
    const double ibi = 60.0 / spec.bpm;
    for (int k = 0;; ++k) {
        const double t = spec.phase + k * ibi;
        if (t >= spec.duration) break;
        annotation.beat_times.push_back(t);
    }

    BeatActivation act = activation_from_beats(annotation.beat_times, spec.fps, spec.duration,
                                               spec.pulse_width, spec.noise_std, spec.seed);
    return {std::move(act), std::move(annotation)};
}

double brute_force_tempo(const BeatActivation& act, double bpm_min, double bpm_max) {
    if (act.fps <= 0.0 || bpm_min <= 0.0 || bpm_max <= bpm_min) {
        raise(Errc::invalid_config, "bad oracle parameters");
    }
    const long n = static_cast<long>(act.values.size());
    const long lag_lo = static_cast<long>(std::ceil(60.0 * act.fps / bpm_max));
    const long lag_hi = static_cast<long>(std::floor(60.0 * act.fps / bpm_min));
    if (lag_lo < 1 || n < 2 * lag_lo) {
        raise(Errc::insufficient_length, "activation too short for the oracle lag range");
    }

    long best_lag = 0;
    double best_score = -1.0;
    for (long lag = lag_lo; lag <= lag_hi && lag < n; ++lag) {
        double sum = 0.0;
        long count = 0;
        for (long i = 0; i + lag < n; ++i) {
            sum += act.values[i] * act.values[i + lag];
            ++count;
        }
        const double score = sum / static_cast<double>(count);
        if (score > best_score) { // ties keep the smallest lag
            best_score = score;
            best_lag = lag;
        }
    }
    return 60.0 * act.fps / static_cast<double>(best_lag);
}

} // namespace tempokit
