#include "tempokit/targets.hpp"
#include "tempokit/error.hpp"
#include "tempokit/postproc.hpp"

#include <cmath>

namespace tempokit {

FrameTargets encode_targets(const ClipAnnotation& annotation, double fps,
                            Eigen::Index num_frames, int tempo_bins) {
    if (fps <= 0.0) raise(Errc::invalid_config, "fps must be positive");
    if (num_frames < 1) raise(Errc::invalid_config, "need at least one frame");
    if (tempo_bins < 2) raise(Errc::invalid_config, "tempo_bins must be >= 2");

    FrameTargets targets;
    targets.beat_target = Eigen::ArrayXd::Zero(num_frames);
    for (double t : annotation.beat_times) {
        const auto frame = static_cast<Eigen::Index>(std::llround(t * fps));
        if (frame < 0 || frame >= num_frames) {
            raise(Errc::beat_out_of_range,
                  "beat at " + std::to_string(t) + " s falls outside the clip");
        }
        targets.beat_target[frame] = 1.0;
        if (frame > 0) {
            targets.beat_target[frame - 1] = std::max(targets.beat_target[frame - 1], 0.5);
        }
        if (frame + 1 < num_frames) {
            targets.beat_target[frame + 1] = std::max(targets.beat_target[frame + 1], 0.5);
        }
    }

    double bpm = 0.0;
    if (annotation.reference_bpm) {
        bpm = *annotation.reference_bpm;
    } else {
        if (annotation.beat_times.size() < 2) {
            raise(Errc::too_few_beats, "cannot infer a tempo target from fewer than 2 beats");
        }
        bpm = 60.0 / median_interbeat_interval(annotation.beat_times);
    }
    const auto bin = static_cast<Eigen::Index>(std::llround(bpm));
    if (bin < 0 || bin >= tempo_bins) {
        raise(Errc::tempo_out_of_range,
              std::to_string(bpm) + " BPM does not fit the tempo bins");
    }

    targets.tempo_target = Eigen::ArrayXd::Zero(tempo_bins);
    targets.tempo_target[bin] = 0.5;
    if (bin > 0) targets.tempo_target[bin - 1] = 0.25;
    if (bin + 1 < tempo_bins) targets.tempo_target[bin + 1] = 0.25;
    targets.tempo_target /= targets.tempo_target.sum();
    return targets;
}

} // namespace tempokit
