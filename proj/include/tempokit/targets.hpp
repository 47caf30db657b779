#pragma once

#include "tempokit/annotation.hpp"

#include <Eigen/Dense>

namespace tempokit {

// Supervision for one spectrogram: a widened per-frame beat target and a
// smoothed tempo distribution.
struct FrameTargets {
    Eigen::ArrayXd beat_target;  // per frame, in [0, 1]
    Eigen::ArrayXd tempo_target; // per bin, sums to 1
};

// Beat target: 1.0 at frame round(t * fps) for every beat t and 0.5 at the
// two adjacent frames (overlaps keep the larger value). Tempo target: 0.5 at
// bin round(bpm) and 0.25 at each neighbour, renormalized when clipped at
// the range edges. Rounding is half-up (std::llround), so a beat at 0.50 s
// with fps 105 maps to frame 53.
FrameTargets encode_targets(const ClipAnnotation& annotation, double fps,
                            Eigen::Index num_frames, int tempo_bins);

} // namespace tempokit
