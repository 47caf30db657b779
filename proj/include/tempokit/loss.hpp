#pragma once

#include "tempokit/targets.hpp"
#include "tempokit/tcn.hpp"

#include <cmath>

namespace tempokit {

template <typename Scalar>
struct MultitaskLoss {
    Scalar total = Scalar(0);
    Scalar beat_term = Scalar(0);
    Scalar tempo_term = Scalar(0);
    // loss gradients at the pre-sigmoid / pre-softmax logits
    Vector<Scalar> d_beat_logits;
    Vector<Scalar> d_tempo_logits;
};

// Mean per-frame binary cross-entropy on the beat head (soft labels) plus
// categorical cross-entropy on the tempo head, summed with unit weights.
// Probabilities are floored at 1e-12 inside the logs; terms with a zero
// coefficient contribute nothing, so the loss of a perfect prediction equals
// the targets' own entropy.
template <typename Scalar>
MultitaskLoss<Scalar> multitask_loss(const ModelOutput<Scalar>& output,
                                     const FrameTargets& targets) {
    const Eigen::Index frames = output.beat_activation.size();
    const Eigen::Index bins = output.tempo_activation.size();
    if (targets.beat_target.size() != frames || targets.tempo_target.size() != bins) {
        raise(Errc::shape_mismatch, "targets do not match the model output");
    }

    constexpr double floor = 1e-12;
    MultitaskLoss<Scalar> loss;
    loss.d_beat_logits.resize(frames);
    loss.d_tempo_logits.resize(bins);

    double beat_acc = 0.0;
    for (Eigen::Index t = 0; t < frames; ++t) {
        const double p = static_cast<double>(output.beat_activation[t]);
        const double y = targets.beat_target[t];
        if (y > 0.0) beat_acc -= y * std::log(std::max(p, floor));
        if (y < 1.0) beat_acc -= (1.0 - y) * std::log(std::max(1.0 - p, floor));
        loss.d_beat_logits[t] = static_cast<Scalar>((p - y) / static_cast<double>(frames));
    }
    loss.beat_term = static_cast<Scalar>(beat_acc / static_cast<double>(frames));

    double tempo_acc = 0.0;
    for (Eigen::Index b = 0; b < bins; ++b) {
        const double p = static_cast<double>(output.tempo_activation[b]);
        const double q = targets.tempo_target[b];
        if (q > 0.0) tempo_acc -= q * std::log(std::max(p, floor));
        loss.d_tempo_logits[b] = static_cast<Scalar>(p - q);
    }
    loss.tempo_term = static_cast<Scalar>(tempo_acc);

    loss.total = loss.beat_term + loss.tempo_term;
    return loss;
}

} // namespace tempokit
