#include "tempokit/postproc.hpp"
#include "tempokit/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace tempokit {

namespace {

constexpr double kLogFloor = 1e-12;

double safe_log(double v) { return std::log(std::max(v, kLogFloor)); }

void check_activation(const BeatActivation& act) {
    if (act.frames() < 1) raise(Errc::insufficient_length, "empty activation");
    if (act.fps <= 0.0) raise(Errc::invalid_config, "activation fps must be positive");
}

// Normalized autocorrelation over the in-range lags. Shared by acf_tempo and
// crf_beats (which seeds its pairwise potential with the dominant lag).
struct AcfScores {
    Eigen::Index lag_lo = 0;
    std::vector<double> scores; // scores[i] is lag lag_lo + i
    Eigen::Index best_lag = 0;
    double total = 0.0;
};

AcfScores acf_scores(const BeatActivation& act, const DecoderConfig& cfg) {
    check_activation(act);
    cfg.validate();
    const LagRange range = lag_range(act.fps, cfg);
    const Eigen::Index n = act.frames();
    if (n < 2 * range.min_lag) {
        raise(Errc::insufficient_length,
              "activation shorter than twice the minimum lag");
    }
    const Eigen::Index hi = std::min(range.max_lag, n - 1);

    AcfScores out;
    out.lag_lo = range.min_lag;
    out.scores.reserve(static_cast<std::size_t>(hi - range.min_lag + 1));
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index lag = range.min_lag; lag <= hi; ++lag) {
        const Eigen::Index overlap = n - lag;
        const double r =
            (act.values.head(overlap) * act.values.tail(overlap)).sum() / overlap;
        out.scores.push_back(r);
        out.total += r;
        if (r > best) { // strict: smallest lag wins ties
            best = r;
            out.best_lag = lag;
        }
    }
    if (out.total <= 0.0) {
        raise(Errc::flat_activation, "autocorrelation carries no energy");
    }
    return out;
}

// Resonating comb response per lag; score(l) = mean_n act[n] * y_l[n] with
// y_l[n] = act[n] + alpha * y_l[n - l].
struct CombScores {
    Eigen::Index lag_lo = 0;
    std::vector<double> scores;
    Eigen::Index best_lag = 0;
    double total = 0.0;
};

CombScores comb_scores(const BeatActivation& act, const DecoderConfig& cfg) {
    check_activation(act);
    cfg.validate();
    const LagRange range = lag_range(act.fps, cfg);
    const Eigen::Index n = act.frames();
    if (n < 2 * range.min_lag) {
        raise(Errc::insufficient_length,
              "activation shorter than twice the minimum lag");
    }
    const Eigen::Index hi = std::min(range.max_lag, n - 1);

    CombScores out;
    out.lag_lo = range.min_lag;
    out.scores.reserve(static_cast<std::size_t>(hi - range.min_lag + 1));
    double best = -std::numeric_limits<double>::infinity();
    Eigen::ArrayXd y(n);
    for (Eigen::Index lag = range.min_lag; lag <= hi; ++lag) {
        y = act.values;
        // dependencies are exactly `lag` apart, so whole blocks are safe
        for (Eigen::Index start = lag; start < n; start += lag) {
            const Eigen::Index len = std::min(lag, n - start);
            y.segment(start, len) += cfg.comb_alpha * y.segment(start - lag, len);
        }
        const double score = (act.values * y).sum() / n;
        out.scores.push_back(score);
        out.total += score;
        if (score > best) {
            best = score;
            out.best_lag = lag;
        }
    }
    if (out.total <= 0.0) {
        raise(Errc::flat_activation, "comb filterbank carries no energy");
    }
    return out;
}

// ---------------------------------------------------------------------------
// DBN over (tempo, phase) states.
//
// tempo tau is an integer beat period in frames; phase counts down to the
// next beat. At phase 0 (a beat) the tempo may switch to tau' with
// log-probability log(p_change) - penalty * |log(tau'/tau)|, otherwise it
// keeps with log(1 - p_change). Observations: log(act) at beat states,
// log(1 - act) elsewhere, floored at 1e-12.
// ---------------------------------------------------------------------------

struct DbnPath {
    std::vector<Eigen::Index> beat_frames;
    std::vector<Eigen::Index> tempo_per_frame; // beat period, one per frame
};

DbnPath dbn_viterbi(const BeatActivation& act, const DecoderConfig& cfg) {
    check_activation(act);
    cfg.validate();
    const LagRange range = lag_range(act.fps, cfg);
    const Eigen::Index n = act.frames();
    if (n < 2 * range.min_lag) {
        raise(Errc::insufficient_length,
              "activation shorter than twice the minimum lag");
    }

    const Eigen::Index num_tempi = range.max_lag - range.min_lag + 1;
    std::vector<Eigen::Index> offset(static_cast<std::size_t>(num_tempi));
    Eigen::Index total_states = 0;
    for (Eigen::Index i = 0; i < num_tempi; ++i) {
        offset[static_cast<std::size_t>(i)] = total_states;
        total_states += range.min_lag + i;
    }

    const double log_stay = std::log(1.0 - cfg.dbn_tempo_change_prob);
    const double log_change = std::log(cfg.dbn_tempo_change_prob);
    // transition score from beat state of tempo j into tempo i
    Eigen::MatrixXd trans(num_tempi, num_tempi);
    for (Eigen::Index j = 0; j < num_tempi; ++j) {
        const double tau_j = static_cast<double>(range.min_lag + j);
        for (Eigen::Index i = 0; i < num_tempi; ++i) {
            const double tau_i = static_cast<double>(range.min_lag + i);
            trans(j, i) = (i == j)
                              ? log_stay
                              : log_change - cfg.dbn_tempo_penalty *
                                                 std::abs(std::log(tau_i / tau_j));
        }
    }

    Eigen::VectorXd prev(total_states), next(total_states);
    // backpointer: which predecessor tempo fed the beat-entry state of tempo i
    std::vector<std::uint16_t> entry_bp(static_cast<std::size_t>(n * num_tempi));

    auto log_beat = [&](Eigen::Index t) { return safe_log(act.values[t]); };
    auto log_rest = [&](Eigen::Index t) { return safe_log(1.0 - act.values[t]); };

    for (Eigen::Index i = 0; i < num_tempi; ++i) {
        const Eigen::Index tau = range.min_lag + i;
        const Eigen::Index off = offset[static_cast<std::size_t>(i)];
        prev[off] = log_beat(0);
        for (Eigen::Index phi = 1; phi < tau; ++phi) prev[off + phi] = log_rest(0);
    }

    Eigen::VectorXd beat_scores(num_tempi);
    for (Eigen::Index t = 1; t < n; ++t) {
        const double lb = log_beat(t);
        const double lr = log_rest(t);
        for (Eigen::Index i = 0; i < num_tempi; ++i) {
            beat_scores[i] = prev[offset[static_cast<std::size_t>(i)]];
        }
        for (Eigen::Index i = 0; i < num_tempi; ++i) {
            const Eigen::Index tau = range.min_lag + i;
            const Eigen::Index off = offset[static_cast<std::size_t>(i)];
            // countdown states inherit from phase + 1
            for (Eigen::Index phi = 0; phi + 1 < tau; ++phi) {
                next[off + phi] = prev[off + phi + 1] + (phi == 0 ? lb : lr);
            }
            // beat-entry state: best over predecessor tempi
            double best = -std::numeric_limits<double>::infinity();
            Eigen::Index best_j = 0;
            for (Eigen::Index j = 0; j < num_tempi; ++j) {
                const double s = beat_scores[j] + trans(j, i);
                if (s > best) {
                    best = s;
                    best_j = j;
                }
            }
            next[off + tau - 1] = best + (tau == 1 ? lb : lr);
            entry_bp[static_cast<std::size_t>(t * num_tempi + i)] =
                static_cast<std::uint16_t>(best_j);
        }
        prev.swap(next);
    }

    // best final state, earliest index on ties
    Eigen::Index best_state = 0;
    double best_score = prev[0];
    for (Eigen::Index s = 1; s < total_states; ++s) {
        if (prev[s] > best_score) {
            best_score = prev[s];
            best_state = s;
        }
    }

    auto state_tempo = [&](Eigen::Index s) {
        Eigen::Index i = num_tempi - 1;
        while (offset[static_cast<std::size_t>(i)] > s) --i;
        return i;
    };

    DbnPath path;
    path.tempo_per_frame.assign(static_cast<std::size_t>(n), 0);
    Eigen::Index i = state_tempo(best_state);
    Eigen::Index phi = best_state - offset[static_cast<std::size_t>(i)];
    for (Eigen::Index t = n - 1; t >= 0; --t) {
        path.tempo_per_frame[static_cast<std::size_t>(t)] = range.min_lag + i;
        if (phi == 0) path.beat_frames.push_back(t);
        if (t == 0) break;
        const Eigen::Index tau = range.min_lag + i;
        if (phi == tau - 1) {
            // entered through a beat of the predecessor tempo
            i = entry_bp[static_cast<std::size_t>(t * num_tempi + i)];
            phi = 0;
        } else {
            ++phi;
        }
    }
    std::reverse(path.beat_frames.begin(), path.beat_frames.end());
    return path;
}

// mean activation at beat frames minus mean elsewhere, clamped to [0, 1];
// flat activations score 0
double beat_contrast(const BeatActivation& act, const std::vector<Eigen::Index>& beats) {
    if (beats.empty()) return 0.0;
    double on_sum = 0.0;
    for (Eigen::Index f : beats) on_sum += act.values[f];
    const double on = on_sum / static_cast<double>(beats.size());
    const auto rest_count =
        static_cast<double>(act.frames() - static_cast<Eigen::Index>(beats.size()));
    const double off = rest_count > 0 ? (act.values.sum() - on_sum) / rest_count : 0.0;
    return std::clamp(on - off, 0.0, 1.0);
}

} // namespace

void DecoderConfig::validate() const {
    if (!(0.0 < bpm_min && bpm_min < bpm_max)) {
        raise(Errc::invalid_config, "need 0 < bpm_min < bpm_max");
    }
    if (!(0.0 < comb_alpha && comb_alpha < 1.0)) {
        raise(Errc::invalid_config, "comb_alpha must lie in (0, 1)");
    }
    if (!(0.0 < dbn_tempo_change_prob && dbn_tempo_change_prob < 1.0)) {
        raise(Errc::invalid_config, "dbn_tempo_change_prob must lie in (0, 1)");
    }
    if (dbn_tempo_penalty < 0.0) raise(Errc::invalid_config, "dbn_tempo_penalty must be >= 0");
    if (smoothing_width < 1) raise(Errc::invalid_config, "smoothing_width must be >= 1");
}

LagRange lag_range(double fps, const DecoderConfig& cfg) {
    LagRange r;
    r.min_lag = static_cast<Eigen::Index>(std::ceil(60.0 * fps / cfg.bpm_max));
    r.max_lag = static_cast<Eigen::Index>(std::floor(60.0 * fps / cfg.bpm_min));
    if (r.min_lag < 1 || r.min_lag > r.max_lag) {
        raise(Errc::invalid_config, "empty lag range for this fps/BPM range");
    }
    return r;
}

TempoEstimate detect_tempo(const TempoActivation& activation, const DecoderConfig& cfg) {
    cfg.validate();
    const Eigen::Index bins = activation.bins();
    const auto lo = static_cast<Eigen::Index>(std::ceil(cfg.bpm_min));
    const auto hi = static_cast<Eigen::Index>(std::floor(cfg.bpm_max));
    if (lo < 0 || hi > bins - 1 || lo > hi) {
        raise(Errc::range_uncovered, "histogram bins do not cover the BPM range");
    }

    // Hamming kernel, unit mass; edges are truncated and renormalized.
    const int m = cfg.smoothing_width;
    Eigen::ArrayXd kernel(m);
    if (m == 1) {
        kernel[0] = 1.0;
    } else {
        for (int i = 0; i < m; ++i) {
            kernel[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (m - 1));
        }
        kernel /= kernel.sum();
    }
    const int center = (m - 1) / 2;
    Eigen::ArrayXd smoothed(bins);
    for (Eigen::Index b = 0; b < bins; ++b) {
        double acc = 0.0, weight = 0.0;
        for (int j = 0; j < m; ++j) {
            const Eigen::Index src = b + j - center;
            if (src < 0 || src >= bins) continue;
            acc += activation.mass[src] * kernel[j];
            weight += kernel[j];
        }
        smoothed[b] = weight > 0.0 ? acc / weight : 0.0;
    }

    Eigen::Index best = lo;
    for (Eigen::Index b = lo + 1; b <= hi; ++b) {
        if (smoothed[b] > smoothed[best]) best = b;
    }

    double bpm = static_cast<double>(best);
    if (best - 1 >= 0 && best + 1 <= bins - 1) {
        const double ym = smoothed[best - 1], y0 = smoothed[best], yp = smoothed[best + 1];
        const double denom = 2.0 * (2.0 * y0 - ym - yp);
        if (std::abs(denom) > 1e-300) {
            bpm += std::clamp((yp - ym) / denom, -0.5, 0.5);
        }
    }

    TempoEstimate est;
    est.method = "direct";
    est.clamped = bpm < cfg.bpm_min || bpm > cfg.bpm_max;
    est.bpm = std::clamp(bpm, cfg.bpm_min, cfg.bpm_max);
    const double in_range = smoothed.segment(lo, hi - lo + 1).sum();
    est.confidence = in_range > 0.0 ? smoothed[best] / in_range : 0.0;
    return est;
}

TempoEstimate acf_tempo(const BeatActivation& act, const DecoderConfig& cfg) {
    const AcfScores acf = acf_scores(act, cfg);
    TempoEstimate est;
    est.method = "acf";
    est.bpm = 60.0 * act.fps / static_cast<double>(acf.best_lag);
    est.confidence = acf.scores[static_cast<std::size_t>(acf.best_lag - acf.lag_lo)] / acf.total;
    return est;
}

TempoEstimate comb_tempo(const BeatActivation& act, const DecoderConfig& cfg) {
    const CombScores comb = comb_scores(act, cfg);
    TempoEstimate est;
    est.method = "comb";
    est.bpm = 60.0 * act.fps / static_cast<double>(comb.best_lag);
    est.confidence = comb.scores[static_cast<std::size_t>(comb.best_lag - comb.lag_lo)] / comb.total;
    return est;
}

TempoEstimate dbn_tempo(const BeatActivation& act, const DecoderConfig& cfg) {
    const DbnPath path = dbn_viterbi(act, cfg);

    // duration-weighted modal beat period of the decoded path
    const LagRange range = lag_range(act.fps, cfg);
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(range.max_lag + 1), 0);
    for (Eigen::Index tau : path.tempo_per_frame) ++counts[static_cast<std::size_t>(tau)];
    Eigen::Index mode = range.min_lag;
    for (Eigen::Index tau = range.min_lag; tau <= range.max_lag; ++tau) {
        if (counts[static_cast<std::size_t>(tau)] > counts[static_cast<std::size_t>(mode)]) {
            mode = tau;
        }
    }

    TempoEstimate est;
    est.method = "dbn";
    est.bpm = 60.0 * act.fps / static_cast<double>(mode);
    est.confidence = beat_contrast(act, path.beat_frames);
    return est;
}

BeatSequence dbn_beats(const BeatActivation& act, const DecoderConfig& cfg) {
    const DbnPath path = dbn_viterbi(act, cfg);
    BeatSequence beats;
    beats.times.reserve(path.beat_frames.size());
    for (Eigen::Index f : path.beat_frames) {
        beats.times.push_back(static_cast<double>(f) / act.fps);
    }
    return beats;
}

BeatSequence crf_beats(const BeatActivation& act, const DecoderConfig& cfg) {
    const AcfScores acf = acf_scores(act, cfg);
    const auto dominant = static_cast<double>(acf.best_lag);
    const double sigma = dominant / 8.0;
    const Eigen::Index n = act.frames();

    // MAP over the full observation model: placing a beat at frame t is worth
    // the log-odds of the activation; non-beat frames contribute a constant.
    Eigen::ArrayXd unary(n);
    for (Eigen::Index t = 0; t < n; ++t) {
        unary[t] = safe_log(act.values[t]) - safe_log(1.0 - act.values[t]);
    }

    const auto gap_lo =
        std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::floor(dominant / 2.0)));
    const auto gap_hi =
        std::min<Eigen::Index>(n - 1, static_cast<Eigen::Index>(std::ceil(2.0 * dominant)));

    const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
    Eigen::ArrayXd score(n);
    std::vector<Eigen::Index> bp(static_cast<std::size_t>(n), -1);
    for (Eigen::Index t = 0; t < n; ++t) {
        double best = 0.0; // first beat: no predecessor, edges unconstrained
        Eigen::Index best_prev = -1;
        const Eigen::Index lo = std::max<Eigen::Index>(0, t - gap_hi);
        for (Eigen::Index p = lo; p <= t - gap_lo; ++p) {
            const double gap = static_cast<double>(t - p);
            const double s = score[p] - (gap - dominant) * (gap - dominant) * inv_two_sigma2;
            if (s > best) {
                best = s;
                best_prev = p;
            }
        }
        score[t] = unary[t] + best;
        bp[static_cast<std::size_t>(t)] = best_prev;
    }

    Eigen::Index end = 0;
    for (Eigen::Index t = 1; t < n; ++t) {
        if (score[t] > score[end]) end = t;
    }

    BeatSequence beats;
    for (Eigen::Index t = end; t >= 0; t = bp[static_cast<std::size_t>(t)]) {
        beats.times.push_back(static_cast<double>(t) / act.fps);
        if (bp[static_cast<std::size_t>(t)] < 0) break;
    }
    std::reverse(beats.times.begin(), beats.times.end());
    return beats;
}

BeatSequence comb_beats(const BeatActivation& act, const DecoderConfig& cfg) {
    const CombScores comb = comb_scores(act, cfg);
    const Eigen::Index period = comb.best_lag;
    const Eigen::Index n = act.frames();

    // best phase of the beat grid
    Eigen::Index best_phase = 0;
    double best_sum = -1.0;
    for (Eigen::Index p = 0; p < period; ++p) {
        double s = 0.0;
        for (Eigen::Index f = p; f < n; f += period) s += act.values[f];
        if (s > best_sum) {
            best_sum = s;
            best_phase = p;
        }
    }

    // grid beats snapped to the local activation maximum
    const auto snap = static_cast<Eigen::Index>(std::llround(period / 10.0));
    BeatSequence beats;
    for (Eigen::Index g = best_phase; g < n; g += period) {
        const Eigen::Index lo = std::max<Eigen::Index>(0, g - snap);
        const Eigen::Index hi = std::min<Eigen::Index>(n - 1, g + snap);
        Eigen::Index best = lo;
        for (Eigen::Index f = lo + 1; f <= hi; ++f) {
            if (act.values[f] > act.values[best]) best = f;
        }
        beats.times.push_back(static_cast<double>(best) / act.fps);
    }
    return beats;
}

double median_interbeat_interval(const std::vector<double>& times) {
    if (times.size() < 2) raise(Errc::too_few_beats, "need at least 2 beats");
    std::vector<double> ibis(times.size() - 1);
    for (std::size_t i = 1; i < times.size(); ++i) ibis[i - 1] = times[i] - times[i - 1];
    std::sort(ibis.begin(), ibis.end());
    const std::size_t mid = ibis.size() / 2;
    return ibis.size() % 2 == 1 ? ibis[mid] : 0.5 * (ibis[mid - 1] + ibis[mid]);
}

TempoEstimate infer_tempo_from_beats(const BeatSequence& beats, const DecoderConfig& cfg) {
    cfg.validate();
    const double median = median_interbeat_interval(beats.times);
    if (median <= 0.0) raise(Errc::too_few_beats, "non-increasing beat times");

    const double raw = 60.0 / median;
    TempoEstimate est;
    est.method = "infer";
    est.clamped = raw < cfg.bpm_min || raw > cfg.bpm_max;
    est.bpm = std::clamp(raw, cfg.bpm_min, cfg.bpm_max);

    std::size_t agree = 0, total = 0;
    for (std::size_t i = 1; i < beats.times.size(); ++i) {
        const double ibi = beats.times[i] - beats.times[i - 1];
        if (std::abs(ibi - median) <= 0.1 * median) ++agree;
        ++total;
    }
    est.confidence = total > 0 ? static_cast<double>(agree) / total : 0.0;
    return est;
}

} // namespace tempokit
