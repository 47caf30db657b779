#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tempokit/rng.hpp"
#include "tempokit/tcn.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <vector>

using namespace tempokit;

namespace {

Spectrogram random_spec(Eigen::Index frames, int bands, std::uint64_t seed, double fps = 100.0) {
    Rng rng(seed);
    Spectrogram spec;
    spec.fps = fps;
    spec.values.resize(frames, bands);
    for (Eigen::Index i = 0; i < spec.values.size(); ++i) {
        spec.values.data()[i] = rng.uniform(-1.0, 1.0);
    }
    spec.band_centers = Eigen::ArrayXd::LinSpaced(bands, 30.0, 17000.0);
    return spec;
}

TcnConfig tiny_config() {
    TcnConfig cfg;
    cfg.num_layers = 2;
    cfg.dilations = {1, 2};
    cfg.kernel_size = 3;
    cfg.num_filters = 4;
    cfg.input_bands = 4;
    cfg.tempo_bins = 12;
    cfg.dropout_rate = 0.1;
    return cfg;
}

template <typename S>
std::map<std::string, std::vector<S>> snapshot(const TcnWeights<S>& w) {
    std::map<std::string, std::vector<S>> out;
    visit_tensors(const_cast<TcnWeights<S>&>(w),
                  [&](const std::string& name, const S* data, Eigen::Index n) {
                      out[name] = std::vector<S>(data, data + n);
                  });
    return out;
}

} // namespace

TEST_CASE("init_model is deterministic in the seed") {
    const TcnConfig cfg = tiny_config();
    const auto a = init_model<double>(cfg, 42);
    const auto b = init_model<double>(cfg, 42);
    const auto c = init_model<double>(cfg, 43);
    CHECK(snapshot(a) == snapshot(b));
    CHECK(snapshot(a) != snapshot(c));
}

TEST_CASE("parameter count matches an independent closed form") {
    TcnConfig cfg; // defaults: 11 layers, k=5, 16 filters, 81 bands, 300 bins
    const auto w = init_model<float>(cfg, 1);

    // independent enumeration over layers plus the two heads
    Eigen::Index expected = 0;
    int in_ch = cfg.input_bands;
    for (int i = 0; i < cfg.num_layers; ++i) {
        expected += static_cast<Eigen::Index>(cfg.kernel_size) * in_ch * cfg.num_filters +
                    cfg.num_filters;
        in_ch = cfg.num_filters;
    }
    expected += cfg.num_filters + 1; // beat head
    expected += static_cast<Eigen::Index>(cfg.tempo_bins) * cfg.num_filters + cfg.tempo_bins;

    CHECK(param_count(w) == expected);
    CHECK(expected == 5 * 81 * 16 + 16 + 10 * (5 * 16 * 16 + 16) + (16 + 1) + (300 * 16 + 300));
}

TEST_CASE("receptive field") {
    TcnConfig cfg;
    CHECK(receptive_field(cfg) == 8189); // defaults: 1 + 4 * 2047

    cfg.num_layers = 1;
    cfg.dilations = {1};
    cfg.kernel_size = 5;
    CHECK(receptive_field(cfg) == 5);

    cfg.kernel_size = 1;
    CHECK(receptive_field(cfg) == 1);

    cfg.num_layers = 4;
    cfg.dilations = {1, 2, 4, 8};
    CHECK(receptive_field(cfg) == 1);
}

TEST_CASE("forward output contracts") {
    const TcnConfig cfg = tiny_config();
    const auto w = init_model<double>(cfg, 5);
    const Spectrogram spec = random_spec(37, cfg.input_bands, 9);

    const auto out = forward(w, spec);
    REQUIRE(out.beat_activation.size() == 37);
    CHECK((out.beat_activation.array() >= 0.0).all());
    CHECK((out.beat_activation.array() <= 1.0).all());
    REQUIRE(out.tempo_activation.size() == cfg.tempo_bins);
    CHECK(out.tempo_activation.sum() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK((out.tempo_activation.array() >= 0.0).all());
}

TEST_CASE("zero weights give a uniform tempo activation") {
    TcnConfig cfg;
    cfg.input_bands = 8;
    auto w = init_model<double>(cfg, 3);
    w.set_zero();
    const Spectrogram spec = random_spec(25, cfg.input_bands, 11);
    const auto out = forward(w, spec);
    for (Eigen::Index b = 0; b < out.tempo_activation.size(); ++b) {
        CHECK(out.tempo_activation[b] == doctest::Approx(1.0 / 300.0).epsilon(1e-9));
    }
    // beat head of a zero model is sigmoid(0)
    CHECK(out.beat_activation[0] == doctest::Approx(0.5));
}

TEST_CASE("band count mismatch raises ShapeMismatch") {
    const TcnConfig cfg = tiny_config();
    const auto w = init_model<double>(cfg, 5);
    const Spectrogram spec = random_spec(30, cfg.input_bands + 1, 9);
    try {
        forward(w, spec);
        FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::shape_mismatch);
    }
}

TEST_CASE("interior shift covariance of the beat activation") {
    TcnConfig cfg = tiny_config();
    cfg.dropout_rate = 0.0;
    const auto w = init_model<double>(cfg, 17);
    const Eigen::Index frames = 60;
    const Eigen::Index shift = 7;
    const Eigen::Index half_rf = receptive_field(cfg) / 2; // 3 for k=3, dil {1,2}

    const Spectrogram base = random_spec(frames, cfg.input_bands, 23);
    Spectrogram shifted = base;
    shifted.values.setZero();
    shifted.values.bottomRows(frames - shift) = base.values.topRows(frames - shift);

    const auto out_base = forward(w, base);
    const auto out_shifted = forward(w, shifted);
    for (Eigen::Index t = shift + half_rf; t + half_rf < frames; ++t) {
        CHECK(out_shifted.beat_activation[t] == out_base.beat_activation[t - shift]);
    }
}

TEST_CASE("tempo head is invariant to reordering of the post-stack feature map") {
    const TcnConfig cfg = tiny_config();
    const auto w = init_model<double>(cfg, 29);
    const Spectrogram spec = random_spec(41, cfg.input_bands, 31);

    ForwardCache<double> cache;
    const auto out = forward(w, spec, false, nullptr, &cache);

    // reorder the feature-map frames, recompute the head by hand
    Matrix<double> reordered(cache.features.rows(), cache.features.cols());
    for (Eigen::Index c = 0; c < cache.features.cols(); ++c) {
        reordered.col(c) = cache.features.col(cache.features.cols() - 1 - c);
    }
    const Vector<double> pooled = reordered.rowwise().mean();
    Vector<double> logits = w.tempo_weight * pooled + w.tempo_bias;
    const double peak = logits.maxCoeff();
    Vector<double> expd = (logits.array() - peak).exp().matrix();
    const Vector<double> tempo = expd / expd.sum();

    for (Eigen::Index b = 0; b < tempo.size(); ++b) {
        CHECK(tempo[b] == doctest::Approx(out.tempo_activation[b]).epsilon(1e-12));
    }
}

TEST_CASE("training-mode dropout is deterministic given the RNG stream") {
    const TcnConfig cfg = tiny_config();
    const auto w = init_model<double>(cfg, 7);
    const Spectrogram spec = random_spec(30, cfg.input_bands, 13);

    Rng rng_a(99), rng_b(99);
    const auto a = forward(w, spec, true, &rng_a);
    const auto b = forward(w, spec, true, &rng_b);
    CHECK(a.beat_activation == b.beat_activation);
    CHECK(a.tempo_activation == b.tempo_activation);

    // training mode without an RNG is a usage error
    CHECK_THROWS_AS(forward(w, spec, true, nullptr), Error);
}

TEST_CASE("weight cast round trip preserves float values") {
    const auto wf = init_model<float>(tiny_config(), 77);
    const auto wd = wf.cast<double>();
    const auto back = wd.cast<float>();
    CHECK(snapshot(wf) == snapshot(back));
}
