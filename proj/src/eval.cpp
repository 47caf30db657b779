#include "tempokit/eval.hpp"
#include "tempokit/audio.hpp"
#include "tempokit/error.hpp"
#include "tempokit/rng.hpp"
#include "tempokit/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace tempokit {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

bool acc1(double estimated_bpm, double annotated_bpm) {
    if (estimated_bpm <= 0.0 || annotated_bpm <= 0.0) {
        raise(Errc::non_positive_tempo, "tempi must be positive");
    }
    return std::abs(estimated_bpm - annotated_bpm) <= 0.04 * annotated_bpm;
}

bool acc2(double estimated_bpm, double annotated_bpm) {
    static constexpr double factors[] = {1.0 / 3.0, 0.5, 1.0, 2.0, 3.0};
    for (double f : factors) {
        if (acc1(estimated_bpm, f * annotated_bpm)) return true;
    }
    return false;
}

double infer_reference_tempo(const ClipAnnotation& annotation) {
    return 60.0 / median_interbeat_interval(annotation.beat_times);
}

// --- manifest -----------------------------------------------------------------

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(Errc::file_not_found, path);
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        raise(Errc::malformed_header, path + ": " + e.what());
    }

    DatasetManifest manifest;
    manifest.dataset = j.value("dataset", std::string("unnamed"));
    const fs::path base = fs::path(path).parent_path();
    auto resolve = [&](const std::string& p) {
        const fs::path fp(p);
        return fp.is_absolute() ? fp.string() : (base / fp).string();
    };

    std::set<std::string> seen;
    if (!j.contains("entries") || !j["entries"].is_array()) {
        raise(Errc::malformed_header, path + ": missing entries array");
    }
    for (const auto& e : j["entries"]) {
        ManifestEntry entry;
        entry.id = e.at("id").get<std::string>();
        entry.audio_path = e.contains("audio") && !e["audio"].is_null()
                               ? resolve(e["audio"].get<std::string>())
                               : std::string();
        entry.beats_path = resolve(e.at("beats").get<std::string>());
        if (e.contains("bpm") && !e["bpm"].is_null()) entry.bpm = e["bpm"].get<double>();
        if (!seen.insert(entry.id).second) {
            raise(Errc::malformed_header, path + ": duplicate clip id " + entry.id);
        }
        manifest.entries.push_back(std::move(entry));
    }
    return manifest;
}

void save_manifest(const std::string& path, const DatasetManifest& manifest) {
    ordered_json j;
    j["dataset"] = manifest.dataset;
    j["entries"] = ordered_json::array();
    for (const auto& e : manifest.entries) {
        ordered_json je;
        je["id"] = e.id;
        je["audio"] = e.audio_path;
        je["beats"] = e.beats_path;
        if (e.bpm) {
            je["bpm"] = *e.bpm;
        } else {
            je["bpm"] = nullptr;
        }
        j["entries"].push_back(std::move(je));
    }
    std::ofstream out(path);
    if (!out) raise(Errc::file_not_found, "cannot open for writing: " + path);
    out << j.dump(2) << '\n';
}

ClipAnnotation load_annotation(const ManifestEntry& entry) {
    if (!fs::exists(entry.beats_path)) {
        raise(Errc::missing_file, "beats file missing: " + entry.beats_path);
    }
    ClipAnnotation ann;
    ann.clip_id = entry.id;
    ann.beat_times = load_beats_text(entry.beats_path);
    ann.reference_bpm = entry.bpm;
    return ann;
}

SplitSpec split_train_test(const DatasetManifest& manifest, double ratio, std::uint64_t seed) {
    if (manifest.entries.size() < 2) {
        raise(Errc::manifest_too_small, "need at least 2 entries to split");
    }
    if (!(0.0 < ratio && ratio < 1.0)) raise(Errc::invalid_config, "ratio must lie in (0, 1)");

    std::vector<std::string> ids;
    ids.reserve(manifest.entries.size());
    for (const auto& e : manifest.entries) ids.push_back(e.id);
    std::sort(ids.begin(), ids.end());

    Rng rng(seed);
    rng.shuffle(ids);

    const auto n_train = static_cast<std::size_t>(
        std::llround(ratio * static_cast<double>(ids.size())));
    SplitSpec split;
    split.seed = seed;
    split.ratio = ratio;
    split.train_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.test_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
    std::sort(split.train_ids.begin(), split.train_ids.end());
    std::sort(split.test_ids.begin(), split.test_ids.end());
    return split;
}

// --- segmentation ---------------------------------------------------------------

Segmentation segment_clips(double duration, const ClipAnnotation& annotation, double target,
                           double min_len) {
    if (duration <= 0.0) raise(Errc::invalid_config, "duration must be positive");
    if (target <= 0.0 || min_len < 0.0) raise(Errc::invalid_config, "bad segmentation params");

    std::vector<double> cuts;
    if (!annotation.beat_times.empty()) {
        for (int k = 1; k * target < duration; ++k) {
            const double want = k * target;
            double best = annotation.beat_times.front();
            for (double b : annotation.beat_times) {
                if (std::abs(b - want) < std::abs(best - want)) best = b;
            }
            if (best > 0.0 && best < duration) cuts.push_back(best);
        }
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    }

    Segmentation seg;
    double start = 0.0;
    auto emit = [&](double s, double e) {
        const TimeWindow w{s, e};
        if (w.length() >= min_len) {
            seg.kept.push_back(w);
        } else {
            seg.discarded.push_back(w);
        }
    };
    for (double c : cuts) {
        emit(start, c);
        start = c;
    }
    emit(start, duration);
    return seg;
}

ClipAnnotation slice_annotation(const ClipAnnotation& annotation, const TimeWindow& window,
                                const std::string& new_id) {
    ClipAnnotation out;
    out.clip_id = new_id;
    out.reference_bpm = annotation.reference_bpm;
    for (double t : annotation.beat_times) {
        if (t >= window.start && t < window.end) out.beat_times.push_back(t - window.start);
    }
    return out;
}

// --- providers ------------------------------------------------------------------

ModelActivationProvider::ModelActivationProvider(TcnWeights<float> weights,
                                                 FrontendConfig frontend)
    : weights_(std::move(weights)), frontend_(std::move(frontend)) {}

ClipActivations ModelActivationProvider::activations(const ManifestEntry& entry,
                                                     const ClipAnnotation&) const {
    if (entry.audio_path.empty() || !fs::exists(entry.audio_path)) {
        raise(Errc::missing_file, "audio file missing: " + entry.audio_path);
    }
    const AudioClip clip = load_audio(entry.audio_path);
    const Spectrogram spec = compute_spectrogram(clip, frontend_);
    const auto out = forward(weights_, spec);
    ClipActivations acts;
    acts.beat = to_beat_activation(out);
    acts.tempo = to_tempo_activation(out);
    return acts;
}

OracleActivationProvider::OracleActivationProvider(double fps, int pulse_width, double noise_std,
                                                   std::uint64_t seed, int tempo_bins)
    : fps_(fps), pulse_width_(pulse_width), noise_std_(noise_std), seed_(seed),
      tempo_bins_(tempo_bins) {}

ClipActivations OracleActivationProvider::activations(const ManifestEntry& entry,
                                                      const ClipAnnotation& annotation) const {
    if (annotation.beat_times.size() < 2) {
        raise(Errc::too_few_beats, "oracle activations need at least 2 annotated beats");
    }
    const double median = median_interbeat_interval(annotation.beat_times);
    const double duration = annotation.beat_times.back() + median;

    ClipActivations acts;
    acts.beat = activation_from_beats(annotation.beat_times, fps_, duration, pulse_width_,
                                      noise_std_, seed_ ^ hash_string(entry.id));

    const double bpm =
        annotation.reference_bpm ? *annotation.reference_bpm : 60.0 / median;
    const auto bin = static_cast<Eigen::Index>(std::llround(bpm));
    if (bin < 0 || bin >= tempo_bins_) {
        raise(Errc::tempo_out_of_range, "reference tempo outside the oracle histogram");
    }
    TempoActivation tempo;
    tempo.mass = Eigen::ArrayXd::Zero(tempo_bins_);
    tempo.mass[bin] = 0.5;
    if (bin > 0) tempo.mass[bin - 1] = 0.25;
    if (bin + 1 < tempo_bins_) tempo.mass[bin + 1] = 0.25;
    tempo.mass /= tempo.mass.sum();
    acts.tempo = std::move(tempo);
    return acts;
}

// --- evaluation -------------------------------------------------------------------

const std::vector<std::string>& all_methods() {
    static const std::vector<std::string> methods = {
        "direct",    "acf-estimate", "dbn-estimate", "comb-estimate",
        "crf-infer", "dbn-infer",    "comb-infer"};
    return methods;
}

TempoEstimate run_method(const std::string& method, const ClipActivations& acts,
                         const DecoderConfig& cfg) {
    TempoEstimate est;
    if (method == "direct") {
        if (!acts.tempo) {
            raise(Errc::invalid_config, "direct detection needs a tempo activation");
        }
        est = detect_tempo(*acts.tempo, cfg);
    } else if (method == "acf-estimate") {
        est = acf_tempo(acts.beat, cfg);
    } else if (method == "dbn-estimate") {
        est = dbn_tempo(acts.beat, cfg);
    } else if (method == "comb-estimate") {
        est = comb_tempo(acts.beat, cfg);
    } else if (method == "crf-infer") {
        est = infer_tempo_from_beats(crf_beats(acts.beat, cfg), cfg);
    } else if (method == "dbn-infer") {
        est = infer_tempo_from_beats(dbn_beats(acts.beat, cfg), cfg);
    } else if (method == "comb-infer") {
        est = infer_tempo_from_beats(comb_beats(acts.beat, cfg), cfg);
    } else {
        raise(Errc::unknown_method, method);
    }
    est.method = method;
    return est;
}

EvalReport evaluate(const DatasetManifest& manifest, const std::vector<std::string>& clip_ids,
                    const std::vector<std::string>& methods, const ActivationProvider& provider,
                    const DecoderConfig& decoder_cfg, int max_threads) {
    if (clip_ids.empty()) raise(Errc::manifest_too_small, "empty evaluation split");
    for (const auto& m : methods) {
        if (std::find(all_methods().begin(), all_methods().end(), m) == all_methods().end()) {
            raise(Errc::unknown_method, m);
        }
    }

    std::vector<const ManifestEntry*> entries;
    entries.reserve(clip_ids.size());
    std::vector<std::string> sorted_ids = clip_ids;
    std::sort(sorted_ids.begin(), sorted_ids.end());
    for (const auto& id : sorted_ids) {
        const auto it = std::find_if(manifest.entries.begin(), manifest.entries.end(),
                                     [&](const ManifestEntry& e) { return e.id == id; });
        if (it == manifest.entries.end()) {
            raise(Errc::missing_file, "clip id not in manifest: " + id);
        }
        entries.push_back(&*it);
    }

    std::vector<std::vector<ClipResult>> per_clip(entries.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error = nullptr;
    std::mutex error_mutex;

    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= entries.size()) return;
            const ManifestEntry& entry = *entries[i];
            try {
                const ClipAnnotation annotation = load_annotation(entry);
                double reference = 0.0;
                std::string reference_error;
                try {
                    reference = annotation.reference_bpm ? *annotation.reference_bpm
                                                         : infer_reference_tempo(annotation);
                } catch (const Error& e) {
                    reference_error = e.what();
                }

                std::optional<ClipActivations> acts;
                std::string provider_error;
                if (reference_error.empty()) {
                    try {
                        acts = provider.activations(entry, annotation);
                    } catch (const Error& e) {
                        if (e.code() == Errc::missing_file) throw;
                        provider_error = e.what();
                    }
                }

                for (const auto& method : methods) {
                    ClipResult r;
                    r.clip_id = entry.id;
                    r.method = method;
                    r.reference_bpm = reference;
                    if (!reference_error.empty() || !provider_error.empty()) {
                        r.failed = true;
                        r.error = !reference_error.empty() ? reference_error : provider_error;
                    } else {
                        try {
                            const TempoEstimate est = run_method(method, *acts, decoder_cfg);
                            r.estimated_bpm = est.bpm;
                            r.acc1 = acc1(est.bpm, reference);
                            r.acc2 = acc2(est.bpm, reference);
                        } catch (const Error& e) {
                            r.failed = true;
                            r.error = e.what();
                        }
                    }
                    per_clip[i].push_back(std::move(r));
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    int threads = max_threads;
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min<int>(threads, static_cast<int>(entries.size())));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    EvalReport report;
    report.dataset = manifest.dataset;
    for (auto& clip_records : per_clip) {
        for (auto& r : clip_records) report.records.push_back(std::move(r));
    }
    for (const auto& method : methods) {
        MethodAggregate agg;
        for (const auto& r : report.records) {
            if (r.method != method) continue;
            ++agg.clips;
            agg.acc1_rate += r.acc1 ? 1.0 : 0.0;
            agg.acc2_rate += r.acc2 ? 1.0 : 0.0;
        }
        if (agg.clips > 0) {
            agg.acc1_rate /= agg.clips;
            agg.acc2_rate /= agg.clips;
        }
        report.aggregates[method] = agg;
    }
    return report;
}

void save_report_json(const std::string& path, const EvalReport& report) {
    auto check = [](double v) {
        if (!std::isfinite(v)) raise(Errc::invalid_config, "non-finite value in report");
        return v;
    };
    ordered_json j;
    j["dataset"] = report.dataset;
    j["records"] = ordered_json::array();
    for (const auto& r : report.records) {
        ordered_json je;
        je["clip_id"] = r.clip_id;
        je["method"] = r.method;
        je["estimated_bpm"] = check(r.estimated_bpm);
        je["reference_bpm"] = check(r.reference_bpm);
        je["acc1"] = r.acc1;
        je["acc2"] = r.acc2;
        je["failed"] = r.failed;
        if (r.failed) je["error"] = r.error;
        j["records"].push_back(std::move(je));
    }
    j["aggregates"] = ordered_json::object();
    for (const auto& [method, agg] : report.aggregates) {
        ordered_json ja;
        ja["acc1_rate"] = check(agg.acc1_rate);
        ja["acc2_rate"] = check(agg.acc2_rate);
        ja["clips"] = agg.clips;
        j["aggregates"][method] = std::move(ja);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::file_not_found, "cannot open for writing: " + path);
    out << j.dump(2) << '\n';
}

std::string report_summary_table(const EvalReport& report) {
    std::ostringstream os;
    os << "Dataset: " << report.dataset << "\n";
    os << "Method           Acc1    Acc2   Clips\n";
    os << "-------------------------------------\n";
    char line[128];
    for (const auto& method : all_methods()) {
        const auto it = report.aggregates.find(method);
        if (it == report.aggregates.end()) continue;
        std::snprintf(line, sizeof(line), "%-14s  %.3f   %.3f   %5d\n", method.c_str(),
                      it->second.acc1_rate, it->second.acc2_rate, it->second.clips);
        os << line;
    }
    return os.str();
}

} // namespace tempokit
