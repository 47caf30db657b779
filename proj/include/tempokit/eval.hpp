#pragma once

#include "tempokit/annotation.hpp"
#include "tempokit/frontend.hpp"
#include "tempokit/postproc.hpp"
#include "tempokit/tcn.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tempokit {

// --- metrics -----------------------------------------------------------------

// |estimated - annotated| <= 0.04 * annotated, boundary inclusive.
bool acc1(double estimated_bpm, double annotated_bpm);

// acc1 against any of the octave factors {1/3, 1/2, 1, 2, 3} of the
// annotated tempo.
bool acc2(double estimated_bpm, double annotated_bpm);

// Ground-truth tempo from the beats: 60 / median(inter-beat interval).
double infer_reference_tempo(const ClipAnnotation& annotation);

// --- dataset plumbing ----------------------------------------------------------

struct ManifestEntry {
    std::string id;
    std::string audio_path;
    std::string beats_path;
    std::optional<double> bpm;
};

struct DatasetManifest {
    std::string dataset;
    std::vector<ManifestEntry> entries;
};

DatasetManifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const DatasetManifest& manifest);

// Annotation for an entry: beats from the beats file, tempo from the
// manifest when present.
ClipAnnotation load_annotation(const ManifestEntry& entry);

struct SplitSpec {
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
    std::uint64_t seed = 1234;
    double ratio = 0.8;
};

// Fisher-Yates shuffle of the lexicographically sorted clip ids with a
// SplitMix64 generator; the first round(ratio * N) ids form the train side.
SplitSpec split_train_test(const DatasetManifest& manifest, double ratio = 0.8,
                           std::uint64_t seed = 1234);

// --- segmentation --------------------------------------------------------------

struct TimeWindow {
    double start = 0.0;
    double end = 0.0;
    double length() const { return end - start; }
};

struct Segmentation {
    std::vector<TimeWindow> kept;
    std::vector<TimeWindow> discarded; // shorter than min_len
};

// Cuts at the annotated beat nearest each multiple of `target` seconds, so no
// cut lands mid-interval; segments shorter than min_len are discarded. The
// windows (kept + discarded) tile [0, duration] exactly.
Segmentation segment_clips(double duration, const ClipAnnotation& annotation,
                           double target = 30.0, double min_len = 5.0);

// Annotation restricted to a window and re-based to its start.
ClipAnnotation slice_annotation(const ClipAnnotation& annotation, const TimeWindow& window,
                                const std::string& new_id);

// --- evaluation ------------------------------------------------------------------

struct ClipActivations {
    BeatActivation beat;
    std::optional<TempoActivation> tempo;
};

class ActivationProvider {
public:
    virtual ~ActivationProvider() = default;
    virtual ClipActivations activations(const ManifestEntry& entry,
                                        const ClipAnnotation& annotation) const = 0;
};

// Runs the trained model on the entry's audio.
class ModelActivationProvider : public ActivationProvider {
public:
    ModelActivationProvider(TcnWeights<float> weights, FrontendConfig frontend);
    ClipActivations activations(const ManifestEntry& entry,
                                const ClipAnnotation& annotation) const override;

private:
    TcnWeights<float> weights_;
    FrontendConfig frontend_;
};

// Builds activations straight from the annotated beats; lets the harness and
// the acceptance suite exercise every decoder path without a trained model.
class OracleActivationProvider : public ActivationProvider {
public:
    explicit OracleActivationProvider(double fps = 100.0, int pulse_width = 1,
                                      double noise_std = 0.0, std::uint64_t seed = 0,
                                      int tempo_bins = 300);
    ClipActivations activations(const ManifestEntry& entry,
                                const ClipAnnotation& annotation) const override;

private:
    double fps_;
    int pulse_width_;
    double noise_std_;
    std::uint64_t seed_;
    int tempo_bins_;
};

struct ClipResult {
    std::string clip_id;
    std::string method;
    double estimated_bpm = 0.0;
    double reference_bpm = 0.0;
    bool acc1 = false;
    bool acc2 = false;
    bool failed = false; // decoder error; scores false on both metrics
    std::string error;
};

struct MethodAggregate {
    double acc1_rate = 0.0;
    double acc2_rate = 0.0;
    int clips = 0;
};

struct EvalReport {
    std::string dataset;
    std::vector<ClipResult> records;
    std::map<std::string, MethodAggregate> aggregates;
};

// The seven estimation paths: direct detection, three estimate-from-activation
// decoders, three beats-then-infer chains.
const std::vector<std::string>& all_methods();

// One estimate through the named path.
TempoEstimate run_method(const std::string& method, const ClipActivations& acts,
                         const DecoderConfig& cfg);

// Evaluates every method on every listed clip. Clips run in parallel (capped
// by max_threads; 0 means hardware concurrency); records come back in sorted
// clip order so the report does not depend on scheduling.
EvalReport evaluate(const DatasetManifest& manifest, const std::vector<std::string>& clip_ids,
                    const std::vector<std::string>& methods, const ActivationProvider& provider,
                    const DecoderConfig& decoder_cfg, int max_threads = 0);

void save_report_json(const std::string& path, const EvalReport& report);
std::string report_summary_table(const EvalReport& report);

} // namespace tempokit
