// tempokit command-line front end: estimate / evaluate / train / synth /
// features. Exit codes: 0 success, 1 usage error, 2 I/O error, 3 data or
// decoder error.

#include "tempokit/config_io.hpp"
#include "tempokit/eval.hpp"
#include "tempokit/synth.hpp"
#include "tempokit/train.hpp"
#include "tempokit/weights_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace tempokit;

namespace {

int exit_code_for(Errc code) {
    switch (code) {
        case Errc::invalid_config:
        case Errc::invalid_spec:
        case Errc::unknown_method:
        case Errc::non_positive_tempo:
            return 1;
        case Errc::file_not_found:
        case Errc::unsupported_encoding:
        case Errc::malformed_header:
        case Errc::truncated_file:
        case Errc::checksum_mismatch:
        case Errc::version_unsupported:
        case Errc::missing_file:
            return 2;
        default:
            return 3;
    }
}

int max_threads_from_env() {
    const char* env = std::getenv("TEMPOKIT_THREADS");
    if (!env) return 0;
    const int v = std::atoi(env);
    return v > 0 ? v : 0;
}

void require_standard_rate(const AudioClip& clip) {
    if (clip.sample_rate != 44100) {
        raise(Errc::unsupported_encoding,
              "expected 44.1 kHz input, got " + std::to_string(clip.sample_rate) +
                  " Hz (resampling is not supported)");
    }
}

BeatActivation load_activation_text(const std::string& path, double fps) {
    std::ifstream in(path);
    if (!in) raise(Errc::file_not_found, path);
    std::vector<double> values;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream iss(line);
        double v;
        if (!(iss >> v)) raise(Errc::malformed_header, path + ": bad activation line");
        values.push_back(v);
    }
    if (values.empty()) raise(Errc::insufficient_length, path + ": empty activation");
    BeatActivation act;
    act.fps = fps;
    act.values = Eigen::Map<const Eigen::ArrayXd>(values.data(),
                                                  static_cast<Eigen::Index>(values.size()));
    act.values = act.values.cwiseMax(0.0).cwiseMin(1.0);
    return act;
}

void print_estimate_json(const std::string& clip, const TempoEstimate& est) {
    if (!std::isfinite(est.bpm) || !std::isfinite(est.confidence)) {
        raise(Errc::flat_activation, "estimate produced a non-finite value");
    }
    ordered_json j;
    j["clip"] = clip;
    j["method"] = est.method;
    j["bpm"] = est.bpm;
    j["confidence"] = est.confidence;
    std::cout << j.dump() << '\n';
}

struct CommonFlags {
    std::string config_path;

    ToolConfig load() const {
        return config_path.empty() ? ToolConfig{} : load_tool_config(config_path);
    }
};

int cmd_estimate(const std::string& audio_path, const std::string& model_path,
                 const std::string& activation_path, double activation_fps,
                 const std::string& method, const CommonFlags& common) {
    const ToolConfig cfg = common.load();

    if (std::find(all_methods().begin(), all_methods().end(), method) == all_methods().end()) {
        raise(Errc::unknown_method, method);
    }

    ClipActivations acts;
    if (!activation_path.empty()) {
        if (method == "direct") {
            raise(Errc::invalid_config, "direct detection needs --model, not --activation");
        }
        acts.beat = load_activation_text(activation_path, activation_fps);
    } else {
        if (model_path.empty()) {
            raise(Errc::invalid_config, "either --model or --activation is required");
        }
        const TcnWeights<float> weights = load_weights(model_path);
        const AudioClip clip = load_audio(audio_path);
        require_standard_rate(clip);
        FrontendConfig frontend = cfg.frontend;
        frontend.num_bands = weights.config.input_bands;
        const Spectrogram spec = compute_spectrogram(clip, frontend);
        const auto out = forward(weights, spec);
        acts.beat = to_beat_activation(out);
        acts.tempo = to_tempo_activation(out);
    }

    const TempoEstimate est = run_method(method, acts, cfg.decoder);
    print_estimate_json(audio_path, est);
    return 0;
}

int cmd_evaluate(const std::string& manifest_path, const std::string& method,
                 const std::string& model_path, bool oracle, double oracle_noise,
                 std::uint64_t oracle_seed, double split_ratio, std::uint64_t split_seed,
                 bool no_split, const std::string& out_path, const CommonFlags& common) {
    const ToolConfig cfg = common.load();
    const DatasetManifest manifest = load_manifest(manifest_path);

    std::vector<std::string> clip_ids;
    if (no_split) {
        for (const auto& e : manifest.entries) clip_ids.push_back(e.id);
    } else {
        clip_ids = split_train_test(manifest, split_ratio, split_seed).test_ids;
    }

    std::vector<std::string> methods;
    if (method == "all") {
        methods = all_methods();
    } else {
        methods.push_back(method);
    }

    std::unique_ptr<ActivationProvider> provider;
    if (oracle) {
        provider = std::make_unique<OracleActivationProvider>(cfg.frontend.fps, 1, oracle_noise,
                                                              oracle_seed, cfg.tcn.tempo_bins);
    } else {
        if (model_path.empty()) {
            raise(Errc::invalid_config, "either --model or --oracle-activations is required");
        }
        FrontendConfig frontend = cfg.frontend;
        TcnWeights<float> weights = load_weights(model_path);
        frontend.num_bands = weights.config.input_bands;
        provider = std::make_unique<ModelActivationProvider>(std::move(weights), frontend);
    }

    const EvalReport report =
        evaluate(manifest, clip_ids, methods, *provider, cfg.decoder, max_threads_from_env());
    save_report_json(out_path, report);
    std::cout << report_summary_table(report);
    std::cout << "report written to " << out_path << '\n';
    return 0;
}

int cmd_train(const std::string& manifest_path, const std::string& out_path,
              const std::string& val_manifest_path, const std::string& history_path,
              int epochs, double lr, std::uint64_t seed, bool fps_augment,
              const CommonFlags& common) {
    const ToolConfig cfg = common.load();

    FrontendConfig frontend = cfg.frontend;
    TcnConfig tcn = cfg.tcn;
    tcn.input_bands = frontend.num_bands;
    TrainingConfig training = cfg.training;
    if (epochs > 0) training.max_epochs = epochs;
    if (lr > 0.0) training.learning_rate = lr;
    training.seed = seed;

    const std::vector<double> fps_set =
        fps_augment ? std::vector<double>{95.0, 100.0, 105.0}
                    : std::vector<double>{frontend.fps};

    auto build_items = [&](const DatasetManifest& manifest,
                           const std::vector<double>& fpss) {
        std::vector<TrainItem> items;
        for (const auto& entry : manifest.entries) {
            const ClipAnnotation annotation = load_annotation(entry);
            if (entry.audio_path.empty() || !fs::exists(entry.audio_path)) {
                raise(Errc::missing_file, "audio file missing: " + entry.audio_path);
            }
            const AudioClip clip = load_audio(entry.audio_path);
            require_standard_rate(clip);
            for (const Spectrogram& spec : augment_fps(clip, frontend, fpss)) {
                TrainItem item;
                item.targets =
                    encode_targets(annotation, spec.fps, spec.frames(), tcn.tempo_bins);
                item.spec = spec;
                items.push_back(std::move(item));
            }
        }
        return items;
    };

    const DatasetManifest manifest = load_manifest(manifest_path);
    const std::vector<TrainItem> dataset = build_items(manifest, fps_set);
    std::vector<TrainItem> validation;
    if (!val_manifest_path.empty()) {
        validation = build_items(load_manifest(val_manifest_path), {frontend.fps});
    }
    std::cerr << "training examples: " << dataset.size() << '\n';
    if (!validation.empty()) std::cerr << "validation examples: " << validation.size() << '\n';

    const auto init = init_model<float>(tcn, seed);
    const auto result = train(init, dataset, validation, training);
    for (const auto& e : result.history) {
        std::cerr << "epoch " << e.epoch << " train " << e.train_loss << " val " << e.val_loss
                  << '\n';
    }

    save_weights(result.weights, out_path);
    const std::string history =
        history_path.empty() ? out_path + ".history.csv" : history_path;
    save_history_csv(history, result.history);
    std::cout << "weights written to " << out_path << " (best epoch " << result.best_epoch
              << "); history at " << history << '\n';
    return 0;
}

int cmd_synth(const std::string& out_dir, double bpm, int count, double bpm_min, double bpm_max,
              double duration, double jitter_std, double click_freq, std::uint64_t seed) {
    fs::create_directories(out_dir);

    DatasetManifest manifest;
    manifest.dataset = "synthetic";
    Rng rng(seed);

    const int clips = count > 0 ? count : 1;
    for (int i = 0; i < clips; ++i) {
        ClickTrackSpec spec;
        spec.bpm = count > 0 ? rng.uniform(bpm_min, bpm_max) : bpm;
        spec.duration = duration;
        spec.timing_jitter_std = jitter_std;
        spec.click_freq = click_freq;
        spec.seed = seed + static_cast<std::uint64_t>(i);
        const auto [clip, annotation] = gen_click_track(spec);

        char stem[32];
        std::snprintf(stem, sizeof(stem), "clip_%03d", i);
        const std::string wav = stem + std::string(".wav");
        const std::string beats = stem + std::string(".beats");
        save_audio_wav16((fs::path(out_dir) / wav).string(), clip);
        save_beats_text((fs::path(out_dir) / beats).string(), annotation.beat_times);

        ManifestEntry entry;
        entry.id = stem;
        entry.audio_path = wav;
        entry.beats_path = beats;
        entry.bpm = spec.bpm;
        manifest.entries.push_back(std::move(entry));
    }
    const std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();
    save_manifest(manifest_path, manifest);
    std::cout << "wrote " << clips << " clip(s) and " << manifest_path << '\n';
    return 0;
}

int cmd_features(const std::string& audio_path, const std::string& out_path, double fps,
                 const std::string& format, const CommonFlags& common) {
    ToolConfig cfg = common.load();
    cfg.frontend.fps = fps > 0.0 ? fps : cfg.frontend.fps;

    const AudioClip clip = load_audio(audio_path);
    require_standard_rate(clip);
    const Spectrogram spec = compute_spectrogram(clip, cfg.frontend);

    if (format == "csv") {
        std::ofstream out(out_path);
        if (!out) raise(Errc::file_not_found, "cannot open for writing: " + out_path);
        for (Eigen::Index t = 0; t < spec.frames(); ++t) {
            for (Eigen::Index b = 0; b < spec.bands(); ++b) {
                if (b) out << ',';
                out << spec.values(t, b);
            }
            out << '\n';
        }
    } else if (format == "bin") {
        std::vector<TensorBlob> tensors(3);
        tensors[0].name = "values";
        tensors[0].dims = {static_cast<std::uint32_t>(spec.frames()),
                           static_cast<std::uint32_t>(spec.bands())};
        tensors[0].data.reserve(static_cast<std::size_t>(spec.values.size()));
        for (Eigen::Index t = 0; t < spec.frames(); ++t) {
            for (Eigen::Index b = 0; b < spec.bands(); ++b) {
                tensors[0].data.push_back(static_cast<float>(spec.values(t, b)));
            }
        }
        tensors[1].name = "fps";
        tensors[1].dims = {1};
        tensors[1].data = {static_cast<float>(spec.fps)};
        tensors[2].name = "band_centers";
        tensors[2].dims = {static_cast<std::uint32_t>(spec.band_centers.size())};
        for (Eigen::Index b = 0; b < spec.band_centers.size(); ++b) {
            tensors[2].data.push_back(static_cast<float>(spec.band_centers[b]));
        }
        write_tensor_file(out_path, tensors);
    } else {
        raise(Errc::invalid_config, "unknown dump format: " + format);
    }
    std::cout << "wrote " << spec.frames() << " frames to " << out_path << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"tempo estimation toolkit"};
    app.require_subcommand(1);
    CommonFlags common;

    // estimate
    auto* estimate = app.add_subcommand("estimate", "estimate the tempo of one clip");
    std::string est_audio, est_model, est_activation, est_method = "comb-estimate";
    double est_fps = 100.0;
    estimate->add_option("audio", est_audio, "input WAV file");
    estimate->add_option("--model", est_model, "TCNW weights file");
    estimate->add_option("--activation", est_activation,
                         "beat activation text file (bypasses the model)");
    estimate->add_option("--fps", est_fps, "frame rate of --activation");
    estimate->add_option("--method", est_method, "estimation path");
    estimate->add_option("--config", common.config_path, "JSON config file");

    // evaluate
    auto* evaluate_cmd = app.add_subcommand("evaluate", "run the evaluation protocol");
    std::string ev_manifest, ev_method = "all", ev_model, ev_out = "report.json";
    bool ev_oracle = false, ev_no_split = false;
    double ev_ratio = 0.8, ev_oracle_noise = 0.0;
    std::uint64_t ev_seed = 1234, ev_oracle_seed = 0;
    evaluate_cmd->add_option("--manifest", ev_manifest, "dataset manifest JSON")->required();
    evaluate_cmd->add_option("--method", ev_method, "method name or 'all'");
    evaluate_cmd->add_option("--model", ev_model, "TCNW weights file");
    evaluate_cmd->add_flag("--oracle-activations", ev_oracle,
                           "derive activations from the annotations instead of a model");
    evaluate_cmd->add_option("--oracle-noise", ev_oracle_noise, "oracle activation noise std");
    evaluate_cmd->add_option("--oracle-seed", ev_oracle_seed, "oracle noise seed");
    evaluate_cmd->add_option("--ratio", ev_ratio, "train fraction of the split");
    evaluate_cmd->add_option("--seed", ev_seed, "split seed");
    evaluate_cmd->add_flag("--no-split", ev_no_split, "evaluate every manifest entry");
    evaluate_cmd->add_option("--out", ev_out, "report JSON path");
    evaluate_cmd->add_option("--config", common.config_path, "JSON config file");

    // train
    auto* train_cmd = app.add_subcommand("train", "train the model on a manifest");
    std::string tr_manifest, tr_out = "model.tcnw", tr_val, tr_history;
    int tr_epochs = 0;
    double tr_lr = 0.0015;
    std::uint64_t tr_seed = 1;
    bool tr_augment = false;
    train_cmd->add_option("--manifest", tr_manifest, "training manifest JSON")->required();
    train_cmd->add_option("--out", tr_out, "output weights path");
    train_cmd->add_option("--val-manifest", tr_val, "validation manifest JSON");
    train_cmd->add_option("--history", tr_history, "history CSV path");
    train_cmd->add_option("--epochs", tr_epochs, "epoch cap");
    train_cmd->add_option("--lr", tr_lr, "initial learning rate");
    train_cmd->add_option("--seed", tr_seed, "training seed");
    train_cmd->add_flag("--fps-augment", tr_augment, "triple the data with FPS 95/100/105");
    train_cmd->add_option("--config", common.config_path, "JSON config file");

    // synth
    auto* synth = app.add_subcommand("synth", "generate synthetic click tracks");
    std::string sy_out_dir = "synth";
    double sy_bpm = 120.0, sy_bpm_min = 60.0, sy_bpm_max = 180.0, sy_duration = 10.0;
    double sy_jitter = 0.0, sy_click_freq = 1000.0;
    int sy_count = 0;
    std::uint64_t sy_seed = 0;
    synth->add_option("--out-dir", sy_out_dir, "output directory");
    synth->add_option("--bpm", sy_bpm, "tempo for a single clip");
    synth->add_option("--count", sy_count, "number of clips (random tempi)");
    synth->add_option("--bpm-min", sy_bpm_min, "random tempo lower bound");
    synth->add_option("--bpm-max", sy_bpm_max, "random tempo upper bound");
    synth->add_option("--duration", sy_duration, "clip length in seconds");
    synth->add_option("--jitter-std", sy_jitter, "beat timing jitter std in seconds");
    synth->add_option("--click-freq", sy_click_freq, "click frequency in Hz");
    synth->add_option("--seed", sy_seed, "generator seed");

    // features
    auto* features = app.add_subcommand("features", "dump the spectrogram of a clip");
    std::string fe_audio, fe_out = "features.csv", fe_format = "csv";
    double fe_fps = 0.0;
    features->add_option("audio", fe_audio, "input WAV file")->required();
    features->add_option("--out", fe_out, "output path");
    features->add_option("--fps", fe_fps, "frame rate");
    features->add_option("--format", fe_format, "csv or bin");
    features->add_option("--config", common.config_path, "JSON config file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    }

    try {
        if (estimate->parsed()) {
            return cmd_estimate(est_audio, est_model, est_activation, est_fps, est_method,
                                common);
        }
        if (evaluate_cmd->parsed()) {
            return cmd_evaluate(ev_manifest, ev_method, ev_model, ev_oracle, ev_oracle_noise,
                                ev_oracle_seed, ev_ratio, ev_seed, ev_no_split, ev_out, common);
        }
        if (train_cmd->parsed()) {
            return cmd_train(tr_manifest, tr_out, tr_val, tr_history, tr_epochs, tr_lr, tr_seed,
                             tr_augment, common);
        }
        if (synth->parsed()) {
            if (sy_bpm <= 0.0 || sy_duration <= 0.0 || (sy_count > 0 && sy_bpm_min <= 0.0)) {
                raise(Errc::invalid_spec, "bpm and duration must be positive");
            }
            return cmd_synth(sy_out_dir, sy_bpm, sy_count, sy_bpm_min, sy_bpm_max, sy_duration,
                             sy_jitter, sy_click_freq, sy_seed);
        }
        if (features->parsed()) {
            return cmd_features(fe_audio, fe_out, fe_fps, fe_format, common);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 1;
}
