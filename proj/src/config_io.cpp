#include "tempokit/config_io.hpp"
#include "tempokit/error.hpp"

#include <json.hpp>

#include <fstream>

namespace tempokit {

using nlohmann::json;

namespace {

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

} // namespace

ToolConfig load_tool_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(Errc::file_not_found, path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        raise(Errc::malformed_header, path + ": " + e.what());
    }

    ToolConfig cfg;
    if (j.contains("frontend")) {
        const auto& f = j["frontend"];
        maybe(f, "fps", cfg.frontend.fps);
        maybe(f, "window_size", cfg.frontend.window_size);
        maybe(f, "num_bands", cfg.frontend.num_bands);
        maybe(f, "fmin", cfg.frontend.fmin);
        maybe(f, "fmax", cfg.frontend.fmax);
        maybe(f, "log_offset", cfg.frontend.log_offset);
    }
    if (j.contains("decoder")) {
        const auto& d = j["decoder"];
        maybe(d, "bpm_min", cfg.decoder.bpm_min);
        maybe(d, "bpm_max", cfg.decoder.bpm_max);
        maybe(d, "comb_alpha", cfg.decoder.comb_alpha);
        maybe(d, "dbn_tempo_change_prob", cfg.decoder.dbn_tempo_change_prob);
        maybe(d, "dbn_tempo_penalty", cfg.decoder.dbn_tempo_penalty);
        maybe(d, "smoothing_width", cfg.decoder.smoothing_width);
    }
    if (j.contains("training")) {
        const auto& t = j["training"];
        maybe(t, "learning_rate", cfg.training.learning_rate);
        maybe(t, "clip_norm", cfg.training.clip_norm);
        maybe(t, "max_epochs", cfg.training.max_epochs);
        maybe(t, "early_stop_patience", cfg.training.early_stop_patience);
        maybe(t, "lookahead_k", cfg.training.lookahead_k);
        maybe(t, "lookahead_alpha", cfg.training.lookahead_alpha);
        maybe(t, "seed", cfg.training.seed);
    }
    if (j.contains("tcn")) {
        const auto& m = j["tcn"];
        maybe(m, "num_layers", cfg.tcn.num_layers);
        maybe(m, "kernel_size", cfg.tcn.kernel_size);
        maybe(m, "num_filters", cfg.tcn.num_filters);
        maybe(m, "dropout_rate", cfg.tcn.dropout_rate);
        maybe(m, "tempo_bins", cfg.tcn.tempo_bins);
        maybe(m, "input_bands", cfg.tcn.input_bands);
        if (m.contains("dilations")) {
            cfg.tcn.dilations = m["dilations"].get<std::vector<int>>();
            cfg.tcn.num_layers = static_cast<int>(cfg.tcn.dilations.size());
        } else if (m.contains("num_layers")) {
            cfg.tcn.dilations = TcnConfig::default_dilations(cfg.tcn.num_layers);
        }
    }
    return cfg;
}

} // namespace tempokit
