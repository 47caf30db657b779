#pragma once

#include <optional>
#include <string>
#include <vector>

namespace tempokit {

// Ground-truth beats for one clip; the reference tempo may be stored or
// inferred from the beats.
struct ClipAnnotation {
    std::vector<double> beat_times; // seconds, strictly ascending
    std::optional<double> reference_bpm;
    std::string clip_id;
};

// Beats text format: one decimal-seconds timestamp per line.
std::vector<double> load_beats_text(const std::string& path);
void save_beats_text(const std::string& path, const std::vector<double>& times);

} // namespace tempokit
