#pragma once

#include <stdexcept>
#include <string>

namespace tempokit {

// Error taxonomy shared by the library and the CLI. The CLI maps categories
// to process exit codes (usage=1, io=2, data=3).
enum class Errc {
    // I/O and file-format errors
    file_not_found,
    unsupported_encoding,
    malformed_header,
    truncated_file,
    checksum_mismatch,
    version_unsupported,
    missing_file,
    // configuration / usage errors
    invalid_config,
    invalid_spec,
    unknown_method,
    non_positive_tempo,
    // data and decoder errors
    clip_too_short,
    shape_mismatch,
    state_shape_mismatch,
    insufficient_length,
    flat_activation,
    too_few_beats,
    range_uncovered,
    beat_out_of_range,
    tempo_out_of_range,
    empty_dataset,
    diverged_loss,
    manifest_too_small,
};

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

inline const char* errc_name(Errc code) {
    switch (code) {
        case Errc::file_not_found: return "FileNotFound";
        case Errc::unsupported_encoding: return "UnsupportedEncoding";
        case Errc::malformed_header: return "MalformedHeader";
        case Errc::truncated_file: return "TruncatedFile";
        case Errc::checksum_mismatch: return "ChecksumMismatch";
        case Errc::version_unsupported: return "VersionUnsupported";
        case Errc::missing_file: return "MissingFile";
        case Errc::invalid_config: return "InvalidConfig";
        case Errc::invalid_spec: return "InvalidSpec";
        case Errc::unknown_method: return "UnknownMethod";
        case Errc::non_positive_tempo: return "NonPositiveTempo";
        case Errc::clip_too_short: return "ClipTooShort";
        case Errc::shape_mismatch: return "ShapeMismatch";
        case Errc::state_shape_mismatch: return "StateShapeMismatch";
        case Errc::insufficient_length: return "InsufficientLength";
        case Errc::flat_activation: return "FlatActivation";
        case Errc::too_few_beats: return "TooFewBeats";
        case Errc::range_uncovered: return "RangeUncovered";
        case Errc::beat_out_of_range: return "BeatOutOfRange";
        case Errc::tempo_out_of_range: return "TempoOutOfRange";
        case Errc::empty_dataset: return "EmptyDataset";
        case Errc::diverged_loss: return "DivergedLoss";
        case Errc::manifest_too_small: return "ManifestTooSmall";
    }
    return "Unknown";
}

[[noreturn]] inline void raise(Errc code, const std::string& message) {
    throw Error(code, std::string(errc_name(code)) + ": " + message);
}

} // namespace tempokit
