#pragma once

#include "tempokit/frontend.hpp"
#include "tempokit/optimizer.hpp"
#include "tempokit/postproc.hpp"
#include "tempokit/tcn.hpp"

#include <string>

namespace tempokit {

// Optional JSON config, sections "frontend", "decoder", "training", "tcn";
// keys mirror the struct field names and all have defaults.
struct ToolConfig {
    FrontendConfig frontend;
    DecoderConfig decoder;
    TrainingConfig training;
    TcnConfig tcn;
};

ToolConfig load_tool_config(const std::string& path);

} // namespace tempokit
