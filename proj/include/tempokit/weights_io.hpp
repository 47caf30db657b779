#pragma once

#include "tempokit/tcn.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tempokit {

// One tensor in the TCNW container. Payload is float32 little-endian in
// row-major order over `dims`.
struct TensorBlob {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<float> data;
};

// TCNW container: magic "TCNW", u32 LE version (=1), u32 tensor count; per
// tensor u16 name length, UTF-8 name, u8 rank, u32 dims, float32 LE payload;
// trailing CRC32 (IEEE) over all preceding bytes.
void write_tensor_file(const std::string& path, const std::vector<TensorBlob>& tensors);
std::vector<TensorBlob> read_tensor_file(const std::string& path);

std::uint32_t crc32_ieee(const unsigned char* data, std::size_t size);

// Model weights as TCNW tensors. The architecture travels in a "config"
// tensor so load_weights can rebuild the model without outside information.
void save_weights(const TcnWeights<float>& weights, const std::string& path);
TcnWeights<float> load_weights(const std::string& path);

} // namespace tempokit
