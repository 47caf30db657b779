#include "tempokit/weights_io.hpp"
#include "tempokit/error.hpp"

#include <array>
#include <cstring>
#include <fstream>

namespace tempokit {

namespace {

constexpr char kMagic[4] = {'T', 'C', 'N', 'W'};
constexpr std::uint32_t kVersion = 1;

const std::array<std::uint32_t, 256>& crc_table() {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    return table;
}

void append_u16(std::vector<unsigned char>& out, std::uint16_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xFF));
    out.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
}

void append_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

void append_f32(std::vector<unsigned char>& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    append_u32(out, bits);
}

struct Reader {
    const unsigned char* p;
    std::size_t remaining;
    std::string path;

    void need(std::size_t n) const {
        if (remaining < n) raise(Errc::truncated_file, path + ": unexpected end of file");
    }
    std::uint16_t u16() {
        need(2);
        const std::uint16_t v = static_cast<std::uint16_t>(p[0] | (p[1] << 8));
        p += 2;
        remaining -= 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
        p += 4;
        remaining -= 4;
        return v;
    }
    std::uint8_t u8() {
        need(1);
        const std::uint8_t v = *p;
        ++p;
        --remaining;
        return v;
    }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(p), n);
        p += n;
        remaining -= n;
        return s;
    }
};

} // namespace

std::uint32_t crc32_ieee(const unsigned char* data, std::size_t size) {
    std::uint32_t crc = 0xFFFFFFFFu;
    const auto& table = crc_table();
    for (std::size_t i = 0; i < size; ++i) {
        crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
    }
    return crc ^ 0xFFFFFFFFu;
}

void write_tensor_file(const std::string& path, const std::vector<TensorBlob>& tensors) {
    std::vector<unsigned char> bytes;
    bytes.insert(bytes.end(), kMagic, kMagic + 4);
    append_u32(bytes, kVersion);
    append_u32(bytes, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        if (t.name.size() > 0xFFFF) raise(Errc::invalid_config, "tensor name too long");
        if (t.dims.size() > 0xFF) raise(Errc::invalid_config, "tensor rank too large");
        std::size_t expect = 1;
        for (std::uint32_t d : t.dims) expect *= d;
        if (expect != t.data.size()) {
            raise(Errc::shape_mismatch, "tensor " + t.name + " payload does not match dims");
        }
        append_u16(bytes, static_cast<std::uint16_t>(t.name.size()));
        bytes.insert(bytes.end(), t.name.begin(), t.name.end());
        bytes.push_back(static_cast<unsigned char>(t.dims.size()));
        for (std::uint32_t d : t.dims) append_u32(bytes, d);
        for (float v : t.data) append_f32(bytes, v);
    }
    append_u32(bytes, crc32_ieee(bytes.data(), bytes.size()));

    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::file_not_found, "cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) raise(Errc::file_not_found, "write failed: " + path);
}

std::vector<TensorBlob> read_tensor_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::file_not_found, path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 16) raise(Errc::truncated_file, path + ": too small");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        raise(Errc::malformed_header, path + ": bad magic");
    }
    const std::uint32_t stored_crc = bytes[bytes.size() - 4] |
                                     (bytes[bytes.size() - 3] << 8) |
                                     (bytes[bytes.size() - 2] << 16) |
                                     (static_cast<std::uint32_t>(bytes[bytes.size() - 1]) << 24);
    if (crc32_ieee(bytes.data(), bytes.size() - 4) != stored_crc) {
        raise(Errc::checksum_mismatch, path + ": CRC32 does not match");
    }

    Reader r{bytes.data() + 4, bytes.size() - 8, path};
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
        raise(Errc::version_unsupported,
              path + ": version " + std::to_string(version) + " not supported");
    }
    const std::uint32_t count = r.u32();
    std::vector<TensorBlob> tensors;
    tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        TensorBlob t;
        const std::uint16_t name_len = r.u16();
        t.name = r.str(name_len);
        const std::uint8_t rank = r.u8();
        std::size_t total = 1;
        for (std::uint8_t d = 0; d < rank; ++d) {
            t.dims.push_back(r.u32());
            total *= t.dims.back();
        }
        t.data.resize(total);
        for (std::size_t k = 0; k < total; ++k) t.data[k] = r.f32();
        tensors.push_back(std::move(t));
    }
    return tensors;
}

namespace {

// kernel storage is column-major (out x (taps*in)), which is exactly
// row-major [taps, in, out]
TensorBlob kernel_blob(const std::string& name, const ConvLayer<float>& l) {
    TensorBlob t;
    t.name = name;
    t.dims = {static_cast<std::uint32_t>(l.taps()), static_cast<std::uint32_t>(l.in_channels),
              static_cast<std::uint32_t>(l.kernel.rows())};
    t.data.assign(l.kernel.data(), l.kernel.data() + l.kernel.size());
    return t;
}

TensorBlob vector_blob(const std::string& name, const Eigen::VectorXf& v) {
    TensorBlob t;
    t.name = name;
    t.dims = {static_cast<std::uint32_t>(v.size())};
    t.data.assign(v.data(), v.data() + v.size());
    return t;
}

const TensorBlob& find_tensor(const std::vector<TensorBlob>& tensors, const std::string& name) {
    for (const auto& t : tensors) {
        if (t.name == name) return t;
    }
    raise(Errc::malformed_header, "missing tensor " + name);
}

} // namespace

void save_weights(const TcnWeights<float>& weights, const std::string& path) {
    weights.config.validate();
    std::vector<TensorBlob> tensors;

    TensorBlob cfg;
    cfg.name = "config";
    const auto& c = weights.config;
    cfg.data = {static_cast<float>(c.num_layers),  static_cast<float>(c.kernel_size),
                static_cast<float>(c.num_filters), static_cast<float>(c.tempo_bins),
                static_cast<float>(c.input_bands), static_cast<float>(c.dropout_rate)};
    for (int d : c.dilations) cfg.data.push_back(static_cast<float>(d));
    cfg.dims = {static_cast<std::uint32_t>(cfg.data.size())};
    tensors.push_back(std::move(cfg));

    char name[32];
    for (std::size_t i = 0; i < weights.layers.size(); ++i) {
        std::snprintf(name, sizeof(name), "layer%02zu.kernel", i);
        tensors.push_back(kernel_blob(name, weights.layers[i]));
        std::snprintf(name, sizeof(name), "layer%02zu.bias", i);
        tensors.push_back(vector_blob(name, weights.layers[i].bias));
    }
    tensors.push_back(vector_blob("beat_head.weight", weights.beat_weight));
    tensors.push_back(vector_blob("beat_head.bias",
                                  Eigen::VectorXf::Constant(1, weights.beat_bias)));
    {
        // row-major [bins, filters]
        TensorBlob t;
        t.name = "tempo_head.weight";
        t.dims = {static_cast<std::uint32_t>(weights.tempo_weight.rows()),
                  static_cast<std::uint32_t>(weights.tempo_weight.cols())};
        t.data.reserve(static_cast<std::size_t>(weights.tempo_weight.size()));
        for (Eigen::Index b = 0; b < weights.tempo_weight.rows(); ++b) {
            for (Eigen::Index f = 0; f < weights.tempo_weight.cols(); ++f) {
                t.data.push_back(weights.tempo_weight(b, f));
            }
        }
        tensors.push_back(std::move(t));
    }
    tensors.push_back(vector_blob("tempo_head.bias", weights.tempo_bias));

    write_tensor_file(path, tensors);
}

TcnWeights<float> load_weights(const std::string& path) {
    const auto tensors = read_tensor_file(path);

    const TensorBlob& cfg_blob = find_tensor(tensors, "config");
    if (cfg_blob.data.size() < 7) raise(Errc::malformed_header, path + ": config tensor too small");
    TcnConfig cfg;
    cfg.num_layers = static_cast<int>(cfg_blob.data[0]);
    cfg.kernel_size = static_cast<int>(cfg_blob.data[1]);
    cfg.num_filters = static_cast<int>(cfg_blob.data[2]);
    cfg.tempo_bins = static_cast<int>(cfg_blob.data[3]);
    cfg.input_bands = static_cast<int>(cfg_blob.data[4]);
    cfg.dropout_rate = static_cast<double>(cfg_blob.data[5]);
    cfg.dilations.clear();
    for (std::size_t i = 6; i < cfg_blob.data.size(); ++i) {
        cfg.dilations.push_back(static_cast<int>(cfg_blob.data[i]));
    }
    if (static_cast<int>(cfg.dilations.size()) != cfg.num_layers) {
        raise(Errc::malformed_header, path + ": dilation list does not match layer count");
    }
    cfg.validate();

    TcnWeights<float> w;
    w.config = cfg;
    char name[32];
    int in_ch = cfg.input_bands;
    for (int i = 0; i < cfg.num_layers; ++i) {
        ConvLayer<float> l;
        l.dilation = cfg.dilations[static_cast<std::size_t>(i)];
        l.in_channels = in_ch;
        std::snprintf(name, sizeof(name), "layer%02d.kernel", i);
        const TensorBlob& k = find_tensor(tensors, name);
        if (k.dims.size() != 3 || k.dims[0] != static_cast<std::uint32_t>(cfg.kernel_size) ||
            k.dims[1] != static_cast<std::uint32_t>(in_ch) ||
            k.dims[2] != static_cast<std::uint32_t>(cfg.num_filters)) {
            raise(Errc::shape_mismatch, path + ": bad kernel shape for layer " + std::to_string(i));
        }
        l.kernel.resize(cfg.num_filters, cfg.kernel_size * in_ch);
        std::memcpy(l.kernel.data(), k.data.data(), k.data.size() * sizeof(float));
        std::snprintf(name, sizeof(name), "layer%02d.bias", i);
        const TensorBlob& b = find_tensor(tensors, name);
        if (b.data.size() != static_cast<std::size_t>(cfg.num_filters)) {
            raise(Errc::shape_mismatch, path + ": bad bias shape for layer " + std::to_string(i));
        }
        l.bias = Eigen::Map<const Eigen::VectorXf>(b.data.data(),
                                                   static_cast<Eigen::Index>(b.data.size()));
        w.layers.push_back(std::move(l));
        in_ch = cfg.num_filters;
    }

    const TensorBlob& bw = find_tensor(tensors, "beat_head.weight");
    if (bw.data.size() != static_cast<std::size_t>(cfg.num_filters)) {
        raise(Errc::shape_mismatch, path + ": bad beat head shape");
    }
    w.beat_weight = Eigen::Map<const Eigen::VectorXf>(bw.data.data(),
                                                      static_cast<Eigen::Index>(bw.data.size()));
    const TensorBlob& bb = find_tensor(tensors, "beat_head.bias");
    if (bb.data.size() != 1) raise(Errc::shape_mismatch, path + ": bad beat bias shape");
    w.beat_bias = bb.data[0];

    const TensorBlob& tw = find_tensor(tensors, "tempo_head.weight");
    if (tw.dims.size() != 2 || tw.dims[0] != static_cast<std::uint32_t>(cfg.tempo_bins) ||
        tw.dims[1] != static_cast<std::uint32_t>(cfg.num_filters)) {
        raise(Errc::shape_mismatch, path + ": bad tempo head shape");
    }
    w.tempo_weight.resize(cfg.tempo_bins, cfg.num_filters);
    std::size_t idx = 0;
    for (Eigen::Index b = 0; b < w.tempo_weight.rows(); ++b) {
        for (Eigen::Index f = 0; f < w.tempo_weight.cols(); ++f) {
            w.tempo_weight(b, f) = tw.data[idx++];
        }
    }
    const TensorBlob& tb = find_tensor(tensors, "tempo_head.bias");
    if (tb.data.size() != static_cast<std::size_t>(cfg.tempo_bins)) {
        raise(Errc::shape_mismatch, path + ": bad tempo bias shape");
    }
    w.tempo_bias = Eigen::Map<const Eigen::VectorXf>(tb.data.data(),
                                                     static_cast<Eigen::Index>(tb.data.size()));
    return w;
}

} // namespace tempokit
