#include "fatq/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace fatq::checkpoint {

namespace {

constexpr char kMagic[4] = {'F', 'A', 'T', 'Q'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }

void put_u32(std::string& out, std::uint32_t v) {
    char buf[4];
    std::memcpy(buf, &v, 4);
    out.append(buf, 4);
}

void put_u64(std::string& out, std::uint64_t v) {
    char buf[8];
    std::memcpy(buf, &v, 8);
    out.append(buf, 8);
}

void put_f64(std::string& out, double v) {
    char buf[8];
    std::memcpy(buf, &v, 8);
    out.append(buf, 8);
}

void put_f64_array(std::string& out, const std::vector<double>& values) {
    put_u64(out, values.size());
    for (double v : values) put_f64(out, v);
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw std::runtime_error("checkpoint: truncated file");
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(buf[pos++]);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v;
        std::memcpy(&v, buf.data() + pos, 4);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v;
        std::memcpy(&v, buf.data() + pos, 8);
        pos += 8;
        return v;
    }
    double f64() {
        need(8);
        double v;
        std::memcpy(&v, buf.data() + pos, 8);
        pos += 8;
        return v;
    }
    std::vector<double> f64_array() {
        const std::uint64_t n = u64();
        need(n * 8);
        std::vector<double> values(n);
        std::memcpy(values.data(), buf.data() + pos, n * 8);
        pos += n * 8;
        return values;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

std::string encode_layer(const trainer::QatLayer& layer) {
    std::string out;
    put_u8(out, layer.kind == trainer::LayerKind::Conv ? 0 : 1);
    put_u32(out, static_cast<std::uint32_t>(layer.c_out()));
    put_u32(out, static_cast<std::uint32_t>(layer.weights.c_in));
    put_u32(out, static_cast<std::uint32_t>(layer.weights.kh));
    put_u32(out, static_cast<std::uint32_t>(layer.weights.kw));
    put_u32(out, static_cast<std::uint32_t>(layer.stride));
    put_u32(out, static_cast<std::uint32_t>(layer.pad));
    put_f64(out, layer.alpha_w);
    put_f64(out, layer.alpha_a);
    put_f64_array(out, layer.weights.data.data);
    put_f64_array(out, layer.generator.data);
    return out;
}

trainer::QatLayer decode_layer(Reader& r) {
    trainer::QatLayer layer;
    layer.kind = r.u8() == 0 ? trainer::LayerKind::Conv : trainer::LayerKind::FullyConnected;
    const std::uint32_t c_out = r.u32();
    layer.weights.c_in = r.u32();
    layer.weights.kh = r.u32();
    layer.weights.kw = r.u32();
    layer.stride = r.u32();
    layer.pad = r.u32();
    layer.alpha_w = r.f64();
    layer.alpha_a = r.f64();
    const std::vector<double> weights = r.f64_array();
    const std::size_t n = layer.weights.c_in * layer.weights.kh * layer.weights.kw;
    if (weights.size() != c_out * n) {
        throw std::runtime_error("checkpoint: layer weight payload size mismatch");
    }
    layer.weights.data = numerics::RealMatrix(c_out, n);
    layer.weights.data.data = weights;
    const std::vector<double> generator = r.f64_array();
    if (generator.size() != static_cast<std::size_t>(c_out) * c_out) {
        throw std::runtime_error("checkpoint: layer generator payload size mismatch");
    }
    layer.generator = numerics::RealMatrix(c_out, c_out);
    layer.generator.data = generator;
    return layer;
}

}  // namespace

void save(const trainer::QatModel& model, const std::string& path) {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u8(out, static_cast<std::uint8_t>(model.cfg.mode));
    put_u32(out, static_cast<std::uint32_t>(model.cfg.m_w));
    put_u32(out, static_cast<std::uint32_t>(model.cfg.m_a));
    put_u8(out, model.cfg.scheme == quantizers::Scheme::Uniform ? 0 : 1);
    put_u8(out, static_cast<std::uint8_t>((model.cfg.norm_path ? 1 : 0) |
                                          (model.cfg.weight_norm ? 2 : 0)));
    put_u32(out, static_cast<std::uint32_t>(model.cfg.image_size));
    put_u32(out, static_cast<std::uint32_t>(model.cfg.classes));

    put_u32(out, static_cast<std::uint32_t>(model.layers.size()));
    for (const trainer::QatLayer& layer : model.layers) {
        const std::string payload = encode_layer(layer);
        put_u64(out, payload.size());
        out += payload;
    }

    put_u32(out, model.epoch);

    std::ostringstream rng_text;
    model.rng.save(rng_text);
    const std::string rng_blob = rng_text.str();
    put_u64(out, rng_blob.size());
    out += rng_blob;

    put_u32(out, static_cast<std::uint32_t>(model.history.size()));
    for (const trainer::MetricRow& row : model.history) {
        put_u32(out, row.epoch);
        put_u8(out, row.is_validation ? 1 : 0);
        put_f64(out, row.loss);
        put_f64(out, row.accuracy);
    }

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw std::runtime_error("checkpoint: write failed for " + path);
}

trainer::QatModel load(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("checkpoint: cannot open " + path);
    std::stringstream ss;
    ss << file.rdbuf();
    const std::string buf = ss.str();
    Reader r{buf};

    if (r.bytes(4) != std::string(kMagic, 4)) {
        throw std::runtime_error("checkpoint: bad magic in " + path);
    }
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    }

    trainer::QatModel model;
    model.cfg.mode = static_cast<trainer::Mode>(r.u8());
    model.cfg.m_w = static_cast<int>(r.u32());
    model.cfg.m_a = static_cast<int>(r.u32());
    model.cfg.scheme = r.u8() == 0 ? quantizers::Scheme::Uniform : quantizers::Scheme::Logarithmic;
    const std::uint8_t flags = r.u8();
    model.cfg.norm_path = (flags & 1) != 0;
    model.cfg.weight_norm = (flags & 2) != 0;
    model.cfg.image_size = r.u32();
    model.cfg.classes = r.u32();

    const std::uint32_t n_layers = r.u32();
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        const std::uint64_t payload_size = r.u64();
        const std::size_t expected_end = r.pos + payload_size;
        model.layers.push_back(decode_layer(r));
        if (r.pos != expected_end) {
            throw std::runtime_error("checkpoint: layer section length mismatch");
        }
    }

    model.epoch = r.u32();

    const std::uint64_t rng_size = r.u64();
    std::istringstream rng_text(r.bytes(rng_size));
    model.rng.load(rng_text);

    const std::uint32_t n_rows = r.u32();
    for (std::uint32_t i = 0; i < n_rows; ++i) {
        trainer::MetricRow row;
        row.epoch = r.u32();
        row.is_validation = r.u8() != 0;
        row.loss = r.f64();
        row.accuracy = r.f64();
        model.history.push_back(row);
    }
    if (r.pos != buf.size()) {
        throw std::runtime_error("checkpoint: trailing bytes in " + path);
    }
    return model;
}

}  // namespace fatq::checkpoint
