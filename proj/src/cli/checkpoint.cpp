#include "flaprl/cli/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "flaprl/error.hpp"

namespace flaprl::cli {

namespace {

class Writer {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out.insert(out.end(), b, b + n);
    }
    template <class U>
    void le(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }

    std::vector<std::uint8_t> out;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}

    void need(std::uint64_t n, const char* what) const {
        if (bytes_.size() - pos_ < n)
            throw CheckpointError(CheckpointError::Kind::truncated,
                                  std::string("checkpoint truncated while reading ") + what + " at byte " +
                                      std::to_string(pos_) + " of " + std::to_string(bytes_.size()));
    }
    std::span<const std::uint8_t> take(std::size_t n, const char* what) {
        need(n, what);
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    template <class U>
    U le(const char* what) {
        const auto s = take(sizeof(U), what);
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(s[i]) << (8 * i));
        return v;
    }
    float f32(const char* what) { return std::bit_cast<float>(le<std::uint32_t>(what)); }
    bool done() const { return pos_ == bytes_.size(); }
    std::size_t position() const { return pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

[[noreturn]] void malformed(const std::string& what) {
    throw CheckpointError(CheckpointError::Kind::malformed, "malformed checkpoint: " + what);
}

struct StoredLayer {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<float> weights;
    std::vector<float> biases;
};

int dim(const std::vector<StoredLayer>& layers, std::size_t i, std::size_t d) {
    if (i >= layers.size() || d >= layers[i].dims.size()) malformed("unexpected layer structure");
    return static_cast<int>(layers[i].dims[d]);
}

nn::Architecture canonical(Algorithm algo, const std::vector<StoredLayer>& layers) {
    if (algo == Algorithm::dqn) {
        if (layers.size() != 5) malformed("DQN checkpoint needs 5 layers, found " + std::to_string(layers.size()));
        return nn::dqn_architecture(nn::kFrameStackShape,
                                    {dim(layers, 0, 0), dim(layers, 1, 0), dim(layers, 2, 0), dim(layers, 3, 0)});
    }
    if (layers.size() != 5) malformed("A3C checkpoint needs 5 layers, found " + std::to_string(layers.size()));
    return nn::a3c_architecture(nn::kFrameStackShape, {dim(layers, 0, 0), dim(layers, 1, 0), dim(layers, 2, 0)});
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(Algorithm algo, std::uint64_t step, const nn::Network<float>& net) {
    Writer w;
    w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
    w.le(kCheckpointVersion);
    w.le(static_cast<std::uint8_t>(algo));
    w.le(step);
    std::uint32_t count = 0;
    for (const auto& p : net.plan()) count += p.spec.has_parameters();
    w.le(count);
    for (std::size_t l = 0; l < net.plan().size(); ++l) {
        const nn::LayerPlan& p = net.plan()[l];
        if (!p.spec.has_parameters()) continue;
        w.le(static_cast<std::uint16_t>(p.name.size()));
        w.bytes(p.name.data(), p.name.size());
        w.le(static_cast<std::uint32_t>(p.weight_dims.size()));
        for (std::uint32_t d : p.weight_dims) w.le(d);
        for (float v : net.weights(l)) w.f32(v);
        for (float v : net.bias(l)) w.f32(v);
    }
    return std::move(w.out);
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    const std::size_t head = std::min(bytes.size(), sizeof kCheckpointMagic);
    if (head == 0 || std::memcmp(bytes.data(), kCheckpointMagic, head) != 0)
        throw CheckpointError(CheckpointError::Kind::bad_magic, "not a checkpoint: bad magic (expected FLAPRL01)");
    r.take(sizeof kCheckpointMagic, "magic");
    const auto version = r.le<std::uint32_t>("version");
    if (version != kCheckpointVersion)
        throw CheckpointError(CheckpointError::Kind::bad_version,
                              "unsupported checkpoint version " + std::to_string(version) + " (expected " +
                                  std::to_string(kCheckpointVersion) + ")");
    const auto tag = r.le<std::uint8_t>("algorithm tag");
    if (tag > 1) malformed("unknown algorithm tag " + std::to_string(tag));
    const auto algo = static_cast<Algorithm>(tag);
    const auto step = r.le<std::uint64_t>("step");
    const auto count = r.le<std::uint32_t>("layer count");
    if (count > 64) malformed("implausible layer count " + std::to_string(count));

    std::vector<StoredLayer> layers(count);
    for (auto& layer : layers) {
        const auto len = r.le<std::uint16_t>("layer name length");
        const auto name = r.take(len, "layer name");
        layer.name.assign(name.begin(), name.end());
        const auto rank = r.le<std::uint32_t>("rank");
        if (rank != 2 && rank != 4) malformed("layer '" + layer.name + "' has rank " + std::to_string(rank));
        std::uint64_t n = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            layer.dims.push_back(r.le<std::uint32_t>("dims"));
            n *= layer.dims.back();
        }
        if (n == 0 || n > (std::uint64_t{1} << 31)) malformed("layer '" + layer.name + "' has implausible dims");
        r.need(4 * (n + layer.dims[0]), "weights");
        layer.weights.resize(static_cast<std::size_t>(n));
        for (float& v : layer.weights) v = r.f32("weights");
        layer.biases.resize(layer.dims[0]);
        for (float& v : layer.biases) v = r.f32("biases");
    }
    if (!r.done())
        malformed(std::to_string(bytes.size() - r.position()) + " trailing bytes after the last layer");

    Checkpoint cp{algo, step, nn::Network<float>(canonical(algo, layers))};
    std::size_t k = 0;
    for (std::size_t l = 0; l < cp.network.plan().size(); ++l) {
        const nn::LayerPlan& p = cp.network.plan()[l];
        if (!p.spec.has_parameters()) continue;
        const StoredLayer& s = layers[k++];
        if (s.name != p.name) malformed("layer " + std::to_string(k) + " is '" + s.name + "', expected '" + p.name + "'");
        if (s.dims != p.weight_dims) malformed("layer '" + s.name + "' dims do not match the architecture");
        std::copy(s.weights.begin(), s.weights.end(), cp.network.weights(l).begin());
        std::copy(s.biases.begin(), s.biases.end(), cp.network.bias(l).begin());
    }
    return cp;
}

void save_checkpoint(const std::string& path, Algorithm algo, std::uint64_t step, const nn::Network<float>& net) {
    const auto bytes = encode_checkpoint(algo, step, net);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write checkpoint " + tmp);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw IoError("failed writing checkpoint " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into place at " + path + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path);
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace flaprl::cli
