#include "ddim/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include "ddim/pgm.hpp"

namespace ddim {

namespace {

class Writer {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    template <typename U>
    void le(U v) {
        static_assert(std::is_unsigned_v<U>);
        for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u8(std::uint8_t v) { le(v); }
    void u16(std::uint16_t v) { le(v); }
    void u32(std::uint32_t v) { le(v); }
    void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }

    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

    const std::uint8_t* bytes(std::size_t n, const char* what) {
        if (b_.size() - pos_ < n) {
            throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos_) + " while reading " + what);
        }
        const auto* p = b_.data() + pos_;
        pos_ += n;
        return p;
    }
    template <typename U>
    U le(const char* what) {
        const auto* p = bytes(sizeof(U), what);
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
        return v;
    }
    std::uint8_t u8(const char* w) { return le<std::uint8_t>(w); }
    std::uint16_t u16(const char* w) { return le<std::uint16_t>(w); }
    std::uint32_t u32(const char* w) { return le<std::uint32_t>(w); }
    float f32(const char* w) { return std::bit_cast<float>(le<std::uint32_t>(w)); }
    double f64(const char* w) { return std::bit_cast<double>(le<std::uint64_t>(w)); }

    bool done() const { return pos_ == b_.size(); }
    std::size_t pos() const { return pos_; }

private:
    std::span<const std::uint8_t> b_;
    std::size_t pos_ = 0;
};

std::uint32_t to_u32(std::size_t v, const char* what) {
    if (v > std::numeric_limits<std::uint32_t>::max()) throw CheckpointError(std::string(what) + " exceeds 32 bits");
    return static_cast<std::uint32_t>(v);
}

}  // namespace

Checkpoint Checkpoint::from_model(const UNet<float>& model, const NormStats& norm, const DiffusionSchedule& schedule) {
    Checkpoint c{model.config(), schedule, norm, model.parameters()};
    for (const auto& [name, t] : model.buffers()) c.tensors.emplace(name, t);
    return c;
}

UNet<float> Checkpoint::to_model() const {
    UNet<float> model(config);
    std::size_t matched = 0;
    for (auto* group : {&model.parameters(), &model.buffers()}) {
        for (auto& [name, t] : *group) {
            auto it = tensors.find(name);
            if (it == tensors.end()) throw CheckpointError("checkpoint is missing tensor " + name);
            if (it->second.shape() != t.shape()) {
                throw CheckpointError("checkpoint tensor " + name + " has shape " + shape_str(it->second.shape()) +
                                      ", model expects " + shape_str(t.shape()));
            }
            t = it->second;
            ++matched;
        }
    }
    if (matched != tensors.size()) {
        for (const auto& [name, t] : tensors) {
            if (!model.parameters().contains(name) && !model.buffers().contains(name)) {
                throw CheckpointError("checkpoint holds unexpected tensor " + name);
            }
        }
    }
    return model;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
    Writer w;
    w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
    w.u32(kCheckpointVersion);
    w.u32(to_u32(ckpt.config.image_height, "image height"));
    w.u32(to_u32(ckpt.config.image_width, "image width"));
    w.f64(ckpt.schedule.max_signal_rate());
    w.f64(ckpt.schedule.min_signal_rate());
    w.f64(ckpt.norm.mean);
    w.f64(ckpt.norm.std);
    w.u32(to_u32(ckpt.config.widths.size() + 1, "width count"));
    for (auto v : ckpt.config.widths) w.u32(to_u32(v, "width"));
    w.u32(to_u32(ckpt.config.bottleneck_width, "bottleneck width"));
    w.u32(to_u32(ckpt.config.block_depth, "block depth"));
    w.u32(to_u32(ckpt.config.embedding_size, "embedding size"));
    w.u32(to_u32(ckpt.tensors.size(), "tensor count"));
    for (const auto& [name, t] : ckpt.tensors) {
        if (name.size() > std::numeric_limits<std::uint16_t>::max()) throw CheckpointError("tensor name too long");
        if (t.rank() > std::numeric_limits<std::uint8_t>::max()) throw CheckpointError("tensor rank too large");
        for (float v : t.values()) {
            if (!std::isfinite(v)) throw CheckpointError("tensor " + name + " holds a non-finite value");
        }
        w.u16(static_cast<std::uint16_t>(name.size()));
        w.bytes(name.data(), name.size());
        w.u8(static_cast<std::uint8_t>(t.rank()));
        for (auto d : t.shape()) w.u32(to_u32(d, "dimension"));
        for (float v : t.values()) w.f32(v);
    }
    return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    const auto* magic = r.bytes(sizeof kCheckpointMagic, "magic");
    if (std::memcmp(magic, kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
        std::string found;
        for (std::size_t i = 0; i < sizeof kCheckpointMagic; ++i) {
            found += std::isprint(magic[i]) ? static_cast<char>(magic[i]) : '?';
        }
        throw CheckpointError("bad checkpoint magic \"" + found + "\", expected \"DDIMBRG1\"");
    }
    const auto version = r.u32("version");
    if (version != kCheckpointVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + ", expected " +
                              std::to_string(kCheckpointVersion));
    }
    Checkpoint c;
    c.config.image_height = r.u32("image height");
    c.config.image_width = r.u32("image width");
    const double max_signal = r.f64("max signal rate");
    const double min_signal = r.f64("min signal rate");
    try {
        c.schedule = DiffusionSchedule(max_signal, min_signal);
    } catch (const std::invalid_argument& e) {
        throw CheckpointError(std::string("invalid schedule in checkpoint: ") + e.what());
    }
    c.norm.mean = r.f64("norm mean");
    c.norm.std = r.f64("norm std");
    const auto nw = r.u32("width count");
    if (nw < 2 || nw > 64) throw CheckpointError("invalid width count " + std::to_string(nw));
    c.config.widths.clear();
    for (std::uint32_t i = 0; i + 1 < nw; ++i) c.config.widths.push_back(r.u32("width"));
    c.config.bottleneck_width = r.u32("bottleneck width");
    c.config.block_depth = r.u32("block depth");
    c.config.embedding_size = r.u32("embedding size");
    try {
        c.config.validate();
    } catch (const std::invalid_argument& e) {
        throw CheckpointError(std::string("invalid model config in checkpoint: ") + e.what());
    }
    const auto count = r.u32("tensor count");
    for (std::uint32_t k = 0; k < count; ++k) {
        const auto len = r.u16("name length");
        const auto* name_bytes = r.bytes(len, "tensor name");
        std::string name(reinterpret_cast<const char*>(name_bytes), len);
        const auto rank = r.u8("rank");
        if (rank == 0) throw CheckpointError("tensor " + name + " has rank 0");
        Shape shape(rank);
        for (auto& d : shape) {
            d = r.u32("dimension");
            if (d == 0) throw CheckpointError("tensor " + name + " has a zero dimension");
        }
        const std::size_t n = shape_numel(shape);
        if (n > bytes.size()) throw CheckpointError("tensor " + name + " larger than the file");
        std::vector<float> values(n);
        for (auto& v : values) v = r.f32("tensor values");
        if (!c.tensors.emplace(name, Tensor<float>(std::move(shape), std::move(values))).second) {
            throw CheckpointError("duplicate tensor " + name);
        }
    }
    if (!r.done()) throw CheckpointError("trailing bytes after checkpoint body at byte " + std::to_string(r.pos()));
    return c;
}

void save_checkpoint(const UNet<float>& model, const NormStats& norm, const DiffusionSchedule& schedule,
                     const std::filesystem::path& path) {
    const auto bytes = encode_checkpoint(Checkpoint::from_model(model, norm, schedule));
    try {
        write_file(path, bytes);
    } catch (const std::runtime_error& e) {
        throw CheckpointError(std::string("saving checkpoint: ") + e.what());
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::vector<std::uint8_t> bytes;
    try {
        bytes = read_file(path);
    } catch (const std::runtime_error& e) {
        throw CheckpointError(std::string("loading checkpoint: ") + e.what());
    }
    try {
        return decode_checkpoint(bytes);
    } catch (const CheckpointError& e) {
        throw CheckpointError(path.string() + ": " + e.what());
    }
}

}  // namespace ddim
