#include "midipose/dataset.hpp"

#include <cstring>
#include <fstream>

namespace midipose {
namespace {

// The payload is raw little-endian; serialize through byte buffers so the
// format does not depend on host endianness.
class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("write_dataset: cannot open " + path.string());
    }
    void u32(std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
        out_.write(reinterpret_cast<const char*>(b), 4);
    }
    void f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), n); }
    void finish() {
        out_.flush();
        if (!out_) throw std::runtime_error("write_dataset: I/O failure");
    }

private:
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
        if (!in_) throw std::runtime_error("read_dataset: cannot open " + path.string());
    }
    std::uint32_t u32() {
        unsigned char b[4];
        read(b, 4);
        return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
               std::uint32_t(b[3]) << 24;
    }
    float f32() {
        std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    void read(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), n);
        if (in_.gcount() != static_cast<std::streamsize>(n)) {
            throw std::runtime_error("read_dataset: truncated file");
        }
    }
    bool at_eof() {
        in_.peek();
        return in_.eof();
    }

private:
    std::ifstream in_;
};

constexpr char kMagic[4] = {'M', 'D', 'P', '1'};

}  // namespace

void write_dataset(std::span<const CsiFrame> frames, std::span<const LabeledFrame> labels,
                   const std::filesystem::path& path, const FeatureTensor* features) {
    if (frames.empty() || labels.empty()) throw std::invalid_argument("write_dataset: empty dataset");
    for (const auto& f : frames) validate_frame(f);
    for (const auto& l : labels) validate_label(l);
    if (features && features->frames != frames.size()) {
        throw std::invalid_argument("write_dataset: feature section frame count mismatch");
    }

    Writer w(path);
    w.bytes(kMagic, 4);
    w.u32(kDatasetVersion);
    w.u32(static_cast<std::uint32_t>(frames.size()));
    w.u32(static_cast<std::uint32_t>(labels.size()));
    w.u32(features ? static_cast<std::uint32_t>(features->frames) : 0u);
    w.u32(static_cast<std::uint32_t>(kSubcarriers));
    w.u32(static_cast<std::uint32_t>(kRrus));
    w.u32(static_cast<std::uint32_t>(kFeatureChannels));

    for (const auto& f : frames) {
        w.f32(static_cast<float>(f.timestamp));
        for (const auto& z : f.h) {
            w.f32(static_cast<float>(z.real()));
            w.f32(static_cast<float>(z.imag()));
        }
    }
    for (const auto& l : labels) {
        for (double v : l.pose.xy) w.f32(static_cast<float>(v));
        w.f32(static_cast<float>(l.timestamp));
        w.u32(static_cast<std::uint32_t>(l.motion));
        w.u32(static_cast<std::uint32_t>(l.state_tag));
    }
    if (features) {
        for (float v : features->data) w.f32(v);
    }
    w.finish();
}

Dataset read_dataset(const std::filesystem::path& path) {
    Reader r(path);
    char magic[4];
    r.read(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("read_dataset: bad magic");
    const std::uint32_t version = r.u32();
    if (version != kDatasetVersion) {
        throw std::runtime_error("read_dataset: unsupported version " + std::to_string(version));
    }
    const std::uint32_t frame_count = r.u32();
    const std::uint32_t label_count = r.u32();
    const std::uint32_t feature_count = r.u32();
    const std::uint32_t subc = r.u32();
    const std::uint32_t rrus = r.u32();
    const std::uint32_t chans = r.u32();
    if (frame_count == 0 || label_count == 0) throw std::runtime_error("read_dataset: empty dataset");
    if (subc != kSubcarriers || rrus != kRrus || chans != kFeatureChannels) {
        throw std::runtime_error("read_dataset: unexpected grid dimensions");
    }
    if (feature_count != 0 && feature_count != frame_count) {
        throw std::runtime_error("read_dataset: feature section frame count mismatch");
    }

    Dataset ds;
    ds.frames.resize(frame_count);
    for (auto& f : ds.frames) {
        f.timestamp = r.f32();
        for (auto& z : f.h) {
            const double re = r.f32();
            const double im = r.f32();
            z = {re, im};
        }
        validate_frame(f);
    }
    for (std::size_t i = 1; i < ds.frames.size(); ++i) {
        if (!(ds.frames[i].timestamp > ds.frames[i - 1].timestamp)) {
            throw std::runtime_error("read_dataset: non-monotonic CSI timestamps at frame " +
                                     std::to_string(i));
        }
    }

    ds.labels.resize(label_count);
    for (auto& l : ds.labels) {
        for (double& v : l.pose.xy) v = r.f32();
        l.timestamp = r.f32();
        const std::uint32_t motion = r.u32();
        const std::uint32_t tag = r.u32();
        if (motion > static_cast<std::uint32_t>(MotionKind::squat)) {
            throw std::runtime_error("read_dataset: invalid motion kind");
        }
        if (tag > static_cast<std::uint32_t>(StateTag::squat1)) {
            throw std::runtime_error("read_dataset: invalid state tag");
        }
        l.motion = static_cast<MotionKind>(motion);
        l.state_tag = static_cast<StateTag>(tag);
        validate_label(l);
    }
    for (std::size_t i = 1; i < ds.labels.size(); ++i) {
        if (!(ds.labels[i].timestamp > ds.labels[i - 1].timestamp)) {
            throw std::runtime_error("read_dataset: non-monotonic label timestamps at frame " +
                                     std::to_string(i));
        }
    }

    if (feature_count > 0) {
        FeatureTensor ft;
        ft.frames = feature_count;
        ft.data.resize(feature_count * FeatureTensor::frame_stride());
        for (float& v : ft.data) v = r.f32();
        ds.features = std::move(ft);
    }
    if (!r.at_eof()) throw std::runtime_error("read_dataset: trailing bytes after payload");
    return ds;
}

}  // namespace midipose
