#include "midipose/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace midipose::nn {

std::size_t ParamStore::add(std::string name, ad::Tensor tensor, bool trainable) {
    if (contains(name)) throw std::invalid_argument("ParamStore: duplicate name " + name);
    items_.push_back({std::move(name), std::move(tensor), trainable});
    return items_.size() - 1;
}

std::size_t ParamStore::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < items_.size(); ++i) {
        if (items_[i].name == name) return i;
    }
    throw std::out_of_range("ParamStore: no parameter named " + std::string(name));
}

bool ParamStore::contains(std::string_view name) const {
    for (const auto& it : items_) {
        if (it.name == name) return true;
    }
    return false;
}

std::size_t ParamStore::total_values() const {
    std::size_t n = 0;
    for (const auto& it : items_) n += it.tensor.size();
    return n;
}

void init_uniform_fanin(ad::Tensor& t, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
}

double lr_schedule(std::size_t epoch, double base_lr, double factor, std::size_t period) {
    return base_lr * std::pow(factor, static_cast<double>(epoch / period));
}

void SgdOptimizer::step(ParamStore& params, std::span<const ad::Tensor> grads, double lr) {
    if (grads.size() != params.count()) throw std::invalid_argument("sgd_step: gradient count mismatch");
    if (velocity_.empty()) {
        velocity_.resize(params.count());
        for (std::size_t i = 0; i < params.count(); ++i) {
            velocity_[i] = ad::Tensor(params.item(i).tensor.shape());
        }
    }
    for (std::size_t i = 0; i < params.count(); ++i) {
        auto& item = params.item(i);
        if (!item.trainable) continue;
        const ad::Tensor& g = grads[i];
        if (!g.same_shape(item.tensor)) {
            throw std::invalid_argument("sgd_step: shape mismatch for " + item.name);
        }
        if (!g.all_finite()) {
            throw std::runtime_error("sgd_step: non-finite gradient for " + item.name);
        }
        ad::Tensor& v = velocity_[i];
        for (std::size_t j = 0; j < v.size(); ++j) {
            v[j] = momentum_ * v[j] + g[j];
            item.tensor[j] -= lr * v[j];
        }
    }
}

namespace {

constexpr char kMagic[4] = {'M', 'D', 'P', 'W'};

void put_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw std::runtime_error("load_checkpoint: truncated file");
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
           std::uint32_t(b[3]) << 24;
}

}  // namespace

void save_checkpoint(const ParamStore& params, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
    out.write(kMagic, 4);
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(params.count()));
    for (std::size_t i = 0; i < params.count(); ++i) {
        const auto& item = params.item(i);
        put_u32(out, static_cast<std::uint32_t>(item.name.size()));
        out.write(item.name.data(), static_cast<std::streamsize>(item.name.size()));
        put_u32(out, static_cast<std::uint32_t>(item.tensor.rank()));
        for (std::size_t d : item.tensor.shape()) put_u32(out, static_cast<std::uint32_t>(d));
        for (std::size_t j = 0; j < item.tensor.size(); ++j) {
            const float v = static_cast<float>(item.tensor[j]);
            std::uint32_t bits;
            std::memcpy(&bits, &v, 4);
            put_u32(out, bits);
        }
    }
    out.flush();
    if (!out) throw std::runtime_error("save_checkpoint: I/O failure");
}

void load_checkpoint(ParamStore& params, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("load_checkpoint: bad magic");
    }
    const std::uint32_t version = get_u32(in);
    if (version != kCheckpointVersion) {
        throw std::runtime_error("load_checkpoint: unsupported version " + std::to_string(version));
    }
    const std::uint32_t count = get_u32(in);
    if (count != params.count()) {
        throw std::runtime_error("load_checkpoint: parameter count mismatch (expected " +
                                 std::to_string(params.count()) + ", file has " +
                                 std::to_string(count) + ")");
    }
    std::vector<bool> seen(params.count(), false);
    for (std::uint32_t p = 0; p < count; ++p) {
        const std::uint32_t name_len = get_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (in.gcount() != static_cast<std::streamsize>(name_len)) {
            throw std::runtime_error("load_checkpoint: truncated file");
        }
        const std::uint32_t rank = get_u32(in);
        std::vector<std::size_t> dims(rank);
        std::size_t total = 1;
        for (auto& d : dims) {
            d = get_u32(in);
            total *= d;
        }
        const std::size_t idx = params.index_of(name);  // throws for unknown names
        auto& item = params.item(idx);
        if (item.tensor.shape() != dims) {
            throw std::runtime_error("load_checkpoint: shape mismatch for " + name);
        }
        if (seen[idx]) throw std::runtime_error("load_checkpoint: duplicate parameter " + name);
        seen[idx] = true;
        for (std::size_t j = 0; j < total; ++j) {
            const std::uint32_t bits = get_u32(in);
            float v;
            std::memcpy(&v, &bits, 4);
            item.tensor[j] = v;
        }
    }
}

}  // namespace midipose::nn
