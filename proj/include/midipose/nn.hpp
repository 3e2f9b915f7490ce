#pragma once

#include <filesystem>

#include "midipose/autodiff.hpp"
#include "midipose/random.hpp"

namespace midipose::nn {

/// Named parameter tensors in a stable (insertion) order. Non-trainable
/// entries carry frozen state such as normalization statistics.
class ParamStore {
public:
    struct Item {
        std::string name;
        ad::Tensor tensor;
        bool trainable = true;
    };

    std::size_t add(std::string name, ad::Tensor tensor, bool trainable = true);
    std::size_t index_of(std::string_view name) const;  // throws if absent
    bool contains(std::string_view name) const;

    Item& item(std::size_t i) { return items_.at(i); }
    const Item& item(std::size_t i) const { return items_.at(i); }
    ad::Tensor& tensor(std::string_view name) { return items_[index_of(name)].tensor; }
    const ad::Tensor& tensor(std::string_view name) const { return items_[index_of(name)].tensor; }

    std::size_t count() const { return items_.size(); }
    std::size_t total_values() const;

private:
    std::vector<Item> items_;
};

/// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization.
void init_uniform_fanin(ad::Tensor& t, std::size_t fan_in, Rng& rng);

/// Step-decayed learning rate: base * factor^floor(epoch / period).
double lr_schedule(std::size_t epoch, double base_lr = 0.008, double factor = 0.5,
                   std::size_t period = 10);

/// SGD with momentum: v <- mu * v + g; p <- p - lr * v.
class SgdOptimizer {
public:
    explicit SgdOptimizer(double momentum = 0.9) : momentum_(momentum) {}

    /// Applies one update to every trainable item; grads are indexed like
    /// the store. Throws on shape mismatch or non-finite gradient.
    void step(ParamStore& params, std::span<const ad::Tensor> grads, double lr);

private:
    double momentum_;
    std::vector<ad::Tensor> velocity_;
};

/// Checkpoint container: magic "MDPW", version u32, parameter count, then
/// per parameter (name length, name bytes, rank, dims, f32 data LE).
void save_checkpoint(const ParamStore& params, const std::filesystem::path& path);

/// Loads a checkpoint into `params`, matching by name; every stored tensor
/// must exist in the store with an identical shape and vice versa.
void load_checkpoint(ParamStore& params, const std::filesystem::path& path);

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace midipose::nn
