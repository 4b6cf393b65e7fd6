#ifndef ICAFUSION_PARAMS_HPP
#define ICAFUSION_PARAMS_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "icafusion/rng.hpp"
#include "icafusion/tensor.hpp"

namespace icafusion {

/// Named trainable arrays plus their gradient and Adam moment buffers.
/// Registration order is fixed by network construction and defines the
/// checkpoint layout.
template <typename T>
class ParamStore {
public:
    struct Entry {
        std::string name;
        Tensor<T> value;
        Tensor<T> grad;
        Tensor<T> adam_m;
        Tensor<T> adam_v;
    };

    int add(std::string name, Shape shape) {
        entries_.push_back(Entry{std::move(name), Tensor<T>(shape), Tensor<T>(shape),
                                 Tensor<T>(shape), Tensor<T>(shape)});
        return static_cast<int>(entries_.size()) - 1;
    }

    Entry& operator[](int slot) { return entries_[slot]; }
    const Entry& operator[](int slot) const { return entries_[slot]; }
    int count() const { return static_cast<int>(entries_.size()); }

    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& e : entries_) n += e.value.size();
        return n;
    }

    void zero_grad() {
        for (auto& e : entries_) e.grad.zero();
    }

    /// FNV-1a over the raw value bytes. Used for checkpoint integrity and
    /// for asserting that an update left one side of the game untouched.
    std::uint64_t value_hash() const {
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (const auto& e : entries_) {
            const auto* p = reinterpret_cast<const unsigned char*>(e.value.data());
            const std::size_t bytes = e.value.size() * sizeof(T);
            for (std::size_t i = 0; i < bytes; ++i) {
                h ^= p[i];
                h *= 0x100000001b3ull;
            }
        }
        return h;
    }

private:
    std::vector<Entry> entries_;
};

/// He-normal fill scaled by fan-in; the conventional initializer for the
/// PReLU/LeakyReLU stacks used here.
template <typename T>
void init_conv_weight(Tensor<T>& w, int fan_in, Rng& rng) {
    const double s = std::sqrt(2.0 / fan_in);
    for (auto& v : w) v = static_cast<T>(rng.normal() * s);
}

}  // namespace icafusion

#endif
