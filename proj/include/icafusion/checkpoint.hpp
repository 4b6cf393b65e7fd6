#ifndef ICAFUSION_CHECKPOINT_HPP
#define ICAFUSION_CHECKPOINT_HPP

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>

#include "icafusion/serialize.hpp"
#include "icafusion/trainer.hpp"

// Checkpoint container, format version 1.
//
//   bytes 0..7   magic "ICFCKPT\0"
//   bytes 8..11  u32 LE container version
//   bytes 12..19 u64 LE header length
//   header       JSON (UTF-8): specs, train config, counters, rng state,
//                adam step counts, dtype, ordered tensor directory
//                (name/shape/count), FNV-1a 64 hash of the payload
//   payload      raw little-endian tensor data in directory order
//
// Tensors are namespaced "generator/...", "critic_ir/...", "critic_vis/...";
// each parameter is followed by its Adam moments as "<name>#m" / "<name>#v".
// Writes go to a temp file and are renamed into place.

namespace icafusion {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'I', 'C', 'F', 'C', 'K', 'P', 'T', '\0'};

namespace detail {

inline std::uint64_t fnv1a(const unsigned char* p, std::size_t n, std::uint64_t h) {
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

template <typename T>
const char* dtype_name() {
    if constexpr (sizeof(T) == 4)
        return "f32";
    else
        return "f64";
}

}  // namespace detail

template <typename T>
void save_checkpoint(const Trainer<T>& trainer, const std::string& path) {
    json header;
    header["format_version"] = kCheckpointVersion;
    header["dtype"] = detail::dtype_name<T>();
    header["generator_spec"] = trainer.generator().spec();
    header["critic_spec"] = trainer.critic_ir().spec();
    header["train_config"] = trainer.config();
    header["step"] = trainer.step();
    header["rng_state"] = trainer.rng_state();
    header["adam_t"] = {{"generator", trainer.adam_t_generator()},
                        {"critic_ir", trainer.adam_t_critic_ir()},
                        {"critic_vis", trainer.adam_t_critic_vis()}};
    header["generator_parameter_count"] = trainer.generator().params().parameter_count();

    json dir = json::array();
    std::uint64_t hash = 0xcbf29ce484222325ull;
    std::vector<const Tensor<T>*> order;
    auto add = [&](const std::string& name, const Tensor<T>& t) {
        dir.push_back({{"name", name},
                       {"shape", {t.shape().n, t.shape().c, t.shape().h, t.shape().w}},
                       {"count", t.size()}});
        order.push_back(&t);
        hash = detail::fnv1a(reinterpret_cast<const unsigned char*>(t.data()),
                             t.size() * sizeof(T), hash);
    };
    auto add_store = [&](const ParamStore<T>& store) {
        for (const auto& e : store) {
            add(e.name, e.value);
            add(e.name + "#m", e.adam_m);
            add(e.name + "#v", e.adam_v);
        }
    };
    add_store(trainer.generator().params());
    add_store(trainer.critic_ir().params());
    add_store(trainer.critic_vis().params());
    header["tensors"] = std::move(dir);
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(hash));
    header["param_hash"] = hex;

    const std::string body = header.dump();
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw CheckpointError("cannot write checkpoint: " + tmp);
        f.write(kCheckpointMagic, 8);
        const std::uint32_t ver = kCheckpointVersion;
        const std::uint64_t hlen = body.size();
        f.write(reinterpret_cast<const char*>(&ver), 4);
        f.write(reinterpret_cast<const char*>(&hlen), 8);
        f.write(body.data(), static_cast<std::streamsize>(body.size()));
        for (const Tensor<T>* t : order)
            f.write(reinterpret_cast<const char*>(t->data()),
                    static_cast<std::streamsize>(t->size() * sizeof(T)));
        if (!f) throw CheckpointError("checkpoint write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

namespace detail {

struct RawCheckpoint {
    json header;
    std::vector<char> payload;
};

inline RawCheckpoint read_raw(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open checkpoint: " + path);
    char magic[8];
    std::uint32_t ver = 0;
    std::uint64_t hlen = 0;
    f.read(magic, 8);
    f.read(reinterpret_cast<char*>(&ver), 4);
    f.read(reinterpret_cast<char*>(&hlen), 8);
    if (!f || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw CheckpointError("not a checkpoint file: " + path);
    if (ver != kCheckpointVersion)
        throw CheckpointError("checkpoint version mismatch: file has v" + std::to_string(ver) +
                              ", this build reads v" + std::to_string(kCheckpointVersion));
    std::string body(hlen, '\0');
    f.read(body.data(), static_cast<std::streamsize>(hlen));
    if (!f) throw CheckpointError("truncated checkpoint header: " + path);
    RawCheckpoint raw;
    try {
        raw.header = json::parse(body);
    } catch (const json::exception& e) {
        throw CheckpointError("corrupt checkpoint header: " + std::string(e.what()));
    }
    std::uint64_t total = 0;
    for (const auto& t : raw.header.at("tensors")) total += t.at("count").get<std::uint64_t>();
    const std::string dtype = raw.header.at("dtype").get<std::string>();
    const std::size_t esize = dtype == "f32" ? 4 : 8;
    raw.payload.resize(total * esize);
    f.read(raw.payload.data(), static_cast<std::streamsize>(raw.payload.size()));
    if (!f || f.gcount() != static_cast<std::streamsize>(raw.payload.size()))
        throw CheckpointError("truncated checkpoint payload: " + path);
    std::uint64_t hash = fnv1a(reinterpret_cast<const unsigned char*>(raw.payload.data()),
                               raw.payload.size(), 0xcbf29ce484222325ull);
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(hash));
    if (raw.header.at("param_hash").get<std::string>() != hex)
        throw CheckpointError("checkpoint integrity failure (hash mismatch): " + path);
    return raw;
}

template <typename T>
void fill_store(ParamStore<T>& store, const json& dir, const std::vector<char>& payload,
                const std::string& prefix) {
    // Build name -> payload offset map once per store prefix.
    std::size_t offset = 0;
    std::map<std::string, std::pair<std::size_t, std::size_t>> index;  // name -> (offset, count)
    for (const auto& t : dir) {
        const std::string name = t.at("name").get<std::string>();
        const std::size_t count = t.at("count").get<std::size_t>();
        index[name] = {offset, count};
        offset += count;
    }
    auto fill = [&](const std::string& name, Tensor<T>& dst) {
        auto it = index.find(name);
        if (it == index.end())
            throw CheckpointError("checkpoint missing tensor '" + name + "'");
        if (it->second.second != dst.size())
            throw CheckpointError("checkpoint tensor '" + name + "' has " +
                                  std::to_string(it->second.second) + " values, expected " +
                                  std::to_string(dst.size()));
        const T* src = reinterpret_cast<const T*>(payload.data()) + it->second.first;
        std::copy(src, src + dst.size(), dst.data());
    };
    for (auto& e : store) {
        if (e.name.rfind(prefix, 0) != 0) continue;
        fill(e.name, e.value);
        fill(e.name + "#m", e.adam_m);
        fill(e.name + "#v", e.adam_v);
    }
}

}  // namespace detail

/// Rebuilds a full trainer (generator, critics, optimizer moments, counters,
/// PRNG state) from a checkpoint. Refuses version or dtype mismatches.
template <typename T>
std::unique_ptr<Trainer<T>> load_trainer(const std::string& path) {
    detail::RawCheckpoint raw = detail::read_raw(path);
    if (raw.header.at("dtype").get<std::string>() != detail::dtype_name<T>())
        throw CheckpointError("checkpoint dtype " + raw.header.at("dtype").get<std::string>() +
                              " does not match this build");
    GeneratorSpec gspec = raw.header.at("generator_spec").get<GeneratorSpec>();
    TrainConfig cfg = raw.header.at("train_config").get<TrainConfig>();
    auto tr = std::make_unique<Trainer<T>>(gspec, cfg);
    const json& dir = raw.header.at("tensors");
    detail::fill_store(tr->generator().params(), dir, raw.payload, "generator/");
    detail::fill_store(tr->critic_ir().params(), dir, raw.payload, "critic_ir/");
    detail::fill_store(tr->critic_vis().params(), dir, raw.payload, "critic_vis/");
    tr->set_counters(raw.header.at("step").get<std::uint64_t>(),
                     raw.header.at("adam_t").at("generator").get<std::int64_t>(),
                     raw.header.at("adam_t").at("critic_ir").get<std::int64_t>(),
                     raw.header.at("adam_t").at("critic_vis").get<std::int64_t>(),
                     raw.header.at("rng_state").get<std::uint64_t>());
    return tr;
}

/// Loads only the generator (for fusion at inference time).
template <typename T>
std::unique_ptr<Generator<T>> load_generator(const std::string& path) {
    detail::RawCheckpoint raw = detail::read_raw(path);
    if (raw.header.at("dtype").get<std::string>() != detail::dtype_name<T>())
        throw CheckpointError("checkpoint dtype " + raw.header.at("dtype").get<std::string>() +
                              " does not match this build");
    GeneratorSpec gspec = raw.header.at("generator_spec").get<GeneratorSpec>();
    Rng rng(0);
    auto gen = std::make_unique<Generator<T>>(gspec, rng);
    detail::fill_store(gen->params(), raw.header.at("tensors"), raw.payload, "generator/");
    return gen;
}

}  // namespace icafusion

#endif
