#ifndef ICAFUSION_DATA_HPP
#define ICAFUSION_DATA_HPP

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "icafusion/rng.hpp"
#include "icafusion/tensor.hpp"

namespace icafusion {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Paired images do not share a size; both shapes are reported.
struct RegistrationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// 8-bit single-channel raster, row-major.
struct Raster8 {
    int h = 0, w = 0;
    std::vector<std::uint8_t> v;

    Raster8() = default;
    Raster8(int h_, int w_) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, 0) {}

    std::uint8_t& at(int i, int j) { return v[static_cast<std::size_t>(i) * w + j]; }
    std::uint8_t at(int i, int j) const { return v[static_cast<std::size_t>(i) * w + j]; }
    std::size_t size() const { return v.size(); }
};

/// Co-registered infrared/visible pair.
struct ImagePair {
    std::string id;
    Raster8 ir;
    Raster8 vis;
};

/// [0,255] -> [-1,1]: x / 127.5 - 1.
template <typename T>
Tensor<T> normalize(const Raster8& r) {
    Tensor<T> t(1, r.h, r.w);
    for (std::size_t i = 0; i < r.size(); ++i)
        t[i] = static_cast<T>(r.v[i]) / T(127.5) - T(1);
    return t;
}

/// [-1,1] -> [0,255]: round((x + 1) * 127.5), clamped.
template <typename T>
Raster8 denormalize(const Tensor<T>& t) {
    Raster8 r(t.h(), t.w());
    for (std::size_t i = 0; i < r.size(); ++i) {
        const long v = std::lround((static_cast<double>(t[i]) + 1.0) * 127.5);
        r.v[i] = static_cast<std::uint8_t>(v < 0 ? 0 : (v > 255 ? 255 : v));
    }
    return r;
}

/// One training patch: source image plus its top-left offset.
struct PatchRef {
    std::string id;
    int row = 0;
    int col = 0;
};

/// Sliding-window patch collection over one or more source pairs. Sources
/// are stored once; patches are materialized on demand.
struct PatchSet {
    int patch_size = 128;
    int stride = 12;
    std::uint64_t seed = 0;
    bool shuffled = false;
    std::vector<PatchRef> patches;
    std::map<std::string, ImagePair> sources;
    std::vector<std::string> warnings;  // skipped/unpaired notes

    std::size_t count() const { return patches.size(); }
    const std::vector<PatchRef>& refs() const { return patches; }

    template <typename T>
    void materialize(std::size_t index, Tensor<T>& ir, Tensor<T>& vis) const {
        const PatchRef& p = patches.at(index);
        const ImagePair& src = sources.at(p.id);
        ir = Tensor<T>(1, patch_size, patch_size);
        vis = Tensor<T>(1, patch_size, patch_size);
        for (int i = 0; i < patch_size; ++i)
            for (int j = 0; j < patch_size; ++j) {
                ir.at(0, i, j) =
                    static_cast<T>(src.ir.at(p.row + i, p.col + j)) / T(127.5) - T(1);
                vis.at(0, i, j) =
                    static_cast<T>(src.vis.at(p.row + i, p.col + j)) / T(127.5) - T(1);
            }
    }
};

/// Loads a pair from disk; visible RGB is converted to BT.601 luma.
ImagePair load_pair(const std::string& path_ir, const std::string& path_vis);

/// Stride-aligned patch grid (no right/bottom padding; leftover margins are
/// dropped). Images smaller than the patch yield an empty set with a
/// warning.
PatchSet extract_patches(const ImagePair& pair, int size = 128, int stride = 12);

/// Scans `dir` for `<id>_ir.*` / `<id>_vis.*` pairs, extracts patches from
/// every pair and shuffles them with the seeded generator. Unpaired files
/// are listed in warnings and skipped.
PatchSet build_dataset(const std::string& dir, std::uint64_t shuffle_seed, int size = 128,
                       int stride = 12);

/// Line-oriented manifest: header (size, stride, seed, PRNG name, format
/// version), skip notes, then one `id,row,col` record per patch in order.
void write_manifest(const PatchSet& set, const std::string& path);

/// Reads back a manifest; `sources` is left empty (attach with
/// attach_sources to materialize patches).
PatchSet read_manifest(const std::string& path);

/// Loads the source pairs named by the manifest refs from `dir`.
void attach_sources(PatchSet& set, const std::string& dir);

}  // namespace icafusion

#endif
