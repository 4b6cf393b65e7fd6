#include "icafusion/data.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "icafusion/image_io.hpp"

namespace fs = std::filesystem;

namespace icafusion {

ImagePair load_pair(const std::string& path_ir, const std::string& path_vis) {
    ImagePair p;
    p.ir = read_image_gray(path_ir);
    p.vis = read_image_gray(path_vis);
    if (p.ir.h != p.vis.h || p.ir.w != p.vis.w)
        throw RegistrationError("pair size mismatch: ir " + std::to_string(p.ir.w) + "x" +
                                std::to_string(p.ir.h) + " vs vis " + std::to_string(p.vis.w) +
                                "x" + std::to_string(p.vis.h));
    p.id = fs::path(path_ir).stem().string();
    const std::string suffix = "_ir";
    if (p.id.size() > suffix.size() &&
        p.id.compare(p.id.size() - suffix.size(), suffix.size(), suffix) == 0)
        p.id.resize(p.id.size() - suffix.size());
    return p;
}

PatchSet extract_patches(const ImagePair& pair, int size, int stride) {
    PatchSet set;
    set.patch_size = size;
    set.stride = stride;
    if (pair.ir.h < size || pair.ir.w < size) {
        set.warnings.push_back("skipped " + pair.id + ": image " + std::to_string(pair.ir.w) +
                               "x" + std::to_string(pair.ir.h) + " smaller than patch");
        return set;
    }
    set.sources[pair.id] = pair;
    const int rows = (pair.ir.h - size) / stride;
    const int cols = (pair.ir.w - size) / stride;
    for (int a = 0; a <= rows; ++a)
        for (int b = 0; b <= cols; ++b)
            set.patches.push_back({pair.id, a * stride, b * stride});
    return set;
}

PatchSet build_dataset(const std::string& dir, std::uint64_t shuffle_seed, int size,
                       int stride) {
    if (!fs::is_directory(dir)) throw IoError("dataset directory not found: " + dir);

    std::map<std::string, std::string> ir_files, vis_files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string stem = entry.path().stem().string();
        const auto ends_with = [&](const char* sfx) {
            const std::string s = sfx;
            return stem.size() > s.size() &&
                   stem.compare(stem.size() - s.size(), s.size(), s) == 0;
        };
        if (ends_with("_ir"))
            ir_files[stem.substr(0, stem.size() - 3)] = entry.path().string();
        else if (ends_with("_vis"))
            vis_files[stem.substr(0, stem.size() - 4)] = entry.path().string();
    }

    PatchSet all;
    all.patch_size = size;
    all.stride = stride;
    all.seed = shuffle_seed;
    for (const auto& [id, ir_path] : ir_files) {
        auto it = vis_files.find(id);
        if (it == vis_files.end()) {
            all.warnings.push_back("unpaired " + id + ": missing visible image");
            continue;
        }
        PatchSet one = extract_patches(load_pair(ir_path, it->second), size, stride);
        for (auto& w : one.warnings) all.warnings.push_back(std::move(w));
        for (auto& [sid, src] : one.sources) all.sources[sid] = std::move(src);
        for (auto& r : one.patches) all.patches.push_back(std::move(r));
    }
    for (const auto& [id, path] : vis_files)
        if (!ir_files.count(id))
            all.warnings.push_back("unpaired " + id + ": missing infrared image");

    Rng rng(shuffle_seed);
    rng.shuffle(all.patches);
    all.shuffled = true;
    return all;
}

void write_manifest(const PatchSet& set, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write manifest: " + path);
    f << "# icafusion patch manifest v1\n";
    f << "# patch_size " << set.patch_size << "\n";
    f << "# stride " << set.stride << "\n";
    f << "# seed " << set.seed << "\n";
    f << "# prng " << kShuffleAlgorithm << "\n";
    f << "# count " << set.patches.size() << "\n";
    for (const auto& w : set.warnings) f << "# note " << w << "\n";
    for (const auto& p : set.patches) f << p.id << "," << p.row << "," << p.col << "\n";
    if (!f) throw IoError("manifest write failed: " + path);
}

PatchSet read_manifest(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read manifest: " + path);
    PatchSet set;
    std::string line;
    bool versioned = false;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ss(line.substr(1));
            std::string key;
            ss >> key;
            if (key == "icafusion") {
                versioned = line.find("manifest v1") != std::string::npos;
            } else if (key == "patch_size") {
                ss >> set.patch_size;
            } else if (key == "stride") {
                ss >> set.stride;
            } else if (key == "seed") {
                ss >> set.seed;
            } else if (key == "note") {
                set.warnings.push_back(line.substr(line.find("note") + 5));
            }
            continue;
        }
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw IoError("malformed manifest record: " + line);
        PatchRef r;
        r.id = line.substr(0, c1);
        r.row = std::stoi(line.substr(c1 + 1, c2 - c1 - 1));
        r.col = std::stoi(line.substr(c2 + 1));
        set.patches.push_back(std::move(r));
    }
    if (!versioned) throw IoError("not a recognized manifest (missing version line): " + path);
    set.shuffled = true;
    return set;
}

void attach_sources(PatchSet& set, const std::string& dir) {
    for (const auto& p : set.patches) {
        if (set.sources.count(p.id)) continue;
        const fs::path base = fs::path(dir) / p.id;
        ImagePair pair;
        bool found = false;
        for (const char* ext : {".png", ".bmp", ".tif", ".tiff"}) {
            const std::string ir = base.string() + "_ir" + ext;
            if (fs::exists(ir)) {
                std::string vis;
                for (const char* vext : {".png", ".bmp", ".tif", ".tiff"})
                    if (fs::exists(base.string() + "_vis" + vext)) {
                        vis = base.string() + "_vis" + vext;
                        break;
                    }
                if (vis.empty()) break;
                pair = load_pair(ir, vis);
                found = true;
                break;
            }
        }
        if (!found) throw IoError("manifest source not found in " + dir + ": " + p.id);
        set.sources[p.id] = std::move(pair);
    }
}

}  // namespace icafusion
