// Command-line front end: train, fuse, eval, ablate.
//
// Exit codes: 0 ok, 2 config error, 3 data error, 4 numerical abort.
// Every option can also be set through the environment with the ICAFUSION_
// prefix (e.g. ICAFUSION_SEED). Commands refuse to overwrite existing
// outputs unless --overwrite is given.

#include <omp.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "icafusion/checkpoint.hpp"
#include "icafusion/config.hpp"
#include "icafusion/image_io.hpp"
#include "icafusion/metrics.hpp"
#include "icafusion/plot.hpp"

namespace fs = std::filesystem;
using namespace icafusion;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

void apply_device(const std::string& device) {
    if (device == "cpu") return;
    if (device.rfind("cpu:", 0) == 0) {
        const int n = std::stoi(device.substr(4));
        if (n < 1) throw ConfigError("bad thread count in device '" + device + "'");
        omp_set_num_threads(n);
        return;
    }
    throw ConfigError("unknown device '" + device + "' (cpu or cpu:<threads>)");
}

void ensure_writable(const fs::path& p, bool overwrite) {
    if (fs::exists(p) && !overwrite)
        throw ConfigError("refusing to overwrite " + p.string() + " (pass --overwrite)");
}

std::string csv_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

struct CommonFlags {
    std::string config_path;
    std::optional<std::string> data_dir, out_dir, device, variant;
    std::optional<std::uint64_t> seed;
    std::optional<int> epochs, batch, patch_size, stride;
    bool overwrite = false;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_config = true) {
    if (with_config)
        cmd->add_option("--config", f.config_path, "JSON config file")
            ->envname("ICAFUSION_CONFIG");
    cmd->add_option("--data", f.data_dir, "dataset directory (<id>_ir.* / <id>_vis.*)")
        ->envname("ICAFUSION_DATA");
    cmd->add_option("--out-dir", f.out_dir, "output directory")->envname("ICAFUSION_OUT_DIR");
    cmd->add_option("--seed", f.seed, "training seed")->envname("ICAFUSION_SEED");
    cmd->add_option("--device", f.device, "cpu or cpu:<threads>")->envname("ICAFUSION_DEVICE");
    cmd->add_option("--variant", f.variant,
                    "generator variant (full, no_attention, only_interact, only_vis_com, "
                    "only_ir_com, only_channel, only_spatial)")
        ->envname("ICAFUSION_VARIANT");
    cmd->add_option("--epochs", f.epochs, "training epochs")->envname("ICAFUSION_EPOCHS");
    cmd->add_option("--batch", f.batch, "batch size")->envname("ICAFUSION_BATCH");
    cmd->add_option("--patch-size", f.patch_size, "training patch size")
        ->envname("ICAFUSION_PATCH_SIZE");
    cmd->add_option("--stride", f.stride, "patch extraction stride")
        ->envname("ICAFUSION_STRIDE");
    cmd->add_flag("--overwrite", f.overwrite, "allow clobbering existing outputs");
}

RunConfig resolve_config(const CommonFlags& f) {
    RunConfig cfg;
    if (!f.config_path.empty()) cfg = load_run_config(f.config_path);
    if (f.data_dir) cfg.data_dir = *f.data_dir;
    if (f.out_dir) cfg.out_dir = *f.out_dir;
    if (f.seed) cfg.train.seed = *f.seed;
    if (f.device) cfg.train.device = *f.device;
    if (f.variant) cfg.generator.variant = variant_from_string(*f.variant);
    if (f.epochs) cfg.train.epochs = *f.epochs;
    if (f.batch) cfg.train.batch_size = *f.batch;
    if (f.patch_size) cfg.train.patch_size = *f.patch_size;
    if (f.stride) cfg.train.patch_stride = *f.stride;
    cfg.train.validate();
    cfg.generator.validate();
    apply_device(cfg.train.device);
    return cfg;
}

/// Writes loss CSV rows and periodic checkpoints under `out`.
void run_training(Trainer<float>& trainer, const PatchSet& data, const fs::path& out) {
    std::ofstream csv;
    const fs::path csv_path = out / "loss.csv";
    const bool fresh = trainer.step() == 0;
    csv.open(csv_path, fresh ? std::ios::trunc : std::ios::app);
    if (!csv) throw IoError("cannot write " + csv_path.string());
    if (fresh) csv << kLossCsvHeader << "\n";

    TrainSinks<float> sinks;
    sinks.on_log = [&](const LossBreakdown& b) {
        csv << b.step << "," << csv_num(b.l_g) << "," << csv_num(b.l_content) << ","
            << csv_num(b.l_adv) << "," << csv_num(b.l_d_ir) << "," << csv_num(b.l_d_vis) << ","
            << csv_num(b.gp_ir) << "," << csv_num(b.gp_vis) << "\n";
        csv.flush();
        if (b.step % 50 == 0 || b.step == 1)
            std::cerr << "step " << b.step << "  l_g " << b.l_g << "  l_content " << b.l_content
                      << "  l_d_ir " << b.l_d_ir << "  l_d_vis " << b.l_d_vis << "\n";
    };
    sinks.on_checkpoint = [&](Trainer<float>& t, std::uint64_t step) {
        save_checkpoint(t, (out / ("checkpoint_" + std::to_string(step) + ".ckpt")).string());
        save_checkpoint(t, (out / "checkpoint_latest.ckpt").string());
    };
    trainer.train(data, sinks);
}

int cmd_train(const CommonFlags& flags, const std::string& resume) {
    RunConfig cfg = resolve_config(flags);
    if (cfg.data_dir.empty()) throw ConfigError("train: --data or config data_dir required");
    const fs::path out = cfg.out_dir;
    fs::create_directories(out);
    ensure_writable(out / "loss.csv", flags.overwrite || !resume.empty());
    write_run_config(cfg, (out / "config.json").string());

    PatchSet data = build_dataset(cfg.data_dir, cfg.train.seed, cfg.train.patch_size,
                                  cfg.train.patch_stride);
    for (const auto& w : data.warnings) std::cerr << "warning: " << w << "\n";
    if (data.count() == 0) throw IoError("no usable patches in " + cfg.data_dir);
    write_manifest(data, (out / "manifest.txt").string());

    std::unique_ptr<Trainer<float>> trainer;
    if (!resume.empty()) {
        trainer = load_trainer<float>(resume);
        std::cerr << "resumed from " << resume << " at step " << trainer->step() << "\n";
    } else {
        trainer = std::make_unique<Trainer<float>>(cfg.generator, cfg.train);
    }
    run_training(*trainer, data, out);
    std::cerr << "done: " << trainer->step() << " steps\n";
    return kExitOk;
}

Raster8 fuse_one(const Generator<float>& gen, const Raster8& ir, const Raster8& vis) {
    if (ir.h != vis.h || ir.w != vis.w)
        throw RegistrationError("pair size mismatch: ir " + std::to_string(ir.w) + "x" +
                                std::to_string(ir.h) + " vs vis " + std::to_string(vis.w) + "x" +
                                std::to_string(vis.h));
    return denormalize(gen.infer(normalize<float>(ir), normalize<float>(vis)));
}

int cmd_fuse(const std::string& ckpt, const std::string& ir_path, const std::string& vis_path,
             const std::string& out_path, bool overwrite) {
    auto gen = load_generator<float>(ckpt);
    if (fs::is_directory(ir_path)) {
        // batch mode: fuse every matched pair into out_path/<id>.png
        fs::create_directories(out_path);
        std::map<std::string, std::string> irs, viss;
        for (const auto& e : fs::directory_iterator(ir_path)) {
            if (!e.is_regular_file()) continue;
            const std::string stem = e.path().stem().string();
            if (stem.size() > 3 && stem.substr(stem.size() - 3) == "_ir")
                irs[stem.substr(0, stem.size() - 3)] = e.path().string();
        }
        for (const auto& e : fs::directory_iterator(vis_path)) {
            if (!e.is_regular_file()) continue;
            const std::string stem = e.path().stem().string();
            if (stem.size() > 4 && stem.substr(stem.size() - 4) == "_vis")
                viss[stem.substr(0, stem.size() - 4)] = e.path().string();
        }
        int fused_count = 0;
        for (const auto& [id, irp] : irs) {
            auto it = viss.find(id);
            if (it == viss.end()) {
                std::cerr << "warning: unpaired " << id << ", skipped\n";
                continue;
            }
            const fs::path dst = fs::path(out_path) / (id + ".png");
            ensure_writable(dst, overwrite);
            ImagePair pair = load_pair(irp, it->second);
            write_image_gray(dst.string(), fuse_one(*gen, pair.ir, pair.vis));
            ++fused_count;
        }
        if (fused_count == 0) throw IoError("no pairs found under " + ir_path);
        std::cerr << "fused " << fused_count << " pairs\n";
        return kExitOk;
    }
    ensure_writable(out_path, overwrite);
    ImagePair pair = load_pair(ir_path, vis_path);
    write_image_gray(out_path, fuse_one(*gen, pair.ir, pair.vis));
    return kExitOk;
}

struct EvalRow {
    std::string id;
    metrics::MetricReport r;
};

std::string find_with_suffix(const std::string& dir, const std::string& id,
                             const std::string& suffix) {
    for (const char* ext : {".png", ".bmp", ".tif", ".tiff"}) {
        const fs::path p = fs::path(dir) / (id + suffix + ext);
        if (fs::exists(p)) return p.string();
    }
    return {};
}

int cmd_eval(const std::string& fused_dir, const std::string& ir_dir, const std::string& vis_dir,
             const std::string& out_csv, bool plots, bool overwrite) {
    if (!fs::is_directory(fused_dir)) throw IoError("fused directory not found: " + fused_dir);
    ensure_writable(out_csv, overwrite);

    std::vector<std::pair<std::string, std::string>> fused_files;
    for (const auto& e : fs::directory_iterator(fused_dir))
        if (e.is_regular_file()) fused_files.push_back({e.path().stem().string(), e.path().string()});
    std::sort(fused_files.begin(), fused_files.end());

    std::vector<EvalRow> rows;
    std::vector<std::array<std::string, 3>> triples;
    for (const auto& [id, fpath] : fused_files) {
        const std::string irp = find_with_suffix(ir_dir, id, "_ir");
        const std::string visp = find_with_suffix(vis_dir, id, "_vis");
        if (irp.empty() || visp.empty()) {
            std::cerr << "warning: unmatched identifier '" << id << "', skipped\n";
            continue;
        }
        triples.push_back({fpath, irp, visp});
        rows.push_back({id, {}});
    }
    if (rows.empty()) throw IoError("no matched fused/ir/vis triples");

    std::string failure;
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < triples.size(); ++i) {
        try {
            const Raster8 f = read_image_gray(triples[i][0]);
            const Raster8 a = read_image_gray(triples[i][1]);
            const Raster8 b = read_image_gray(triples[i][2]);
            rows[i].r = metrics::evaluate(f, a, b);
        } catch (const std::exception& e) {
#pragma omp critical
            failure = e.what();
        }
    }
    if (!failure.empty()) throw IoError(failure);

    std::ofstream csv(out_csv, std::ios::trunc);
    if (!csv) throw IoError("cannot write " + out_csv);
    csv << "identifier,ag,en,sd,mi,sf,ncie,qabf,vif\n";
    std::vector<metrics::MetricReport> reports;
    for (const auto& row : rows) {
        reports.push_back(row.r);
        csv << row.id << "," << csv_num(row.r.ag) << "," << csv_num(row.r.en) << ","
            << csv_num(row.r.sd) << "," << csv_num(row.r.mi) << "," << csv_num(row.r.sf) << ","
            << csv_num(row.r.ncie) << "," << csv_num(row.r.qabf) << "," << csv_num(row.r.vif)
            << "\n";
    }
    const metrics::MetricReport m = metrics::mean_report(reports);
    csv << "mean," << csv_num(m.ag) << "," << csv_num(m.en) << "," << csv_num(m.sd) << ","
        << csv_num(m.mi) << "," << csv_num(m.sf) << "," << csv_num(m.ncie) << ","
        << csv_num(m.qabf) << "," << csv_num(m.vif) << "\n";

    if (plots) {
        const fs::path dir = fs::path(out_csv).parent_path();
        const char* names[8] = {"ag", "en", "sd", "mi", "sf", "ncie", "qabf", "vif"};
        auto field = [](const metrics::MetricReport& r, int k) {
            const double* p[8] = {&r.ag, &r.en, &r.sd, &r.mi, &r.sf, &r.ncie, &r.qabf, &r.vif};
            return *p[k];
        };
        for (int k = 0; k < 8; ++k) {
            std::vector<double> vals;
            for (const auto& r : reports) vals.push_back(field(r, k));
            const fs::path p = dir / ("plot_" + std::string(names[k]) + ".png");
            ensure_writable(p, overwrite);
            write_image_gray(p.string(), render_line_plot(names[k], vals, field(m, k)));
        }
    }
    std::cerr << "evaluated " << rows.size() << " images\n";
    return kExitOk;
}

int cmd_ablate(const CommonFlags& flags) {
    RunConfig cfg = resolve_config(flags);
    if (cfg.data_dir.empty()) throw ConfigError("ablate: --data or config data_dir required");
    const fs::path out = cfg.out_dir;
    fs::create_directories(out);
    const fs::path table_path = out / "ablation.csv";
    ensure_writable(table_path, flags.overwrite);
    write_run_config(cfg, (out / "config.json").string());

    PatchSet data = build_dataset(cfg.data_dir, cfg.train.seed, cfg.train.patch_size,
                                  cfg.train.patch_stride);
    if (data.count() == 0) throw IoError("no usable patches in " + cfg.data_dir);

    std::ofstream csv(table_path, std::ios::trunc);
    csv << "model,ag,en,sd,mi,sf,ncie,qabf,vif\n";
    for (Variant v : all_variants()) {
        const fs::path vdir = out / variant_label(v);
        fs::create_directories(vdir);
        RunConfig vcfg = cfg;
        vcfg.generator = build_variant(v, cfg.generator);
        vcfg.out_dir = vdir.string();
        write_run_config(vcfg, (vdir / "config.json").string());

        std::cerr << "=== variant " << variant_label(v) << " ===\n";
        Trainer<float> trainer(vcfg.generator, vcfg.train);
        run_training(trainer, data, vdir);

        // Fuse every source pair at full size and score it.
        std::vector<metrics::MetricReport> reports;
        const fs::path fdir = vdir / "fused";
        fs::create_directories(fdir);
        for (const auto& [id, pair] : data.sources) {
            const Raster8 fused = fuse_one(trainer.generator(), pair.ir, pair.vis);
            write_image_gray((fdir / (id + ".png")).string(), fused);
            reports.push_back(metrics::evaluate(fused, pair.ir, pair.vis));
        }
        const metrics::MetricReport m = metrics::mean_report(reports);
        csv << variant_label(v) << "," << csv_num(m.ag) << "," << csv_num(m.en) << ","
            << csv_num(m.sd) << "," << csv_num(m.mi) << "," << csv_num(m.sf) << ","
            << csv_num(m.ncie) << "," << csv_num(m.qabf) << "," << csv_num(m.vif) << "\n";
        csv.flush();
    }
    std::cerr << "ablation table: " << table_path << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"infrared/visible image fusion: adversarially trained triple-path generator"};
    app.require_subcommand(1);

    CommonFlags train_flags, ablate_flags;
    std::string resume;
    CLI::App* train = app.add_subcommand("train", "train a fusion model");
    add_common(train, train_flags);
    train->add_option("--resume", resume, "checkpoint to resume from");

    std::string ckpt, ir_path, vis_path, out_path;
    bool fuse_overwrite = false;
    CLI::App* fuse = app.add_subcommand("fuse", "fuse an image pair (or directories of pairs)");
    fuse->add_option("--checkpoint", ckpt, "trained checkpoint")->required();
    fuse->add_option("--ir", ir_path, "infrared image or directory")->required();
    fuse->add_option("--vis", vis_path, "visible image or directory")->required();
    fuse->add_option("--out", out_path, "output image or directory")->required();
    fuse->add_flag("--overwrite", fuse_overwrite, "allow clobbering existing outputs");

    std::string fused_dir, ir_dir, vis_dir, out_csv;
    bool plots = false, eval_overwrite = false;
    CLI::App* eval = app.add_subcommand("eval", "score fused images against their sources");
    eval->add_option("--fused", fused_dir, "directory of fused images")->required();
    eval->add_option("--ir", ir_dir, "directory of <id>_ir.* sources")->required();
    eval->add_option("--vis", vis_dir, "directory of <id>_vis.* sources")->required();
    eval->add_option("--out", out_csv, "output CSV path")->required();
    eval->add_flag("--plots", plots, "emit per-metric line plots next to the CSV");
    eval->add_flag("--overwrite", eval_overwrite, "allow clobbering existing outputs");

    CLI::App* ablate = app.add_subcommand(
        "ablate", "train and score all seven attention variants under one config");
    add_common(ablate, ablate_flags);

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(train_flags, resume);
        if (fuse->parsed()) return cmd_fuse(ckpt, ir_path, vis_path, out_path, fuse_overwrite);
        if (eval->parsed()) return cmd_eval(fused_dir, ir_dir, vis_dir, out_csv, plots,
                                            eval_overwrite);
        if (ablate->parsed()) return cmd_ablate(ablate_flags);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericalError& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const IoError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const RegistrationError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const DimensionError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitOk;
}
