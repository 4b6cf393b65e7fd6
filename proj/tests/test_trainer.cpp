#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "icafusion/checkpoint.hpp"
#include "icafusion/trainer.hpp"
#include "test_util.hpp"

using namespace icafusion;
using testutil::TempDir;

namespace {

GeneratorSpec micro_gspec() {
    GeneratorSpec s;
    s.encoder_widths = {2, 2, 2, 2};
    s.decoder_widths = {4, 4, 2, 2};
    return s;
}

TrainConfig micro_config(std::uint64_t seed = 5) {
    TrainConfig c;
    c.batch_size = 2;
    c.epochs = 1;
    c.patch_size = 16;
    c.patch_stride = 8;
    c.seed = seed;
    c.checkpoint_period = 0;
    return c;
}

template <typename T>
TrainBatch<T> random_batch(int n, int hw, Rng& rng) {
    TrainBatch<T> b;
    for (int i = 0; i < n; ++i) {
        b.ir.push_back(testutil::random_tensor<T>(Shape{1, 1, hw, hw}, rng));
        b.vis.push_back(testutil::random_tensor<T>(Shape{1, 1, hw, hw}, rng));
        b.ids.push_back("s" + std::to_string(i));
    }
    return b;
}

PatchSet synthetic_set(int pairs, int hw, Rng& rng) {
    PatchSet set;
    set.patch_size = hw;
    set.stride = hw;
    for (int i = 0; i < pairs; ++i) {
        ImagePair p;
        p.id = "p" + std::to_string(i);
        p.ir = testutil::blob_image(hw, hw, hw / 2.0, hw / 2.0, hw / 5.0, rng);
        p.vis = testutil::texture_image(hw, hw, 0.9, 1.2, rng);
        set.sources[p.id] = p;
        set.patches.push_back({p.id, 0, 0});
    }
    return set;
}

}  // namespace

TEST_CASE("frozen optimizer: zero learning rates and zero lambda keep parameters") {
    TrainConfig cfg = micro_config();
    cfg.lr_generator = 0;
    cfg.lr_critic = 0;
    cfg.lambda_gp = 0;
    Trainer<float> tr(micro_gspec(), cfg);
    const auto hg = tr.generator().params().value_hash();
    const auto hi = tr.critic_ir().params().value_hash();
    const auto hv = tr.critic_vis().params().value_hash();

    Rng rng(1);
    auto batch = random_batch<float>(2, 16, rng);
    const LossBreakdown lb = tr.train_step(batch);
    CHECK(lb.step == 1);
    CHECK(tr.generator().params().value_hash() == hg);
    CHECK(tr.critic_ir().params().value_hash() == hi);
    CHECK(tr.critic_vis().params().value_hash() == hv);
}

TEST_CASE("zero learning rate on one side freezes exactly that side") {
    Rng rng(2);
    auto batch = random_batch<float>(2, 16, rng);

    TrainConfig cfg = micro_config();
    cfg.lr_generator = 0;
    Trainer<float> a(micro_gspec(), cfg);
    const auto gen_before = a.generator().params().value_hash();
    const auto ir_before = a.critic_ir().params().value_hash();
    a.train_step(batch);
    CHECK(a.generator().params().value_hash() == gen_before);
    CHECK(a.critic_ir().params().value_hash() != ir_before);

    TrainConfig cfg2 = micro_config();
    cfg2.lr_critic = 0;
    Trainer<float> b(micro_gspec(), cfg2);
    const auto gen2 = b.generator().params().value_hash();
    const auto ir2 = b.critic_ir().params().value_hash();
    const auto vis2 = b.critic_vis().params().value_hash();
    b.train_step(batch);
    CHECK(b.generator().params().value_hash() != gen2);
    CHECK(b.critic_ir().params().value_hash() == ir2);
    CHECK(b.critic_vis().params().value_hash() == vis2);
}

TEST_CASE("one step is bit-exactly reproducible across fresh trainers") {
    Rng rng(3);
    auto batch = random_batch<float>(2, 16, rng);
    Trainer<float> a(micro_gspec(), micro_config(99));
    Trainer<float> b(micro_gspec(), micro_config(99));
    const LossBreakdown la = a.train_step(batch);
    const LossBreakdown lb = b.train_step(batch);
    CHECK(la.l_g == lb.l_g);
    CHECK(la.l_d_ir == lb.l_d_ir);
    CHECK(la.gp_vis == lb.gp_vis);
    CHECK(a.generator().params().value_hash() == b.generator().params().value_hash());
    CHECK(a.critic_ir().params().value_hash() == b.critic_ir().params().value_hash());
}

TEST_CASE("training runs epochs * floor(N / batch) steps") {
    Rng rng(4);
    PatchSet data = synthetic_set(8, 16, rng);
    TrainConfig cfg = micro_config();
    cfg.batch_size = 4;
    cfg.epochs = 2;
    Trainer<float> tr(micro_gspec(), cfg);
    int logged = 0;
    TrainSinks<float> sinks;
    sinks.on_log = [&](const LossBreakdown&) { ++logged; };
    tr.train(data, sinks);
    CHECK(tr.step() == 4);  // 8/4 = 2 steps per epoch, 2 epochs
    CHECK(logged == 4);

    // Paper-scale arithmetic, no training involved.
    CHECK((18813 / 4) * 16 == 75248);
}

TEST_CASE("dataset smaller than one batch is rejected") {
    Rng rng(5);
    PatchSet data = synthetic_set(1, 16, rng);
    TrainConfig cfg = micro_config();
    cfg.batch_size = 4;
    Trainer<float> tr(micro_gspec(), cfg);
    CHECK_THROWS_AS(tr.train(data, {}), std::domain_error);
}

TEST_CASE("checkpoint save/load/save produces byte-identical files") {
    TempDir dir("ckpt");
    Rng rng(6);
    Trainer<float> tr(micro_gspec(), micro_config());
    auto batch = random_batch<float>(2, 16, rng);
    tr.train_step(batch);
    tr.train_step(batch);

    const std::string p1 = dir.str("a.ckpt");
    const std::string p2 = dir.str("b.ckpt");
    save_checkpoint(tr, p1);
    auto restored = load_trainer<float>(p1);
    save_checkpoint(*restored, p2);
    CHECK(testutil::read_file(p1) == testutil::read_file(p2));

    CHECK(restored->step() == tr.step());
    CHECK(restored->rng_state() == tr.rng_state());
    CHECK(restored->generator().params().value_hash() ==
          tr.generator().params().value_hash());
}

TEST_CASE("truncated and corrupted checkpoints are refused without partial state") {
    TempDir dir("ckpt_bad");
    Trainer<float> tr(micro_gspec(), micro_config());
    const std::string path = dir.str("c.ckpt");
    save_checkpoint(tr, path);

    std::string bytes = testutil::read_file(path);
    {
        std::ofstream f(dir.str("trunc.ckpt"), std::ios::binary);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS_AS((void)load_trainer<float>(dir.str("trunc.ckpt")), CheckpointError);

    // flip one payload byte: the recorded hash no longer matches
    bytes[bytes.size() - 3] = static_cast<char>(bytes[bytes.size() - 3] ^ 0x40);
    {
        std::ofstream f(dir.str("corrupt.ckpt"), std::ios::binary);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_AS((void)load_trainer<float>(dir.str("corrupt.ckpt")), CheckpointError);
}

TEST_CASE("checkpoint version mismatch is named in the error") {
    TempDir dir("ckpt_ver");
    Trainer<float> tr(micro_gspec(), micro_config());
    const std::string path = dir.str("v.ckpt");
    save_checkpoint(tr, path);
    std::string bytes = testutil::read_file(path);
    bytes[8] = 9;  // container version field
    {
        std::ofstream f(path, std::ios::binary);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    try {
        (void)load_trainer<float>(path);
        FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("v9") != std::string::npos);
        CHECK(msg.find("v1") != std::string::npos);
    }
}

TEST_CASE("resuming from a checkpoint reproduces the uninterrupted run bit-exactly") {
    Rng rng(7);
    PatchSet data = synthetic_set(8, 16, rng);
    TrainConfig cfg = micro_config(123);
    cfg.batch_size = 2;
    cfg.epochs = 2;  // 8 steps total

    Trainer<float> full(micro_gspec(), cfg);
    full.train(data, {});
    CHECK(full.step() == 8);

    TempDir dir("resume");
    const std::string mid = dir.str("mid.ckpt");
    Trainer<float> part(micro_gspec(), cfg);
    part.train(data, {}, 4);  // interrupted half-way
    CHECK(part.step() == 4);
    save_checkpoint(part, mid);

    auto resumed = load_trainer<float>(mid);
    CHECK(resumed->step() == 4);
    resumed->train(data, {});
    CHECK(resumed->step() == 8);

    CHECK(resumed->generator().params().value_hash() ==
          full.generator().params().value_hash());
    CHECK(resumed->critic_ir().params().value_hash() ==
          full.critic_ir().params().value_hash());
    CHECK(resumed->critic_vis().params().value_hash() ==
          full.critic_vis().params().value_hash());
    CHECK(resumed->rng_state() == full.rng_state());
}

TEST_CASE("critic loss stays finite over a long adversarial run") {
    Rng rng(8);
    PatchSet data = synthetic_set(4, 16, rng);
    TrainConfig cfg = micro_config(9);
    cfg.batch_size = 2;
    cfg.epochs = 500;  // 1000 steps at 2 steps per epoch
    Trainer<float> tr(micro_gspec(), cfg);
    TrainSinks<float> sinks;
    bool all_finite = true;
    sinks.on_log = [&](const LossBreakdown& b) { all_finite = all_finite && b.finite(); };
    tr.train(data, sinks);
    CHECK(tr.step() == 1000);
    CHECK(all_finite);
}

TEST_CASE("non-finite losses abort with the offending batch identifiers") {
    Trainer<float> tr(micro_gspec(), micro_config());
    // Blow up the critic parameters so its score overflows float.
    for (auto& e : tr.critic_ir().params())
        for (auto& v : e.value) v = 1e30f;
    Rng rng(9);
    auto batch = random_batch<float>(2, 16, rng);
    batch.ids = {"alpha", "beta"};
    try {
        tr.train_step(batch);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("alpha") != std::string::npos);
        CHECK(msg.find("beta") != std::string::npos);
    }
}
