#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "icafusion/attention.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace icafusion;
using testutil::max_abs_diff;
using testutil::random_tensor;
using testutil::rel_err;

namespace {

template <typename T>
AttentionParams make_params(ParamStore<T>& store, const std::string& prefix, int channels,
                            Rng& rng) {
    return register_attention_params(store, prefix, channels, 4, rng);
}

void zero_params(ParamStore<double>& store) {
    for (auto& e : store) e.value.zero();
}

}  // namespace

TEST_CASE("channel gate: constant input collapses the two pooled branches") {
    Rng rng(1);
    ParamStore<double> store;
    auto p = make_params(store, "att", 4, rng);
    Tensor<double> f(4, 6, 6);
    f.fill(0.37);
    const Tensor<double> got = channel_gate(f, p, store);
    // Average and max pooling agree on a constant input, so the gate must
    // equal the oracle evaluated with both descriptors identical.
    const oracle::D want = oracle::channel_gate(f, "att", store);
    CHECK(max_abs_diff(got, want) < 1e-12);
    for (double v : got) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("channel gate: all-zero parameters give 0.5 scores") {
    Rng rng(2);
    ParamStore<double> store;
    auto p = make_params(store, "att", 3, rng);
    zero_params(store);
    Tensor<double> f(3, 5, 5);  // one channel all zeros, others too
    const Tensor<double> got = channel_gate(f, p, store);
    for (double v : got) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("channel gate matches the loop oracle on random inputs") {
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        ParamStore<double> store;
        auto p = make_params(store, "att", 4, rng);
        auto f = random_tensor<double>(Shape{1, 4, 6, 6}, rng);
        CHECK(max_abs_diff(channel_gate(f, p, store), oracle::channel_gate(f, "att", store)) <
              1e-12);
    }
}

TEST_CASE("channel gate rejects channel mismatch") {
    Rng rng(4);
    ParamStore<double> store;
    auto p = make_params(store, "att", 4, rng);
    Tensor<double> f(3, 6, 6);
    Tape<double> t(false);
    CHECK_THROWS_AS((void)channel_gate(t.input(f), p, store), DimensionError);
}

TEST_CASE("dueling softmax: identical logits split evenly") {
    Rng rng(5);
    auto a = random_tensor<double>(Shape{1, 4, 1, 1}, rng);
    auto [wa, wb] = dueling_softmax(a, a);
    for (std::size_t i = 0; i < wa.size(); ++i) {
        CHECK(wa[i] == 0.5);
        CHECK(wb[i] == 0.5);
    }
}

TEST_CASE("dueling softmax: closed-form pair (ln 2, 0)") {
    Tensor<double> a(1, 1, 1), b(1, 1, 1);
    a[0] = std::log(2.0);
    b[0] = 0.0;
    auto [wa, wb] = dueling_softmax(a, b);
    CHECK(wa[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(wb[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("dueling softmax matches the scalar max-shift oracle") {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        auto a = random_tensor<double>(Shape{1, 1, 8, 8}, rng, 0.0, 1.0);
        auto b = random_tensor<double>(Shape{1, 1, 8, 8}, rng, 0.0, 1.0);
        auto [wa, wb] = dueling_softmax(a, b);
        auto [oa, ob] = oracle::dueling_softmax(a, b);
        CHECK(max_abs_diff(wa, oa) < 1e-12);
        CHECK(max_abs_diff(wb, ob) < 1e-12);
        for (std::size_t i = 0; i < wa.size(); ++i)
            CHECK(wa[i] + wb[i] == doctest::Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("dueling softmax rejects shape mismatch") {
    Tensor<double> a(1, 2, 2), b(1, 2, 3);
    Tape<double> t(false);
    CHECK_THROWS_AS((void)dueling_softmax(t.input(a), t.input(b)), DimensionError);
}

TEST_CASE("spatial gate: constant input gives a spatially constant map") {
    Rng rng(7);
    ParamStore<double> store;
    auto p = make_params(store, "att", 3, rng);
    Tensor<double> f(3, 8, 8);
    f.fill(-0.2);
    const Tensor<double> got = spatial_gate(f, p, store);
    // Interior pixels all see the same stacked neighbourhood; border pixels
    // differ only through zero padding of the 7x7 merge kernel.
    const double center = got.at(0, 4, 4);
    CHECK(got.at(0, 3, 4) == doctest::Approx(center).epsilon(1e-15));
    CHECK(got.at(0, 4, 3) == doctest::Approx(center).epsilon(1e-15));
}

TEST_CASE("spatial gate: zero merge parameters give 0.5 everywhere") {
    Rng rng(8);
    ParamStore<double> store;
    auto p = make_params(store, "att", 3, rng);
    zero_params(store);
    auto f = random_tensor<double>(Shape{1, 3, 5, 5}, rng);
    const Tensor<double> got = spatial_gate(f, p, store);
    for (double v : got) CHECK(v == 0.5);
}

TEST_CASE("spatial gate matches the loop oracle (7x7 merge kernel)") {
    Rng rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        ParamStore<double> store;
        auto p = make_params(store, "att", 3, rng);
        auto f = random_tensor<double>(Shape{1, 3, 5, 5}, rng);
        CHECK(max_abs_diff(spatial_gate(f, p, store), oracle::spatial_gate(f, "att", store)) <
              1e-10);
    }
}

TEST_CASE("interactive attention: identical inputs and parameters quarter the features") {
    Rng rng(10);
    ParamStore<double> store;
    auto pm = make_params(store, "m", 4, rng);
    // Mirror the m-side parameters onto a second set so both paths compute
    // identical gate scores.
    auto pn = make_params(store, "n", 4, rng);
    for (int i = 0; i < store.count(); ++i) {
        const std::string& name = store[i].name;
        if (name.rfind("n/", 0) == 0) {
            for (int j = 0; j < store.count(); ++j)
                if (store[j].name == "m" + name.substr(1)) store[i].value = store[j].value;
        }
    }
    auto f = random_tensor<double>(Shape{1, 4, 6, 6}, rng);
    const Tensor<double> out = interactive_attention(f, f, pm, pn, store);
    REQUIRE(out.c() == 8);
    for (int c = 0; c < 4; ++c)
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) {
                CHECK(out.at(c, i, j) == f.at(c, i, j) * 0.25);
                CHECK(out.at(4 + c, i, j) == f.at(c, i, j) * 0.25);
            }
}

TEST_CASE("interactive attention: swapping inputs exchanges the output halves exactly") {
    Rng rng(11);
    ParamStore<double> store;
    auto pm = make_params(store, "m", 4, rng);
    auto pn = make_params(store, "n", 4, rng);
    auto fm = random_tensor<double>(Shape{1, 4, 6, 6}, rng);
    auto fn = random_tensor<double>(Shape{1, 4, 6, 6}, rng);
    const Tensor<double> ab = interactive_attention(fm, fn, pm, pn, store);
    const Tensor<double> ba = interactive_attention(fn, fm, pn, pm, store);
    const std::size_t half = ab.size() / 2;
    for (std::size_t i = 0; i < half; ++i) {
        CHECK(ab[i] == ba[half + i]);  // bitwise
        CHECK(ab[half + i] == ba[i]);
    }
}

TEST_CASE("interactive attention matches the composed loop oracle") {
    Rng rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        ParamStore<double> store;
        auto pm = make_params(store, "m", 4, rng);
        auto pn = make_params(store, "n", 4, rng);
        auto fm = random_tensor<double>(Shape{1, 4, 6, 6}, rng);
        auto fn = random_tensor<double>(Shape{1, 4, 6, 6}, rng);
        const Tensor<double> got = interactive_attention(fm, fn, pm, pn, store);
        const oracle::D want = oracle::interactive_attention(fm, fn, "m", "n", store);
        CHECK(max_abs_diff(got, want) < 1e-10);
        CHECK(got.c() == 2 * fm.c());
        CHECK(got.h() == fm.h());
        CHECK(got.w() == fm.w());
    }
}

TEST_CASE("interactive attention supports the literal cross-operand pairing") {
    Rng rng(13);
    ParamStore<double> store;
    auto pm = make_params(store, "m", 2, rng);
    auto pn = make_params(store, "n", 2, rng);
    auto fm = random_tensor<double>(Shape{1, 2, 4, 4}, rng);
    auto fn = random_tensor<double>(Shape{1, 2, 4, 4}, rng);
    AttentionOptions opt;
    opt.cross_spatial_operand = true;
    const Tensor<double> got = interactive_attention(fm, fn, pm, pn, store, opt);
    oracle::AttentionFlags fl;
    fl.cross_spatial_operand = true;
    const oracle::D want = oracle::interactive_attention(fm, fn, "m", "n", store, fl);
    CHECK(max_abs_diff(got, want) < 1e-12);
    // and it differs from the corrected pairing on generic inputs
    const Tensor<double> corrected = interactive_attention(fm, fn, pm, pn, store);
    CHECK(max_abs_diff(got, corrected) > 1e-9);
}

TEST_CASE("compensatory attention: zero parameters quarter the input") {
    Rng rng(14);
    ParamStore<double> store;
    auto p = make_params(store, "c", 4, rng);
    zero_params(store);
    auto f = random_tensor<double>(Shape{1, 4, 6, 6}, rng);
    const Tensor<double> got = compensatory_attention(f, p, store);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(got[i] == f[i] * 0.25);
}

TEST_CASE("compensatory attention: zero input stays zero and shape is preserved") {
    Rng rng(15);
    ParamStore<double> store;
    auto p = make_params(store, "c", 4, rng);
    Tensor<double> f(4, 6, 6);
    const Tensor<double> got = compensatory_attention(f, p, store);
    CHECK(got.shape() == f.shape());
    for (double v : got) CHECK(v == 0.0);
}

TEST_CASE("compensatory attention matches the loop oracle") {
    Rng rng(16);
    for (int trial = 0; trial < 10; ++trial) {
        ParamStore<double> store;
        auto p = make_params(store, "c", 4, rng);
        auto f = random_tensor<double>(Shape{1, 4, 6, 6}, rng);
        CHECK(max_abs_diff(compensatory_attention(f, p, store),
                           oracle::compensatory_attention(f, "c", store)) < 1e-10);
    }
}

TEST_CASE("complementarity and boundedness of the coupled gate weights") {
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        ParamStore<float> store;
        auto pm = make_params(store, "m", 4, rng);
        auto pn = make_params(store, "n", 4, rng);
        auto fm = random_tensor<float>(Shape{1, 4, 6, 6}, rng);
        auto fn = random_tensor<float>(Shape{1, 4, 6, 6}, rng);
        Tape<float> t(false);
        Var<float> vm = t.input(fm), vn = t.input(fn);
        auto [bm_ca, bn_ca] =
            dueling_softmax(channel_gate(vm, pm, store), channel_gate(vn, pn, store));
        for (std::size_t i = 0; i < bm_ca.value().size(); ++i) {
            const float sum = bm_ca.value()[i] + bn_ca.value()[i];
            CHECK(std::abs(sum - 1.0f) < 1e-6f);
            CHECK(bm_ca.value()[i] > 0.0f);
            CHECK(bm_ca.value()[i] < 1.0f);
        }
        auto [bm_sa, bn_sa] =
            dueling_softmax(spatial_gate(vm, pm, store), spatial_gate(vn, pn, store));
        for (std::size_t i = 0; i < bm_sa.value().size(); ++i) {
            CHECK(std::abs(bm_sa.value()[i] + bn_sa.value()[i] - 1.0f) < 1e-6f);
            CHECK(bm_sa.value()[i] > 0.0f);
            CHECK(bm_sa.value()[i] < 1.0f);
        }
    }
}

TEST_CASE("analytic attention-parameter gradients match finite differences") {
    Rng rng(18);
    ParamStore<double> store;
    auto pm = make_params(store, "m", 4, rng);
    auto pn = make_params(store, "n", 4, rng);
    auto fm = random_tensor<double>(Shape{1, 4, 6, 6}, rng);
    auto fn = random_tensor<double>(Shape{1, 4, 6, 6}, rng);

    // Scalar reduction: weighted sum of the fused attention maps.
    auto fixed = random_tensor<double>(Shape{1, 8, 6, 6}, rng);
    auto objective = [&]() {
        Tape<double> t(false);
        auto out = interactive_attention(t.input(fm), t.input(fn), pm, pn, store);
        double acc = 0;
        for (std::size_t i = 0; i < out.value().size(); ++i) acc += fixed[i] * out.value()[i];
        return acc;
    };

    store.zero_grad();
    Tape<double> t;
    auto out = interactive_attention(t.input(fm), t.input(fn), pm, pn, store);
    Tensor<double>& g = out.grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = fixed[i];
    t.backward();
    t.export_param_grads();

    const double eps = 1e-5;
    double worst = 0;
    for (int s = 0; s < store.count(); ++s) {
        for (std::size_t i = 0; i < store[s].value.size(); ++i) {
            const double keep = store[s].value[i];
            store[s].value[i] = keep + eps;
            const double up = objective();
            store[s].value[i] = keep - eps;
            const double dn = objective();
            store[s].value[i] = keep;
            const double fd = (up - dn) / (2 * eps);
            const double an = store[s].grad[i];
            if (std::abs(fd) < 1e-12 && std::abs(an) < 1e-12) continue;
            worst = std::max(worst, rel_err(an, fd));
        }
    }
    CHECK(worst < 1e-3);
}
