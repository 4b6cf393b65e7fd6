#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "icafusion/kernels.hpp"
#include "icafusion/serial.hpp"
#include "test_util.hpp"

using namespace icafusion;
using testutil::max_abs_diff;
using testutil::random_tensor;

namespace {

struct ConvShape {
    int ic, oc, h, w, k, stride, pad;
};

const ConvShape kShapes[] = {
    {3, 5, 11, 13, 3, 1, 1}, {4, 2, 16, 16, 3, 2, 1}, {2, 1, 9, 7, 7, 1, 3},
    {6, 6, 1, 1, 1, 1, 0},   {1, 8, 12, 10, 3, 2, 1}, {5, 3, 8, 8, 1, 1, 0},
};

}  // namespace

TEST_CASE("conv_out_dim matches stride arithmetic") {
    CHECK(kernels::conv_out_dim(128, 3, 2, 1) == 64);
    CHECK(kernels::conv_out_dim(64, 3, 2, 1) == 32);
    CHECK(kernels::conv_out_dim(64, 3, 1, 1) == 64);
    CHECK(kernels::conv_out_dim(5, 7, 1, 3) == 5);
    CHECK(kernels::conv_out_dim(1, 1, 1, 0) == 1);
}

TEST_CASE("parallel conv kernels match the serial reference") {
    Rng rng(11);
    for (const auto& s : kShapes) {
        auto in = random_tensor<double>(Shape{1, s.ic, s.h, s.w}, rng);
        auto w = random_tensor<double>(Shape{s.oc, s.ic, s.k, s.k}, rng);
        auto b = random_tensor<double>(Shape{s.oc, 1, 1, 1}, rng);
        const int oh = kernels::conv_out_dim(s.h, s.k, s.stride, s.pad);
        const int ow = kernels::conv_out_dim(s.w, s.k, s.stride, s.pad);

        Tensor<double> out_p(s.oc, oh, ow), out_s(s.oc, oh, ow);
        kernels::conv2d_forward(out_p, in, w, b.data(), s.stride, s.pad);
        serial::conv2d_forward(out_s, in, w, b.data(), s.stride, s.pad);
        CHECK(max_abs_diff(out_p, out_s) < 1e-12);

        auto gout = random_tensor<double>(Shape{1, s.oc, oh, ow}, rng);
        Tensor<double> gin_p(s.ic, s.h, s.w), gin_s(s.ic, s.h, s.w);
        kernels::conv2d_backward_input(gin_p, gout, w, s.stride, s.pad);
        serial::conv2d_backward_input(gin_s, gout, w, s.stride, s.pad);
        CHECK(max_abs_diff(gin_p, gin_s) < 1e-12);

        Tensor<double> gw_p(w.shape()), gw_s(w.shape());
        Tensor<double> gb_p(Shape{s.oc, 1, 1, 1}), gb_s(Shape{s.oc, 1, 1, 1});
        kernels::conv2d_backward_params(gw_p, gb_p.data(), in, gout, s.stride, s.pad);
        serial::conv2d_backward_params(gw_s, gb_s.data(), in, gout, s.stride, s.pad);
        CHECK(max_abs_diff(gw_p, gw_s) < 1e-12);
        CHECK(max_abs_diff(gb_p, gb_s) < 1e-12);
    }
}

TEST_CASE("conv backward passes are adjoint to the forward pass") {
    Rng rng(22);
    for (const auto& s : {kShapes[0], kShapes[1], kShapes[2]}) {
        auto x = random_tensor<double>(Shape{1, s.ic, s.h, s.w}, rng);
        auto w = random_tensor<double>(Shape{s.oc, s.ic, s.k, s.k}, rng);
        const int oh = kernels::conv_out_dim(s.h, s.k, s.stride, s.pad);
        const int ow = kernels::conv_out_dim(s.w, s.k, s.stride, s.pad);
        auto y = random_tensor<double>(Shape{1, s.oc, oh, ow}, rng);

        // <conv(x; w), y> == <x, conv_backward_input(y; w)>
        Tensor<double> ax(s.oc, oh, ow);
        kernels::conv2d_forward(ax, x, w, static_cast<const double*>(nullptr), s.stride, s.pad);
        Tensor<double> aty(s.ic, s.h, s.w);
        kernels::conv2d_backward_input(aty, y, w, s.stride, s.pad);
        double lhs = 0, rhs = 0;
        for (std::size_t i = 0; i < ax.size(); ++i) lhs += ax[i] * y[i];
        for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * aty[i];
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));

        // <grad_w, dw> == <conv(x; dw), y> for any direction dw
        Tensor<double> gw(w.shape());
        kernels::conv2d_backward_params(gw, static_cast<double*>(nullptr), x, y, s.stride,
                                        s.pad);
        auto dw = random_tensor<double>(w.shape(), rng);
        Tensor<double> adx(s.oc, oh, ow);
        kernels::conv2d_forward(adx, x, dw, static_cast<const double*>(nullptr), s.stride,
                                s.pad);
        double lhs2 = 0, rhs2 = 0;
        for (std::size_t i = 0; i < gw.size(); ++i) lhs2 += gw[i] * dw[i];
        for (std::size_t i = 0; i < adx.size(); ++i) rhs2 += adx[i] * y[i];
        CHECK(lhs2 == doctest::Approx(rhs2).epsilon(1e-10));
    }
}

TEST_CASE("pooling kernels match the serial reference") {
    Rng rng(33);
    auto in = random_tensor<double>(Shape{1, 7, 9, 11}, rng);

    Tensor<double> gap_p(7, 1, 1), gap_s(7, 1, 1);
    kernels::global_avg_pool(gap_p, in);
    serial::global_avg_pool(gap_s, in);
    CHECK(max_abs_diff(gap_p, gap_s) < 1e-13);

    Tensor<double> gmp_p(7, 1, 1), gmp_s(7, 1, 1);
    std::vector<int> arg;
    kernels::global_max_pool(gmp_p, arg, in);
    serial::global_max_pool(gmp_s, in);
    CHECK(max_abs_diff(gmp_p, gmp_s) == 0.0);

    Tensor<double> cap_p(1, 9, 11), cap_s(1, 9, 11);
    kernels::channel_avg_pool(cap_p, in);
    serial::channel_avg_pool(cap_s, in);
    CHECK(max_abs_diff(cap_p, cap_s) < 1e-13);

    Tensor<double> cmp_p(1, 9, 11), cmp_s(1, 9, 11);
    std::vector<int> arg2;
    kernels::channel_max_pool(cmp_p, arg2, in);
    serial::channel_max_pool(cmp_s, in);
    CHECK(max_abs_diff(cmp_p, cmp_s) == 0.0);
}

TEST_CASE("max pooling takes the first maximum on ties") {
    Tensor<double> in(2, 2, 2);
    in.fill(3.0);
    Tensor<double> out(2, 1, 1);
    std::vector<int> arg;
    kernels::global_max_pool(out, arg, in);
    CHECK(arg[0] == 0);
    CHECK(arg[1] == 0);

    Tensor<double> cout(1, 2, 2);
    std::vector<int> carg;
    kernels::channel_max_pool(cout, carg, in);
    for (int a : carg) CHECK(a == 0);
}

TEST_CASE("upsampling matches serial and satisfies the adjoint identity") {
    Rng rng(44);
    auto in = random_tensor<double>(Shape{1, 3, 5, 6}, rng);
    Tensor<double> up_p(3, 10, 12), up_s(3, 10, 12);
    kernels::upsample2x_forward(up_p, in);
    serial::upsample2x_forward(up_s, in);
    CHECK(max_abs_diff(up_p, up_s) == 0.0);

    auto y = random_tensor<double>(Shape{1, 3, 10, 12}, rng);
    Tensor<double> down(3, 5, 6);
    kernels::upsample2x_backward(down, y);
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < up_p.size(); ++i) lhs += up_p[i] * y[i];
    for (std::size_t i = 0; i < in.size(); ++i) rhs += in[i] * down[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("exhaustive tiny shapes match serial (1-wide maps included)") {
    // Strided backward bounds once rounded the wrong way on 1x1 maps; keep
    // the whole tiny-shape grid covered.
    Rng rng(55);
    for (int h = 1; h <= 5; ++h)
        for (int w = 1; w <= 5; ++w)
            for (int stride : {1, 2})
                for (int oc : {1, 3, 8}) {
                    const int oh = kernels::conv_out_dim(h, 3, stride, 1);
                    const int ow = kernels::conv_out_dim(w, 3, stride, 1);
                    if (oh < 1 || ow < 1) continue;
                    auto in = random_tensor<double>(Shape{1, 2, h, w}, rng);
                    auto wt = random_tensor<double>(Shape{oc, 2, 3, 3}, rng);
                    auto gout = random_tensor<double>(Shape{1, oc, oh, ow}, rng);

                    Tensor<double> f_p(oc, oh, ow), f_s(oc, oh, ow);
                    kernels::conv2d_forward(f_p, in, wt, static_cast<const double*>(nullptr),
                                            stride, 1);
                    serial::conv2d_forward(f_s, in, wt, static_cast<const double*>(nullptr),
                                           stride, 1);
                    REQUIRE(max_abs_diff(f_p, f_s) < 1e-12);

                    Tensor<double> gi_p(2, h, w), gi_s(2, h, w);
                    kernels::conv2d_backward_input(gi_p, gout, wt, stride, 1);
                    serial::conv2d_backward_input(gi_s, gout, wt, stride, 1);
                    REQUIRE(max_abs_diff(gi_p, gi_s) < 1e-12);

                    Tensor<double> gw_p(wt.shape()), gw_s(wt.shape());
                    kernels::conv2d_backward_params(gw_p, static_cast<double*>(nullptr), in,
                                                    gout, stride, 1);
                    serial::conv2d_backward_params(gw_s, static_cast<double*>(nullptr), in,
                                                   gout, stride, 1);
                    REQUIRE(max_abs_diff(gw_p, gw_s) < 1e-12);
                }
}

TEST_CASE("conv rejects channel mismatch") {
    Tensor<double> in(3, 4, 4), w(Shape{2, 5, 3, 3}), out(2, 4, 4);
    CHECK_THROWS_AS(
        kernels::conv2d_forward(out, in, w, static_cast<const double*>(nullptr), 1, 1),
        DimensionError);
}
