#ifndef ICAFUSION_SERIAL_HPP
#define ICAFUSION_SERIAL_HPP

#include <vector>

#include "icafusion/tensor.hpp"

// Straight-line serial reference kernels. Written independently of
// icafusion/kernels.hpp (per-element definition transcribed directly, no
// bounds precomputation, no parallelism) so they can serve as the oracle
// side of the kernel tests and as the baseline in the benchmark. Do not
// "optimize" these or fold them into the parallel implementations.

namespace icafusion::serial {

template <typename T>
void conv2d_forward(Tensor<T>& out, const Tensor<T>& in, const Tensor<T>& w,
                    const T* bias, int stride, int pad) {
    for (int oc = 0; oc < out.c(); ++oc)
        for (int oh = 0; oh < out.h(); ++oh)
            for (int ow = 0; ow < out.w(); ++ow) {
                T acc = bias ? bias[oc] : T(0);
                for (int ic = 0; ic < in.c(); ++ic)
                    for (int kh = 0; kh < w.h(); ++kh)
                        for (int kw = 0; kw < w.w(); ++kw) {
                            const int ih = oh * stride - pad + kh;
                            const int iw = ow * stride - pad + kw;
                            if (ih < 0 || ih >= in.h() || iw < 0 || iw >= in.w()) continue;
                            acc += w.at(oc, ic, kh, kw) * in.at(ic, ih, iw);
                        }
                out.at(oc, oh, ow) = acc;
            }
}

template <typename T>
void conv2d_backward_input(Tensor<T>& gin, const Tensor<T>& gout, const Tensor<T>& w,
                           int stride, int pad) {
    for (int oc = 0; oc < gout.c(); ++oc)
        for (int oh = 0; oh < gout.h(); ++oh)
            for (int ow = 0; ow < gout.w(); ++ow) {
                const T g = gout.at(oc, oh, ow);
                for (int ic = 0; ic < gin.c(); ++ic)
                    for (int kh = 0; kh < w.h(); ++kh)
                        for (int kw = 0; kw < w.w(); ++kw) {
                            const int ih = oh * stride - pad + kh;
                            const int iw = ow * stride - pad + kw;
                            if (ih < 0 || ih >= gin.h() || iw < 0 || iw >= gin.w()) continue;
                            gin.at(ic, ih, iw) += w.at(oc, ic, kh, kw) * g;
                        }
            }
}

template <typename T>
void conv2d_backward_params(Tensor<T>& gw, T* gb, const Tensor<T>& in,
                            const Tensor<T>& gout, int stride, int pad) {
    for (int oc = 0; oc < gout.c(); ++oc)
        for (int oh = 0; oh < gout.h(); ++oh)
            for (int ow = 0; ow < gout.w(); ++ow) {
                const T g = gout.at(oc, oh, ow);
                if (gb) gb[oc] += g;
                for (int ic = 0; ic < in.c(); ++ic)
                    for (int kh = 0; kh < gw.h(); ++kh)
                        for (int kw = 0; kw < gw.w(); ++kw) {
                            const int ih = oh * stride - pad + kh;
                            const int iw = ow * stride - pad + kw;
                            if (ih < 0 || ih >= in.h() || iw < 0 || iw >= in.w()) continue;
                            gw.at(oc, ic, kh, kw) += g * in.at(ic, ih, iw);
                        }
            }
}

template <typename T>
void global_avg_pool(Tensor<T>& out, const Tensor<T>& in) {
    for (int c = 0; c < in.c(); ++c) {
        T acc = 0;
        for (int h = 0; h < in.h(); ++h)
            for (int w = 0; w < in.w(); ++w) acc += in.at(c, h, w);
        out.at(c, 0, 0) = acc / static_cast<T>(in.h() * in.w());
    }
}

template <typename T>
void global_max_pool(Tensor<T>& out, const Tensor<T>& in) {
    for (int c = 0; c < in.c(); ++c) {
        T best = in.at(c, 0, 0);
        for (int h = 0; h < in.h(); ++h)
            for (int w = 0; w < in.w(); ++w)
                if (in.at(c, h, w) > best) best = in.at(c, h, w);
        out.at(c, 0, 0) = best;
    }
}

template <typename T>
void channel_avg_pool(Tensor<T>& out, const Tensor<T>& in) {
    for (int h = 0; h < in.h(); ++h)
        for (int w = 0; w < in.w(); ++w) {
            T acc = 0;
            for (int c = 0; c < in.c(); ++c) acc += in.at(c, h, w);
            out.at(0, h, w) = acc / static_cast<T>(in.c());
        }
}

template <typename T>
void channel_max_pool(Tensor<T>& out, const Tensor<T>& in) {
    for (int h = 0; h < in.h(); ++h)
        for (int w = 0; w < in.w(); ++w) {
            T best = in.at(0, h, w);
            for (int c = 1; c < in.c(); ++c)
                if (in.at(c, h, w) > best) best = in.at(c, h, w);
            out.at(0, h, w) = best;
        }
}

template <typename T>
void upsample2x_forward(Tensor<T>& out, const Tensor<T>& in) {
    for (int c = 0; c < out.c(); ++c)
        for (int h = 0; h < out.h(); ++h)
            for (int w = 0; w < out.w(); ++w) out.at(c, h, w) = in.at(c, h / 2, w / 2);
}

template <typename T>
void upsample2x_backward(Tensor<T>& gin, const Tensor<T>& gout) {
    for (int c = 0; c < gout.c(); ++c)
        for (int h = 0; h < gout.h(); ++h)
            for (int w = 0; w < gout.w(); ++w) gin.at(c, h / 2, w / 2) += gout.at(c, h, w);
}

}  // namespace icafusion::serial

#endif
