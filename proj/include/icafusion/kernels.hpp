#ifndef ICAFUSION_KERNELS_HPP
#define ICAFUSION_KERNELS_HPP

#include <cmath>
#include <vector>

#include "icafusion/tensor.hpp"

// OpenMP-parallel kernels for the network forward/backward passes.
//
// Determinism contract: every parallel loop ranges over independent output
// elements and each element is accumulated in a fixed serial order, so
// results do not depend on the thread count. Reductions to scalars are
// always serial. A plain serial mirror of these kernels lives in
// icafusion/serial.hpp and is used as the oracle in tests and as the
// baseline in the kernel benchmark.

namespace icafusion::kernels {

inline int conv_out_dim(int in, int kernel, int stride, int pad) {
    return (in + 2 * pad - kernel) / stride + 1;
}

namespace detail {

/// Packs the receptive-field patch of every output pixel in row `oh` as a
/// contiguous (ic*kh*kw) vector; out-of-image taps become zeros, which makes
/// the inner products below branch-free.
template <typename T>
void pack_patch_row(T* dst, const Tensor<T>& in, int oh, int ow_n, int kh_n, int kw_n,
                    int stride, int pad) {
    const int ic_n = in.c(), ih_n = in.h(), iw_n = in.w();
    for (int ow = 0; ow < ow_n; ++ow) {
        for (int ic = 0; ic < ic_n; ++ic) {
            for (int kh = 0; kh < kh_n; ++kh) {
                const int ih = oh * stride - pad + kh;
                if (ih < 0 || ih >= ih_n) {
                    for (int kw = 0; kw < kw_n; ++kw) *dst++ = T(0);
                    continue;
                }
                const T* irow = &in.at(ic, ih, 0);
                const int iw0 = ow * stride - pad;
                if (iw0 >= 0 && iw0 + kw_n <= iw_n) {
                    for (int kw = 0; kw < kw_n; ++kw) *dst++ = irow[iw0 + kw];
                } else {
                    for (int kw = 0; kw < kw_n; ++kw) {
                        const int iw = iw0 + kw;
                        *dst++ = (iw >= 0 && iw < iw_n) ? irow[iw] : T(0);
                    }
                }
            }
        }
    }
}

}  // namespace detail

/// out(oc,oh,ow) = b(oc) + sum_{ic,kh,kw} w(oc,ic,kh,kw) * in(ic, oh*s-p+kh, ow*s-p+kw)
/// Zero padding. `bias` may be null. Row-packed so the inner product runs
/// over one contiguous patch vector per output pixel.
template <typename T>
void conv2d_forward(Tensor<T>& out, const Tensor<T>& in, const Tensor<T>& w,
                    const T* bias, int stride, int pad) {
    const int ic_n = in.c();
    const int oc_n = w.n(), kh_n = w.h(), kw_n = w.w();
    if (w.c() != ic_n)
        throw DimensionError("conv2d: weight expects " + std::to_string(w.c()) +
                             " input channels, got " + std::to_string(ic_n));
    const int oh_n = conv_out_dim(in.h(), kh_n, stride, pad);
    const int ow_n = conv_out_dim(in.w(), kw_n, stride, pad);
    if (out.shape() != Shape{1, oc_n, oh_n, ow_n})
        throw DimensionError("conv2d: bad output shape " + out.shape().str());
    const int patch = ic_n * kh_n * kw_n;

#pragma omp parallel
    {
        std::vector<T> row(static_cast<std::size_t>(ow_n) * patch);
#pragma omp for schedule(static)
        for (int oh = 0; oh < oh_n; ++oh) {
            detail::pack_patch_row(row.data(), in, oh, ow_n, kh_n, kw_n, stride, pad);
            for (int oc = 0; oc < oc_n; ++oc) {
                const T* wv = w.data() + static_cast<std::size_t>(oc) * patch;
                T* orow = &out.at(oc, oh, 0);
                const T bv = bias ? bias[oc] : T(0);
                for (int ow = 0; ow < ow_n; ++ow) {
                    const T* pv = row.data() + static_cast<std::size_t>(ow) * patch;
                    T acc = 0;
#pragma omp simd reduction(+ : acc)
                    for (int t = 0; t < patch; ++t) acc += wv[t] * pv[t];
                    orow[ow] = bv + acc;
                }
            }
        }
    }
}

namespace detail {

/// Scatter-free gather form, efficient when the output-channel count is
/// small (short patch vectors would not amortize packing).
template <typename T>
void conv2d_backward_input_gather(Tensor<T>& gin, const Tensor<T>& gout, const Tensor<T>& w,
                                  int stride, int pad) {
    const int ic_n = gin.c(), ih_n = gin.h(), iw_n = gin.w();
    const int oc_n = w.n(), kh_n = w.h(), kw_n = w.w();
    const int oh_n = gout.h(), ow_n = gout.w();

#pragma omp parallel for collapse(2) schedule(static)
    for (int ic = 0; ic < ic_n; ++ic) {
        for (int ih = 0; ih < ih_n; ++ih) {
            T* grow = &gin.at(ic, ih, 0);
            for (int oc = 0; oc < oc_n; ++oc) {
                for (int kh = 0; kh < kh_n; ++kh) {
                    const int t = ih + pad - kh;
                    if (t < 0 || t % stride != 0) continue;
                    const int oh = t / stride;
                    if (oh >= oh_n) continue;
                    const T* gorow = &gout.at(oc, oh, 0);
                    for (int kw = 0; kw < kw_n; ++kw) {
                        const int shift = kw - pad;
                        int lo = 0;
                        if (shift < 0) lo = (-shift + stride - 1) / stride;
                        const int top = iw_n - 1 - shift;  // trunc division would
                        int hi = top < 0 ? 0 : top / stride + 1;  // round the wrong way
                        if (hi > ow_n) hi = ow_n;
                        const T wv = w.at(oc, ic, kh, kw);
                        if (stride == 1) {
                            T* gp = grow + shift;
                            for (int ow = lo; ow < hi; ++ow) gp[ow] += wv * gorow[ow];
                        } else {
                            for (int ow = lo; ow < hi; ++ow)
                                grow[ow * stride + shift] += wv * gorow[ow];
                        }
                    }
                }
            }
        }
    }
}

}  // namespace detail

/// gin(ic,ih,iw) += sum over outputs this input pixel fed. For wide layers
/// the contributing output taps of every input pixel are packed into one
/// contiguous vector and dotted against per-channel rearranged weights;
/// narrow layers use the direct gather form.
template <typename T>
void conv2d_backward_input(Tensor<T>& gin, const Tensor<T>& gout, const Tensor<T>& w,
                           int stride, int pad) {
    const int ic_n = gin.c(), ih_n = gin.h(), iw_n = gin.w();
    const int oc_n = w.n(), kh_n = w.h(), kw_n = w.w();
    const int oh_n = gout.h(), ow_n = gout.w();
    const int patch = oc_n * kh_n * kw_n;
    if (patch < 64) {
        detail::conv2d_backward_input_gather(gin, gout, w, stride, pad);
        return;
    }

    // wt[ic][(oc,kh,kw)] = w[oc][ic][kh][kw]
    std::vector<T> wt(static_cast<std::size_t>(ic_n) * patch);
    for (int oc = 0; oc < oc_n; ++oc)
        for (int ic = 0; ic < ic_n; ++ic)
            for (int kh = 0; kh < kh_n; ++kh)
                for (int kw = 0; kw < kw_n; ++kw)
                    wt[static_cast<std::size_t>(ic) * patch + (oc * kh_n + kh) * kw_n + kw] =
                        w.at(oc, ic, kh, kw);

#pragma omp parallel
    {
        std::vector<T> row(static_cast<std::size_t>(iw_n) * patch);
#pragma omp for schedule(static)
        for (int ih = 0; ih < ih_n; ++ih) {
            T* dst = row.data();
            for (int iw = 0; iw < iw_n; ++iw) {
                for (int oc = 0; oc < oc_n; ++oc) {
                    for (int kh = 0; kh < kh_n; ++kh) {
                        const int t = ih + pad - kh;
                        const int oh = t / stride;
                        if (t < 0 || t % stride != 0 || oh >= oh_n) {
                            for (int kw = 0; kw < kw_n; ++kw) *dst++ = T(0);
                            continue;
                        }
                        const T* gorow = &gout.at(oc, oh, 0);
                        for (int kw = 0; kw < kw_n; ++kw) {
                            const int u = iw + pad - kw;
                            const int ow = u / stride;
                            *dst++ = (u >= 0 && u % stride == 0 && ow < ow_n) ? gorow[ow]
                                                                              : T(0);
                        }
                    }
                }
            }
            for (int ic = 0; ic < ic_n; ++ic) {
                const T* wv = wt.data() + static_cast<std::size_t>(ic) * patch;
                T* grow = &gin.at(ic, ih, 0);
                for (int iw = 0; iw < iw_n; ++iw) {
                    const T* pv = row.data() + static_cast<std::size_t>(iw) * patch;
                    T acc = 0;
#pragma omp simd reduction(+ : acc)
                    for (int t = 0; t < patch; ++t) acc += wv[t] * pv[t];
                    grow[iw] += acc;
                }
            }
        }
    }
}

/// gw(oc,ic,kh,kw) += sum_{oh,ow} gout(oc,oh,ow) * in(ic, oh*s-p+kh, ow*s-p+kw)
/// gb(oc) += sum gout(oc). `gb` may be null. Row-packed: each output pixel
/// contributes one axpy over the contiguous weight-gradient slice of its
/// channel, accumulated in fixed (oh, ow) order.
template <typename T>
void conv2d_backward_params(Tensor<T>& gw, T* gb, const Tensor<T>& in,
                            const Tensor<T>& gout, int stride, int pad) {
    const int ic_n = in.c();
    const int oc_n = gw.n(), kh_n = gw.h(), kw_n = gw.w();
    const int oh_n = gout.h(), ow_n = gout.w();
    const int patch = ic_n * kh_n * kw_n;

    constexpr int kRowBlock = 4;
    std::vector<T> rows(static_cast<std::size_t>(kRowBlock) * ow_n * patch);
    for (int ob = 0; ob < oh_n; ob += kRowBlock) {
        const int ob_end = std::min(oh_n, ob + kRowBlock);
#pragma omp parallel for schedule(static)
        for (int oh = ob; oh < ob_end; ++oh)
            detail::pack_patch_row(rows.data() + static_cast<std::size_t>(oh - ob) * ow_n * patch,
                                   in, oh, ow_n, kh_n, kw_n, stride, pad);
#pragma omp parallel for schedule(static)
        for (int oc = 0; oc < oc_n; ++oc) {
            T* gws = gw.data() + static_cast<std::size_t>(oc) * patch;
            for (int oh = ob; oh < ob_end; ++oh) {
                const T* gorow = &gout.at(oc, oh, 0);
                const T* prow = rows.data() + static_cast<std::size_t>(oh - ob) * ow_n * patch;
                for (int ow = 0; ow < ow_n; ++ow) {
                    const T g = gorow[ow];
                    const T* pv = prow + static_cast<std::size_t>(ow) * patch;
#pragma omp simd
                    for (int t = 0; t < patch; ++t) gws[t] += g * pv[t];
                }
            }
        }
    }
    if (gb) {
        for (int oc = 0; oc < oc_n; ++oc) {
            T acc = 0;
            const T* gp = &gout.at(oc, 0, 0);
            const std::size_t m = static_cast<std::size_t>(oh_n) * ow_n;
#pragma omp simd reduction(+ : acc)
            for (std::size_t i = 0; i < m; ++i) acc += gp[i];
            gb[oc] += acc;
        }
    }
}

/// Global average pooling over H, W: (c,h,w) -> (c,1,1).
template <typename T>
void global_avg_pool(Tensor<T>& out, const Tensor<T>& in) {
    const std::size_t m = static_cast<std::size_t>(in.h()) * in.w();
#pragma omp parallel for schedule(static)
    for (int c = 0; c < in.c(); ++c) {
        const T* p = &in.at(c, 0, 0);
        T acc = 0;
        for (std::size_t i = 0; i < m; ++i) acc += p[i];
        out.at(c, 0, 0) = acc / static_cast<T>(m);
    }
}

/// Global max pooling over H, W; arg indices (row-major, first max wins)
/// recorded for the backward pass.
template <typename T>
void global_max_pool(Tensor<T>& out, std::vector<int>& arg, const Tensor<T>& in) {
    const std::size_t m = static_cast<std::size_t>(in.h()) * in.w();
    arg.assign(in.c(), 0);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < in.c(); ++c) {
        const T* p = &in.at(c, 0, 0);
        T best = p[0];
        int bi = 0;
        for (std::size_t i = 1; i < m; ++i)
            if (p[i] > best) { best = p[i]; bi = static_cast<int>(i); }
        out.at(c, 0, 0) = best;
        arg[c] = bi;
    }
}

/// Mean across channels: (c,h,w) -> (1,h,w).
template <typename T>
void channel_avg_pool(Tensor<T>& out, const Tensor<T>& in) {
    const std::size_t m = static_cast<std::size_t>(in.h()) * in.w();
    const int cn = in.c();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < m; ++i) {
        T acc = 0;
        for (int c = 0; c < cn; ++c) acc += in[static_cast<std::size_t>(c) * m + i];
        out[i] = acc / static_cast<T>(cn);
    }
}

/// Max across channels (first max wins): (c,h,w) -> (1,h,w).
template <typename T>
void channel_max_pool(Tensor<T>& out, std::vector<int>& arg, const Tensor<T>& in) {
    const std::size_t m = static_cast<std::size_t>(in.h()) * in.w();
    const int cn = in.c();
    arg.assign(m, 0);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < m; ++i) {
        T best = in[i];
        int bc = 0;
        for (int c = 1; c < cn; ++c) {
            T v = in[static_cast<std::size_t>(c) * m + i];
            if (v > best) { best = v; bc = c; }
        }
        out[i] = best;
        arg[i] = bc;
    }
}

/// Nearest-neighbour 2x upsampling: (c,h,w) -> (c,2h,2w).
template <typename T>
void upsample2x_forward(Tensor<T>& out, const Tensor<T>& in) {
    const int cn = in.c(), hn = in.h(), wn = in.w();
#pragma omp parallel for collapse(2) schedule(static)
    for (int c = 0; c < cn; ++c) {
        for (int h = 0; h < hn; ++h) {
            const T* irow = &in.at(c, h, 0);
            T* o0 = &out.at(c, 2 * h, 0);
            T* o1 = &out.at(c, 2 * h + 1, 0);
            for (int w = 0; w < wn; ++w) {
                o0[2 * w] = irow[w];
                o0[2 * w + 1] = irow[w];
                o1[2 * w] = irow[w];
                o1[2 * w + 1] = irow[w];
            }
        }
    }
}

/// Adjoint of nearest 2x upsampling: each input cell sums its 2x2 block.
template <typename T>
void upsample2x_backward(Tensor<T>& gin, const Tensor<T>& gout) {
    const int cn = gin.c(), hn = gin.h(), wn = gin.w();
#pragma omp parallel for collapse(2) schedule(static)
    for (int c = 0; c < cn; ++c) {
        for (int h = 0; h < hn; ++h) {
            const T* g0 = &gout.at(c, 2 * h, 0);
            const T* g1 = &gout.at(c, 2 * h + 1, 0);
            T* grow = &gin.at(c, h, 0);
            for (int w = 0; w < wn; ++w)
                grow[w] += g0[2 * w] + g0[2 * w + 1] + g1[2 * w] + g1[2 * w + 1];
        }
    }
}

// Scalar activation helpers shared by the tape ops and the critic.

template <typename T>
T sigmoid(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
}

template <typename T>
T leaky_relu(T x, T slope) { return x > T(0) ? x : slope * x; }

template <typename T>
T leaky_relu_grad(T x, T slope) { return x > T(0) ? T(1) : slope; }

}  // namespace icafusion::kernels

#endif
