#ifndef ICAFUSION_AUTODIFF_HPP
#define ICAFUSION_AUTODIFF_HPP

#include <cmath>
#include <functional>
#include <initializer_list>
#include <utility>
#include <vector>

#include "icafusion/kernels.hpp"
#include "icafusion/params.hpp"
#include "icafusion/tensor.hpp"

// Reverse-mode tape used for the generator and the losses. A tape is built
// per forward pass; backward() sweeps the recorded nodes in reverse and
// accumulates into parent gradients, which handles the fused-feature DAG
// (concats, two-stage gating, skip reuse) without per-graph bookkeeping.
//
// The critics are not built on the tape; they carry hand-derived backward
// passes (see discriminator.hpp) because the gradient penalty needs a
// derivative *of* their input gradient.

namespace icafusion {

template <typename T>
class Tape;

template <typename T>
struct Var {
    Tape<T>* tape = nullptr;
    int idx = -1;

    const Tensor<T>& value() const { return tape->value(idx); }
    Tensor<T>& grad() { return tape->grad(idx); }
    bool needs_grad() const { return tape->needs_grad(idx); }
};

template <typename T>
class Tape {
public:
    explicit Tape(bool recording = true) : recording_(recording) {}

    bool recording() const { return recording_; }

    /// Leaf holding a value; set needs_grad to collect d(loss)/d(input).
    Var<T> input(Tensor<T> v, bool needs_grad = false) {
        return make(std::move(v), needs_grad && recording_, nullptr);
    }

    /// Leaf bound to a parameter store slot. The gradient accumulated on the
    /// tape is exported back to the store with export_param_grads().
    Var<T> param(ParamStore<T>& store, int slot) {
        Var<T> v = make(store[slot].value, recording_, nullptr);
        if (recording_) param_refs_.push_back({&store, slot, v.idx});
        return v;
    }

    /// Reverse sweep. Seed gradients first (e.g. loss.grad() = 1).
    void backward() {
        for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
            Node& n = nodes_[i];
            if (n.back && !n.grad.empty()) n.back();
        }
    }

    /// store.grad += tape gradient, for every parameter leaf touched.
    void export_param_grads() {
        for (const auto& r : param_refs_) {
            const Tensor<T>& g = nodes_[r.node].grad;
            if (g.empty()) continue;
            Tensor<T>& dst = (*r.store)[r.slot].grad;
            for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
        }
    }

    const Tensor<T>& value(int i) const { return nodes_[i].value; }

    Tensor<T>& grad(int i) {
        Node& n = nodes_[i];
        if (n.grad.empty()) {
            n.grad = Tensor<T>(n.value.shape());
        }
        return n.grad;
    }

    bool needs_grad(int i) const { return nodes_[i].needs; }

    // --- op plumbing -------------------------------------------------------

    using BackFn = std::function<void()>;

    Var<T> make(Tensor<T> value, bool needs, BackFn back) {
        nodes_.push_back(Node{std::move(value), Tensor<T>{}, std::move(back), needs});
        return Var<T>{this, static_cast<int>(nodes_.size()) - 1};
    }

    void set_back(int i, BackFn f) { nodes_[i].back = std::move(f); }

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        BackFn back;
        bool needs = false;
    };

    std::vector<Node> nodes_;
    struct ParamRef {
        ParamStore<T>* store;
        int slot;
        int node;
    };
    std::vector<ParamRef> param_refs_;
    bool recording_ = true;
};

namespace detail {

template <typename T>
bool record(std::initializer_list<Var<T>> parents) {
    bool any = false;
    for (const Var<T>& p : parents) any = any || p.needs_grad();
    return any && parents.begin()->tape->recording();
}

}  // namespace detail

/// Installs the backward closure on a freshly created node; lets op bodies
/// move the output tensor first and capture plain indices after.
template <typename T, typename F>
Var<T> retarget(Var<T> v, F&& f) {
    v.tape->set_back(v.idx, std::forward<F>(f));
    return v;
}

// --- elementwise and structural ops ----------------------------------------

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
    check_same_shape(a.value(), b.value(), "add");
    Tensor<T> out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
    Tape<T>* t = a.tape;
    if (!detail::record<T>({a, b})) return t->make(std::move(out), false, nullptr);
    Var<T> y = t->make(std::move(out), true, nullptr);
    int ai = a.idx, bi = b.idx, yi = y.idx;
    return retarget(y, [t, ai, bi, yi] {
        const Tensor<T>& g = t->grad(yi);
        Tensor<T>& ga = t->grad(ai);
        Tensor<T>& gb = t->grad(bi);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
            gb[i] += g[i];
        }
    });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
    check_same_shape(a.value(), b.value(), "sub");
    Tensor<T> out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
    Tape<T>* t = a.tape;
    if (!detail::record<T>({a, b})) return t->make(std::move(out), false, nullptr);
    Var<T> y = t->make(std::move(out), true, nullptr);
    int ai = a.idx, bi = b.idx, yi = y.idx;
    return retarget(y, [t, ai, bi, yi] {
        const Tensor<T>& g = t->grad(yi);
        Tensor<T>& ga = t->grad(ai);
        Tensor<T>& gb = t->grad(bi);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
            gb[i] -= g[i];
        }
    });
}

template <typename T>
Var<T> scale(Var<T> a, T s) {
    Tensor<T> out = a.value();
    for (auto& v : out) v *= s;
    Tape<T>* t = a.tape;
    if (!detail::record<T>({a})) return t->make(std::move(out), false, nullptr);
    Var<T> y = t->make(std::move(out), true, nullptr);
    int ai = a.idx, yi = y.idx;
    return retarget(y, [t, ai, yi, s] {
        const Tensor<T>& g = t->grad(yi);
        Tensor<T>& ga = t->grad(ai);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
    });
}

template <typename T>
Var<T> square(Var<T> a) {
    Tensor<T> out = a.value();
    for (auto& v : out) v *= v;
    Tape<T>* t = a.tape;
    if (!detail::record<T>({a})) return t->make(std::move(out), false, nullptr);
    Var<T> y = t->make(std::move(out), true, nullptr);
    int ai = a.idx, yi = y.idx;
    return retarget(y, [t, ai, yi] {
        const Tensor<T>& g = t->grad(yi);
        const Tensor<T>& x = t->value(ai);
        Tensor<T>& ga = t->grad(ai);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += T(2) * x[i] * g[i];
    });
}

template <typename T>
Var<T> abs_val(Var<T> a) {
    Tensor<T> out = a.value();
    for (auto& v : out) v = std::abs(v);
    Tape<T>* t = a.tape;
    if (!detail::record<T>({a})) return t->make(std::move(out), false, nullptr);
    Var<T> y = t->make(std::move(out), true, nullptr);
    int ai = a.idx, yi = y.idx;
    return retarget(y, [t, ai, yi] {
        const Tensor<T>& g = t->grad(yi);
        const Tensor<T>& x = t->value(ai);
        Tensor<T>& ga = t->grad(ai);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const T s = x[i] > T(0) ? T(1) : (x[i] < T(0) ? T(-1) : T(0));
            ga[i] += s * g[i];
        }
    });
}

template <typename T>
Var<T> sum_all(Var<T> a) {
    T acc = 0;
    for (const T& v : a.value()) acc += v;
    Tensor<T> out(Shape{1, 1, 1, 1});
    out[0] = acc;
    Tape<T>* t = a.tape;
    if (!detail::record<T>({a})) return t->make(std::move(out), false, nullptr);
    Var<T> y = t->make(std::move(out), true, nullptr);
    int ai = a.idx, yi = y.idx;
    return retarget(y, [t, ai, yi] {
        const T g = t->grad(yi)[0];
        Tensor<T>& ga = t->grad(ai);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    });
}

// --- activations -------------------------------------------------------------

template <typename T>
Var<T> tanh_act(Var<T> a) {
    Tensor<T> out = a.value();
    for (auto& v : out) v = std::tanh(v);
    Tape<T>* t = a.tape;
    if (!detail::record<T>({a})) return t->make(std::move(out), false, nullptr);
    Var<T> y = t->make(std::move(out), true, nullptr);
    int ai = a.idx, yi = y.idx;
    return retarget(y, [t, ai, yi] {
        const Tensor<T>& g = t->grad(yi);
        const Tensor<T>& o = t->value(yi);
        Tensor<T>& ga = t->grad(ai);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += (T(1) - o[i] * o[i]) * g[i];
    });
}

template <typename T>
Var<T> sigmoid_act(Var<T> a) {
    Tensor<T> out = a.value();
    for (auto& v : out) v = kernels::sigmoid(v);
    Tape<T>* t = a.tape;
    if (!detail::record<T>({a})) return t->make(std::move(out), false, nullptr);
    Var<T> y = t->make(std::move(out), true, nullptr);
    int ai = a.idx, yi = y.idx;
    return retarget(y, [t, ai, yi] {
        const Tensor<T>& g = t->grad(yi);
        const Tensor<T>& o = t->value(yi);
        Tensor<T>& ga = t->grad(ai);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += o[i] * (T(1) - o[i]) * g[i];
    });
}

/// PReLU with one learnable slope per layer (scalar parameter tensor).
template <typename T>
Var<T> prelu(Var<T> a, Var<T> slope) {
    const T s = slope.value()[0];
    Tensor<T> out = a.value();
    for (auto& v : out)
        if (v < T(0)) v *= s;
    Tape<T>* t = a.tape;
    if (!detail::record<T>({a, slope})) return t->make(std::move(out), false, nullptr);
    Var<T> y = t->make(std::move(out), true, nullptr);
    int ai = a.idx, si = slope.idx, yi = y.idx;
    return retarget(y, [t, ai, si, yi] {
        const Tensor<T>& g = t->grad(yi);
        const Tensor<T>& x = t->value(ai);
        const T s = t->value(si)[0];
        Tensor<T>& ga = t->grad(ai);
        T gs = 0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (x[i] > T(0)) {
                ga[i] += g[i];
            } else {
                ga[i] += s * g[i];
                gs += x[i] * g[i];
            }
        }
        t->grad(si)[0] += gs;
    });
}

// --- convolution and pooling -------------------------------------------------

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> w, Var<T> b, int stride, int pad) {
    const Tensor<T>& xv = x.value();
    const Tensor<T>& wv = w.value();
    Tensor<T> out(wv.n(), kernels::conv_out_dim(xv.h(), wv.h(), stride, pad),
                  kernels::conv_out_dim(xv.w(), wv.w(), stride, pad));
    kernels::conv2d_forward(out, xv, wv, b.value().data(), stride, pad);
    Tape<T>* t = x.tape;
    if (!detail::record<T>({x, w, b})) return t->make(std::move(out), false, nullptr);
    Var<T> y = t->make(std::move(out), true, nullptr);
    int xi = x.idx, wi = w.idx, bi = b.idx, yi = y.idx;
    return retarget(y, [t, xi, wi, bi, yi, stride, pad] {
        const Tensor<T>& g = t->grad(yi);
        kernels::conv2d_backward_input(t->grad(xi), g, t->value(wi), stride, pad);
        kernels::conv2d_backward_params(t->grad(wi), t->grad(bi).data(), t->value(xi), g,
                                        stride, pad);
    });
}

template <typename T>
Var<T> global_avg_pool(Var<T> x) {
    const Tensor<T>& xv = x.value();
    Tensor<T> out(xv.c(), 1, 1);
    kernels::global_avg_pool(out, xv);
    Tape<T>* t = x.tape;
    if (!detail::record<T>({x})) return t->make(std::move(out), false, nullptr);
    Var<T> y = t->make(std::move(out), true, nullptr);
    int xi = x.idx, yi = y.idx;
    return retarget(y, [t, xi, yi] {
        const Tensor<T>& g = t->grad(yi);
        Tensor<T>& gx = t->grad(xi);
        const std::size_t m = static_cast<std::size_t>(gx.h()) * gx.w();
        for (int c = 0; c < gx.c(); ++c) {
            const T gv = g[c] / static_cast<T>(m);
            T* p = &gx.at(c, 0, 0);
            for (std::size_t i = 0; i < m; ++i) p[i] += gv;
        }
    });
}

template <typename T>
Var<T> global_max_pool(Var<T> x) {
    const Tensor<T>& xv = x.value();
    Tensor<T> out(xv.c(), 1, 1);
    std::vector<int> arg;
    kernels::global_max_pool(out, arg, xv);
    Tape<T>* t = x.tape;
    if (!detail::record<T>({x})) return t->make(std::move(out), false, nullptr);
    Var<T> y = t->make(std::move(out), true, nullptr);
    int xi = x.idx, yi = y.idx;
    return retarget(y, [t, xi, yi, arg = std::move(arg)] {
        const Tensor<T>& g = t->grad(yi);
        Tensor<T>& gx = t->grad(xi);
        const std::size_t m = static_cast<std::size_t>(gx.h()) * gx.w();
        for (int c = 0; c < gx.c(); ++c) gx[static_cast<std::size_t>(c) * m + arg[c]] += g[c];
    });
}

template <typename T>
Var<T> channel_avg_pool(Var<T> x) {
    const Tensor<T>& xv = x.value();
    Tensor<T> out(1, xv.h(), xv.w());
    kernels::channel_avg_pool(out, xv);
    Tape<T>* t = x.tape;
    if (!detail::record<T>({x})) return t->make(std::move(out), false, nullptr);
    Var<T> y = t->make(std::move(out), true, nullptr);
    int xi = x.idx, yi = y.idx;
    return retarget(y, [t, xi, yi] {
        const Tensor<T>& g = t->grad(yi);
        Tensor<T>& gx = t->grad(xi);
        const std::size_t m = static_cast<std::size_t>(gx.h()) * gx.w();
        const T inv = T(1) / static_cast<T>(gx.c());
        for (int c = 0; c < gx.c(); ++c) {
            T* p = gx.data() + static_cast<std::size_t>(c) * m;
            for (std::size_t i = 0; i < m; ++i) p[i] += g[i] * inv;
        }
    });
}

template <typename T>
Var<T> channel_max_pool(Var<T> x) {
    const Tensor<T>& xv = x.value();
    Tensor<T> out(1, xv.h(), xv.w());
    std::vector<int> arg;
    kernels::channel_max_pool(out, arg, xv);
    Tape<T>* t = x.tape;
    if (!detail::record<T>({x})) return t->make(std::move(out), false, nullptr);
    Var<T> y = t->make(std::move(out), true, nullptr);
    int xi = x.idx, yi = y.idx;
    return retarget(y, [t, xi, yi, arg = std::move(arg)] {
        const Tensor<T>& g = t->grad(yi);
        Tensor<T>& gx = t->grad(xi);
        const std::size_t m = static_cast<std::size_t>(gx.h()) * gx.w();
        for (std::size_t i = 0; i < m; ++i)
            gx[static_cast<std::size_t>(arg[i]) * m + i] += g[i];
    });
}

template <typename T>
Var<T> upsample2x(Var<T> x) {
    const Tensor<T>& xv = x.value();
    Tensor<T> out(xv.c(), 2 * xv.h(), 2 * xv.w());
    kernels::upsample2x_forward(out, xv);
    Tape<T>* t = x.tape;
    if (!detail::record<T>({x})) return t->make(std::move(out), false, nullptr);
    Var<T> y = t->make(std::move(out), true, nullptr);
    int xi = x.idx, yi = y.idx;
    return retarget(y, [t, xi, yi] { kernels::upsample2x_backward(t->grad(xi), t->grad(yi)); });
}

// --- concatenation and broadcast products -------------------------------------

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& xs) {
    if (xs.empty()) throw DimensionError("concat_channels: no inputs");
    const int hN = xs[0].value().h(), wN = xs[0].value().w();
    int ctot = 0;
    bool needs = false;
    for (const auto& v : xs) {
        if (v.value().h() != hN || v.value().w() != wN)
            throw DimensionError("concat_channels: spatial mismatch");
        ctot += v.value().c();
        needs = needs || v.needs_grad();
    }
    Tensor<T> out(ctot, hN, wN);
    const std::size_t m = static_cast<std::size_t>(hN) * wN;
    std::size_t off = 0;
    for (const auto& v : xs) {
        const Tensor<T>& xv = v.value();
        std::copy(xv.data(), xv.data() + xv.size(), out.data() + off * m);
        off += xv.c();
    }
    Tape<T>* t = xs[0].tape;
    if (!(needs && t->recording())) return t->make(std::move(out), false, nullptr);
    Var<T> y = t->make(std::move(out), true, nullptr);
    std::vector<int> parents;
    for (const auto& v : xs) parents.push_back(v.idx);
    int yi = y.idx;
    return retarget(y, [t, parents = std::move(parents), yi, m] {
        const Tensor<T>& g = t->grad(yi);
        std::size_t off = 0;
        for (int pi : parents) {
            Tensor<T>& gp = t->grad(pi);
            const T* src = g.data() + off * m;
            for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += src[i];
            off += gp.c();
        }
    });
}

template <typename T>
Var<T> concat_channels(Var<T> a, Var<T> b) {
    return concat_channels<T>(std::vector<Var<T>>{a, b});
}

/// (c,h,w) * (c,1,1), channel weights broadcast over the plane.
template <typename T>
Var<T> mul_channel(Var<T> x, Var<T> s) {
    const Tensor<T>& xv = x.value();
    const Tensor<T>& sv = s.value();
    if (sv.c() != xv.c() || sv.h() != 1 || sv.w() != 1)
        throw DimensionError("mul_channel: weight shape " + sv.shape().str());
    Tensor<T> out = xv;
    const std::size_t m = static_cast<std::size_t>(xv.h()) * xv.w();
    for (int c = 0; c < xv.c(); ++c) {
        T* p = out.data() + static_cast<std::size_t>(c) * m;
        const T sc = sv[c];
        for (std::size_t i = 0; i < m; ++i) p[i] *= sc;
    }
    Tape<T>* t = x.tape;
    if (!detail::record<T>({x, s})) return t->make(std::move(out), false, nullptr);
    Var<T> y = t->make(std::move(out), true, nullptr);
    int xi = x.idx, si = s.idx, yi = y.idx;
    return retarget(y, [t, xi, si, yi, m] {
        const Tensor<T>& g = t->grad(yi);
        const Tensor<T>& xvv = t->value(xi);
        const Tensor<T>& svv = t->value(si);
        Tensor<T>& gx = t->grad(xi);
        Tensor<T>& gs = t->grad(si);
        for (int c = 0; c < xvv.c(); ++c) {
            const std::size_t base = static_cast<std::size_t>(c) * m;
            T acc = 0;
            for (std::size_t i = 0; i < m; ++i) {
                gx[base + i] += g[base + i] * svv[c];
                acc += g[base + i] * xvv[base + i];
            }
            gs[c] += acc;
        }
    });
}

/// (c,h,w) * (1,h,w), one spatial map broadcast across channels.
template <typename T>
Var<T> mul_spatial(Var<T> x, Var<T> m) {
    const Tensor<T>& xv = x.value();
    const Tensor<T>& mv = m.value();
    if (mv.c() != 1 || mv.h() != xv.h() || mv.w() != xv.w())
        throw DimensionError("mul_spatial: map shape " + mv.shape().str());
    Tensor<T> out = xv;
    const std::size_t sz = static_cast<std::size_t>(xv.h()) * xv.w();
    for (int c = 0; c < xv.c(); ++c) {
        T* p = out.data() + static_cast<std::size_t>(c) * sz;
        for (std::size_t i = 0; i < sz; ++i) p[i] *= mv[i];
    }
    Tape<T>* t = x.tape;
    if (!detail::record<T>({x, m})) return t->make(std::move(out), false, nullptr);
    Var<T> y = t->make(std::move(out), true, nullptr);
    int xi = x.idx, mi = m.idx, yi = y.idx;
    return retarget(y, [t, xi, mi, yi, sz] {
        const Tensor<T>& g = t->grad(yi);
        const Tensor<T>& xvv = t->value(xi);
        const Tensor<T>& mvv = t->value(mi);
        Tensor<T>& gx = t->grad(xi);
        Tensor<T>& gm = t->grad(mi);
        for (int c = 0; c < xvv.c(); ++c) {
            const std::size_t base = static_cast<std::size_t>(c) * sz;
            for (std::size_t i = 0; i < sz; ++i) {
                gx[base + i] += g[base + i] * mvv[i];
                gm[i] += g[base + i] * xvv[base + i];
            }
        }
    });
}

// --- image gradient operators --------------------------------------------------

/// Forward differences, zero at the trailing border: (1,h,w) -> (2,h,w)
/// with plane 0 = d/dx (columns) and plane 1 = d/dy (rows).
template <typename T>
Var<T> image_gradient(Var<T> x) {
    const Tensor<T>& xv = x.value();
    if (xv.c() != 1) throw DimensionError("image_gradient: expects single channel");
    const int hN = xv.h(), wN = xv.w();
    Tensor<T> out(2, hN, wN);
    for (int i = 0; i < hN; ++i)
        for (int j = 0; j < wN; ++j) {
            out.at(0, i, j) = (j + 1 < wN) ? xv.at(0, i, j + 1) - xv.at(0, i, j) : T(0);
            out.at(1, i, j) = (i + 1 < hN) ? xv.at(0, i + 1, j) - xv.at(0, i, j) : T(0);
        }
    Tape<T>* t = x.tape;
    if (!detail::record<T>({x})) return t->make(std::move(out), false, nullptr);
    Var<T> y = t->make(std::move(out), true, nullptr);
    int xi = x.idx, yi = y.idx;
    return retarget(y, [t, xi, yi, hN, wN] {
        const Tensor<T>& g = t->grad(yi);
        Tensor<T>& gx = t->grad(xi);
        for (int i = 0; i < hN; ++i)
            for (int j = 0; j < wN; ++j) {
                if (j + 1 < wN) {
                    gx.at(0, i, j + 1) += g.at(0, i, j);
                    gx.at(0, i, j) -= g.at(0, i, j);
                }
                if (i + 1 < hN) {
                    gx.at(0, i + 1, j) += g.at(1, i, j);
                    gx.at(0, i, j) -= g.at(1, i, j);
                }
            }
    });
}

/// 3x3 Sobel alternative for the gradient operator (zero padding, same size).
template <typename T>
Var<T> sobel_gradient(Var<T> x) {
    static const T kx[9] = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
    static const T ky[9] = {-1, -2, -1, 0, 0, 0, 1, 2, 1};
    Tensor<T> w(Shape{2, 1, 3, 3});
    for (int i = 0; i < 9; ++i) {
        w[i] = kx[i];
        w[9 + i] = ky[i];
    }
    const Tensor<T>& xv = x.value();
    Tensor<T> out(2, xv.h(), xv.w());
    kernels::conv2d_forward(out, xv, w, static_cast<const T*>(nullptr), 1, 1);
    Tape<T>* t = x.tape;
    if (!detail::record<T>({x})) return t->make(std::move(out), false, nullptr);
    Var<T> y = t->make(std::move(out), true, nullptr);
    int xi = x.idx, yi = y.idx;
    return retarget(y, [t, xi, yi, w = std::move(w)] {
        kernels::conv2d_backward_input(t->grad(xi), t->grad(yi), w, 1, 1);
    });
}

}  // namespace icafusion

#endif
