#ifndef ICAFUSION_DISCRIMINATOR_HPP
#define ICAFUSION_DISCRIMINATOR_HPP

#include <array>
#include <cmath>
#include <string>

#include "icafusion/kernels.hpp"
#include "icafusion/params.hpp"

namespace icafusion {

/// Wasserstein critic: four stride-2 3x3 convolutions with LeakyReLU and a
/// fully connected head producing one unbounded score. No normalization
/// layers — the gradient penalty needs per-sample input gradients. The
/// fully connected layer is sized at construction for a fixed input size.
struct CriticSpec {
    std::array<int, 4> widths{16, 32, 64, 128};
    int kernel = 3;
    int stride = 2;
    double lrelu_slope = 0.2;
    int input_h = 128;
    int input_w = 128;

    /// Spatial size after the four stride-2 convolutions.
    std::array<int, 2> conv_output_hw() const {
        int h = input_h, w = input_w;
        for (int l = 0; l < 4; ++l) {
            h = kernels::conv_out_dim(h, kernel, stride, kernel / 2);
            w = kernels::conv_out_dim(w, kernel, stride, kernel / 2);
        }
        return {h, w};
    }
};

// The critic is not built on the autodiff tape: the gradient penalty needs
// the derivative of the critic's *input gradient* with respect to its
// parameters. Because the critic is piecewise linear (conv / LeakyReLU /
// linear head), that second-order term reduces to one extra tangent pass
// with the activation masks frozen, so the three passes below stay explicit.
template <typename T>
class Critic {
public:
    Critic(CriticSpec spec, Rng& rng, const std::string& prefix = "critic") : spec_(spec) {
        int in_c = 1, h = spec.input_h, w = spec.input_w;
        for (int l = 0; l < 4; ++l) {
            const int out_c = spec.widths[l];
            conv_w_[l] = store_.add(prefix + "/conv" + std::to_string(l) + "_w",
                                    Shape{out_c, in_c, spec.kernel, spec.kernel});
            init_conv_weight(store_[conv_w_[l]].value, in_c * spec.kernel * spec.kernel, rng);
            conv_b_[l] = store_.add(prefix + "/conv" + std::to_string(l) + "_b",
                                    Shape{out_c, 1, 1, 1});
            in_c = out_c;
            h = kernels::conv_out_dim(h, spec.kernel, spec.stride, spec.kernel / 2);
            w = kernels::conv_out_dim(w, spec.kernel, spec.stride, spec.kernel / 2);
        }
        head_shape_ = Shape{1, in_c, h, w};
        fc_w_ = store_.add(prefix + "/fc_w", head_shape_);
        init_conv_weight(store_[fc_w_].value, static_cast<int>(head_shape_.size()), rng);
        fc_b_ = store_.add(prefix + "/fc_b", Shape{1, 1, 1, 1});
    }

    const CriticSpec& spec() const { return spec_; }
    ParamStore<T>& params() { return store_; }
    const ParamStore<T>& params() const { return store_; }

    struct Trace {
        std::array<Tensor<T>, 4> pre;  // pre-activation conv outputs
        std::array<Tensor<T>, 5> act;  // act[0] = input, act[l] after LeakyReLU
        T score = 0;
    };

    Trace forward(const Tensor<T>& x) const {
        if (x.c() != 1 || x.h() != spec_.input_h || x.w() != spec_.input_w)
            throw DimensionError("critic built for 1x" + std::to_string(spec_.input_h) + "x" +
                                 std::to_string(spec_.input_w) + " inputs, got " +
                                 x.shape().str());
        Trace tr;
        tr.act[0] = x;
        const T slope = static_cast<T>(spec_.lrelu_slope);
        for (int l = 0; l < 4; ++l) {
            const Tensor<T>& w = store_[conv_w_[l]].value;
            const Tensor<T>& in = tr.act[l];
            Tensor<T> z(w.n(), kernels::conv_out_dim(in.h(), spec_.kernel, spec_.stride, pad()),
                        kernels::conv_out_dim(in.w(), spec_.kernel, spec_.stride, pad()));
            kernels::conv2d_forward(z, in, w, store_[conv_b_[l]].value.data(), spec_.stride,
                                    pad());
            tr.act[l + 1] = z;
            for (auto& v : tr.act[l + 1]) v = kernels::leaky_relu(v, slope);
            tr.pre[l] = std::move(z);
        }
        const Tensor<T>& fw = store_[fc_w_].value;
        T s = store_[fc_b_].value[0];
        for (std::size_t i = 0; i < fw.size(); ++i) s += fw[i] * tr.act[4][i];
        tr.score = s;
        return tr;
    }

    T score(const Tensor<T>& x) const { return forward(x).score; }

    /// d(score)/d(input) at the traced point.
    Tensor<T> input_gradient(const Trace& tr) const {
        Tensor<T> delta = store_[fc_w_].value;  // (1, c4, h4, w4) == head gradient
        return backprop_convs(tr, delta, nullptr);
    }

    /// Accumulates upstream * d(score)/d(params) into the store gradients.
    void accumulate_score_grads(const Trace& tr, T upstream) {
        Tensor<T>& gfw = store_[fc_w_].grad;
        for (std::size_t i = 0; i < gfw.size(); ++i) gfw[i] += upstream * tr.act[4][i];
        store_[fc_b_].grad[0] += upstream;
        Tensor<T> delta = store_[fc_w_].value;
        for (auto& v : delta) v *= upstream;
        ParamGrads pg{this};
        backprop_convs(tr, delta, &pg);
    }

    /// Accumulates upstream * d/d(params) of (1 - |input_grad|_2)^2, where
    /// input_grad is d(score)/d(input) at the traced point. One tangent pass
    /// through the conv stack with the LeakyReLU masks frozen (exact a.e.
    /// for this piecewise-linear critic); biases receive no contribution.
    void accumulate_penalty_grads(const Trace& tr, const Tensor<T>& input_grad, T upstream) {
        T nsq = 0;
        for (const T& v : input_grad) nsq += v * v;
        const T norm = std::sqrt(nsq);
        if (!(norm > T(0))) return;  // flat critic: zero subgradient
        const T coeff = upstream * (T(-2) * (T(1) - norm) / norm);
        const T slope = static_cast<T>(spec_.lrelu_slope);

        // Tangent (directional-derivative) activations along input_grad.
        std::array<Tensor<T>, 5> ta;
        ta[0] = input_grad;
        for (int l = 0; l < 4; ++l) {
            const Tensor<T>& w = store_[conv_w_[l]].value;
            Tensor<T> tz(tr.pre[l].shape());
            kernels::conv2d_forward(tz, ta[l], w, static_cast<const T*>(nullptr), spec_.stride,
                                    pad());
            for (std::size_t i = 0; i < tz.size(); ++i)
                tz[i] *= kernels::leaky_relu_grad(tr.pre[l][i], slope);
            ta[l + 1] = std::move(tz);
        }

        Tensor<T>& gfw = store_[fc_w_].grad;
        for (std::size_t i = 0; i < gfw.size(); ++i) gfw[i] += coeff * ta[4][i];

        Tensor<T> eps = store_[fc_w_].value;
        for (auto& v : eps) v *= coeff;
        for (int l = 3; l >= 0; --l) {
            for (std::size_t i = 0; i < eps.size(); ++i)
                eps[i] *= kernels::leaky_relu_grad(tr.pre[l][i], slope);
            kernels::conv2d_backward_params(store_[conv_w_[l]].grad, static_cast<T*>(nullptr),
                                            ta[l], eps, spec_.stride, pad());
            if (l > 0) {
                Tensor<T> prev(ta[l].shape());
                kernels::conv2d_backward_input(prev, eps, store_[conv_w_[l]].value,
                                               spec_.stride, pad());
                eps = std::move(prev);
            }
        }
    }

private:
    struct ParamGrads {
        Critic* c;
    };

    int pad() const { return spec_.kernel / 2; }

    /// Backpropagates `delta` (gradient at the last activation) down the
    /// conv stack; accumulates conv parameter gradients when pg is set.
    /// Returns the gradient at the input.
    Tensor<T> backprop_convs(const Trace& tr, Tensor<T> delta, ParamGrads* pg) const {
        const T slope = static_cast<T>(spec_.lrelu_slope);
        for (int l = 3; l >= 0; --l) {
            for (std::size_t i = 0; i < delta.size(); ++i)
                delta[i] *= kernels::leaky_relu_grad(tr.pre[l][i], slope);
            if (pg)
                kernels::conv2d_backward_params(pg->c->store_[conv_w_[l]].grad,
                                                pg->c->store_[conv_b_[l]].grad.data(),
                                                tr.act[l], delta, spec_.stride, pad());
            Tensor<T> prev(tr.act[l].shape());
            kernels::conv2d_backward_input(prev, delta, store_[conv_w_[l]].value, spec_.stride,
                                           pad());
            delta = std::move(prev);
        }
        return delta;
    }

    CriticSpec spec_;
    ParamStore<T> store_;
    std::array<int, 4> conv_w_{}, conv_b_{};
    int fc_w_ = -1, fc_b_ = -1;
    Shape head_shape_;
};

}  // namespace icafusion

#endif
