#ifndef ICAFUSION_ATTENTION_HPP
#define ICAFUSION_ATTENTION_HPP

#include <string>
#include <utility>

#include "icafusion/autodiff.hpp"
#include "icafusion/params.hpp"

// Interactive and compensatory attention. Both cascade a channel gate and a
// spatial gate; the interactive form takes two feature paths and couples
// their gate scores through an elementwise two-way softmax so the paths
// receive complementary weights, the compensatory form gates a single path
// with the raw sigmoid scores.

namespace icafusion {

/// Parameter slots for one attention module over C-channel features.
///
/// Channel gate: global average and max descriptors each pass through their
/// own bottleneck (1x1 conv C -> C/r, PReLU, 1x1 conv C/r -> C); the two
/// results are concatenated and merged by a 1x1 conv back to C scores.
/// Spatial gate: channel-mean and channel-max maps stacked to 2 planes and
/// merged by a single 7x7 conv to one score plane.
struct AttentionParams {
    int channels = 0;
    int reduced = 0;
    int reduction_ratio = 4;

    int avg_w1 = -1, avg_b1 = -1, avg_slope = -1, avg_w2 = -1, avg_b2 = -1;
    int max_w1 = -1, max_b1 = -1, max_slope = -1, max_w2 = -1, max_b2 = -1;
    int merge_w = -1, merge_b = -1;
    int spatial_w = -1, spatial_b = -1;

    bool has_channel_gate() const { return merge_w >= 0; }
    bool has_spatial_gate() const { return spatial_w >= 0; }
};

/// Per-module stage switches (driven by the generator variant).
struct AttentionOptions {
    bool channel = true;
    bool spatial = true;
    /// When set, the second path's spatial weighting multiplies the first
    /// path's channel-gated features instead of its own (a published variant
    /// of the pairing kept selectable for fidelity experiments).
    bool cross_spatial_operand = false;
};

inline constexpr int kSpatialKernel = 7;  // 7x7, padding 3

template <typename T>
AttentionParams register_attention_params(ParamStore<T>& store, const std::string& prefix,
                                          int channels, int reduction_ratio, Rng& rng,
                                          bool channel_gate = true, bool spatial_gate = true) {
    AttentionParams p;
    p.channels = channels;
    p.reduction_ratio = reduction_ratio;
    p.reduced = std::max(1, channels / reduction_ratio);

    auto conv1x1 = [&](const std::string& name, int out_c, int in_c) {
        int slot = store.add(prefix + name, Shape{out_c, in_c, 1, 1});
        init_conv_weight(store[slot].value, in_c, rng);
        return slot;
    };
    auto bias = [&](const std::string& name, int out_c) {
        return store.add(prefix + name, Shape{out_c, 1, 1, 1});
    };
    auto slope = [&](const std::string& name) {
        int slot = store.add(prefix + name, Shape{1, 1, 1, 1});
        store[slot].value[0] = T(0.25);
        return slot;
    };

    if (channel_gate) {
        p.avg_w1 = conv1x1("/ca_avg_w1", p.reduced, channels);
        p.avg_b1 = bias("/ca_avg_b1", p.reduced);
        p.avg_slope = slope("/ca_avg_slope");
        p.avg_w2 = conv1x1("/ca_avg_w2", channels, p.reduced);
        p.avg_b2 = bias("/ca_avg_b2", channels);
        p.max_w1 = conv1x1("/ca_max_w1", p.reduced, channels);
        p.max_b1 = bias("/ca_max_b1", p.reduced);
        p.max_slope = slope("/ca_max_slope");
        p.max_w2 = conv1x1("/ca_max_w2", channels, p.reduced);
        p.max_b2 = bias("/ca_max_b2", channels);
        p.merge_w = conv1x1("/ca_merge_w", channels, 2 * channels);
        p.merge_b = bias("/ca_merge_b", channels);
    }
    if (spatial_gate) {
        p.spatial_w = store.add(prefix + "/sa_merge_w",
                                Shape{1, 2, kSpatialKernel, kSpatialKernel});
        init_conv_weight(store[p.spatial_w].value, 2 * kSpatialKernel * kSpatialKernel, rng);
        p.spatial_b = bias("/sa_merge_b", 1);
    }
    return p;
}

/// Channel gate scores in (0,1), one per channel: sigmoid of the merged
/// average- and max-pooled bottleneck outputs.
template <typename T>
Var<T> channel_gate(Var<T> f, const AttentionParams& p, ParamStore<T>& store) {
    if (f.value().c() != p.channels)
        throw DimensionError("channel_gate: params expect " + std::to_string(p.channels) +
                             " channels, feature has " + std::to_string(f.value().c()));
    Tape<T>& t = *f.tape;
    auto branch = [&](Var<T> pooled, int w1, int b1, int sl, int w2, int b2) {
        Var<T> h = conv2d(pooled, t.param(store, w1), t.param(store, b1), 1, 0);
        h = prelu(h, t.param(store, sl));
        return conv2d(h, t.param(store, w2), t.param(store, b2), 1, 0);
    };
    Var<T> avg = branch(global_avg_pool(f), p.avg_w1, p.avg_b1, p.avg_slope, p.avg_w2, p.avg_b2);
    Var<T> mx = branch(global_max_pool(f), p.max_w1, p.max_b1, p.max_slope, p.max_w2, p.max_b2);
    Var<T> merged = conv2d(concat_channels(avg, mx), t.param(store, p.merge_w),
                           t.param(store, p.merge_b), 1, 0);
    return sigmoid_act(merged);
}

/// Spatial gate scores in (0,1), one per pixel: sigmoid of the 7x7 merge of
/// the channel-mean and channel-max planes.
template <typename T>
Var<T> spatial_gate(Var<T> f, const AttentionParams& p, ParamStore<T>& store) {
    Tape<T>& t = *f.tape;
    Var<T> stacked = concat_channels(channel_avg_pool(f), channel_max_pool(f));
    Var<T> merged = conv2d(stacked, t.param(store, p.spatial_w), t.param(store, p.spatial_b),
                           1, kSpatialKernel / 2);
    return sigmoid_act(merged);
}

/// Elementwise two-way softmax: (exp a, exp b) / (exp a + exp b), computed in
/// the max-shifted form sigmoid(a-b), sigmoid(b-a). The pair sums to one.
template <typename T>
std::pair<Var<T>, Var<T>> dueling_softmax(Var<T> a, Var<T> b) {
    check_same_shape(a.value(), b.value(), "dueling_softmax");
    return {sigmoid_act(sub(a, b)), sigmoid_act(sub(b, a))};
}

/// Two-path interactive attention. Each path is channel-gated with the
/// softmax-coupled channel weights, then spatially gated with the
/// softmax-coupled spatial weights; the gated paths are concatenated, so the
/// output carries 2C channels.
template <typename T>
Var<T> interactive_attention(Var<T> fm, Var<T> fn, const AttentionParams& pm,
                             const AttentionParams& pn, ParamStore<T>& store,
                             const AttentionOptions& opt = {}) {
    check_same_shape(fm.value(), fn.value(), "interactive_attention");
    Var<T> m_ca = fm, n_ca = fn;
    if (opt.channel) {
        auto [bm, bn] = dueling_softmax(channel_gate(fm, pm, store), channel_gate(fn, pn, store));
        m_ca = mul_channel(fm, bm);
        n_ca = mul_channel(fn, bn);
    }
    Var<T> m_sa = m_ca, n_sa = n_ca;
    if (opt.spatial) {
        auto [bm, bn] = dueling_softmax(spatial_gate(m_ca, pm, store),
                                        spatial_gate(n_ca, pn, store));
        m_sa = mul_spatial(m_ca, bm);
        n_sa = mul_spatial(opt.cross_spatial_operand ? m_ca : n_ca, bn);
    }
    return concat_channels(m_sa, n_sa);
}

/// Single-path gating with the raw sigmoid scores (no softmax coupling);
/// shape-preserving.
template <typename T>
Var<T> compensatory_attention(Var<T> f, const AttentionParams& p, ParamStore<T>& store,
                              const AttentionOptions& opt = {}) {
    Var<T> x = f;
    if (opt.channel) x = mul_channel(x, channel_gate(x, p, store));
    if (opt.spatial) x = mul_spatial(x, spatial_gate(x, p, store));
    return x;
}

// Plain-tensor entry points (scratch tape, no recording) for callers that
// only need values.

template <typename T>
Tensor<T> channel_gate(const Tensor<T>& f, const AttentionParams& p, ParamStore<T>& store) {
    Tape<T> t(false);
    return channel_gate(t.input(f), p, store).value();
}

template <typename T>
Tensor<T> spatial_gate(const Tensor<T>& f, const AttentionParams& p, ParamStore<T>& store) {
    Tape<T> t(false);
    return spatial_gate(t.input(f), p, store).value();
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> dueling_softmax(const Tensor<T>& a, const Tensor<T>& b) {
    Tape<T> t(false);
    auto [x, y] = dueling_softmax(t.input(a), t.input(b));
    return {x.value(), y.value()};
}

template <typename T>
Tensor<T> interactive_attention(const Tensor<T>& fm, const Tensor<T>& fn,
                                const AttentionParams& pm, const AttentionParams& pn,
                                ParamStore<T>& store, const AttentionOptions& opt = {}) {
    Tape<T> t(false);
    return interactive_attention(t.input(fm), t.input(fn), pm, pn, store, opt).value();
}

template <typename T>
Tensor<T> compensatory_attention(const Tensor<T>& f, const AttentionParams& p,
                                 ParamStore<T>& store, const AttentionOptions& opt = {}) {
    Tape<T> t(false);
    return compensatory_attention(t.input(f), p, store, opt).value();
}

}  // namespace icafusion

#endif
