#ifndef ICAFUSION_GENERATOR_HPP
#define ICAFUSION_GENERATOR_HPP

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "icafusion/attention.hpp"
#include "icafusion/autodiff.hpp"

namespace icafusion {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Ablation variants. Apart from `full`, each one switches attention stages
/// off; all variants accept the same inputs and produce same-shaped outputs.
enum class Variant {
    full,
    no_attention,
    only_interact,
    only_vis_com,
    only_ir_com,
    only_channel,
    only_spatial,
};

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::full: return "full";
        case Variant::no_attention: return "no_attention";
        case Variant::only_interact: return "only_interact";
        case Variant::only_vis_com: return "only_vis_com";
        case Variant::only_ir_com: return "only_ir_com";
        case Variant::only_channel: return "only_channel";
        case Variant::only_spatial: return "only_spatial";
    }
    return "?";
}

/// Row label used in the ablation table.
inline const char* variant_label(Variant v) {
    switch (v) {
        case Variant::full: return "Ours";
        case Variant::no_attention: return "No_Attention";
        case Variant::only_interact: return "Only_interact";
        case Variant::only_vis_com: return "Only_VIS_Com";
        case Variant::only_ir_com: return "Only_IR_Com";
        case Variant::only_channel: return "Only_Channel";
        case Variant::only_spatial: return "Only_Spatial";
    }
    return "?";
}

inline Variant variant_from_string(const std::string& s) {
    for (Variant v : {Variant::full, Variant::no_attention, Variant::only_interact,
                      Variant::only_vis_com, Variant::only_ir_com, Variant::only_channel,
                      Variant::only_spatial})
        if (s == variant_name(v)) return v;
    throw ConfigError("unknown variant '" + s + "'");
}

inline const std::array<Variant, 7>& all_variants() {
    static const std::array<Variant, 7> v = {
        Variant::no_attention, Variant::only_interact, Variant::only_vis_com,
        Variant::only_ir_com,  Variant::only_channel,  Variant::only_spatial,
        Variant::full};
    return v;
}

/// Architecture of the fusion generator: a three-stream four-level encoder
/// (infrared, visible, and their concatenation), per-level feature
/// interaction, an attention-compensated fusion layer, and a four-layer
/// decoder with two 2x upsampling stages. 3x3 convolutions with PReLU
/// throughout; the final layer maps to one channel through Tanh.
struct GeneratorSpec {
    std::array<int, 4> encoder_widths{16, 32, 64, 128};
    std::array<int, 4> encoder_strides{1, 1, 2, 2};
    std::array<int, 4> decoder_widths{128, 64, 32, 16};
    int kernel = 3;
    int reduction_ratio = 4;
    Variant variant = Variant::full;
    bool cross_spatial_operand = false;

    bool interactive_enabled() const { return variant != Variant::no_attention; }
    bool comp_ir_enabled() const {
        return variant != Variant::no_attention && variant != Variant::only_interact &&
               variant != Variant::only_vis_com;
    }
    bool comp_vis_enabled() const {
        return variant != Variant::no_attention && variant != Variant::only_interact &&
               variant != Variant::only_ir_com;
    }
    AttentionOptions attention_options() const {
        AttentionOptions o;
        o.channel = variant != Variant::only_spatial;
        o.spatial = variant != Variant::only_channel;
        o.cross_spatial_operand = cross_spatial_operand;
        return o;
    }

    void validate() const {
        for (int wdt : encoder_widths)
            if (wdt < 1) throw ConfigError("encoder widths must be positive");
        for (int wdt : decoder_widths)
            if (wdt < 1) throw ConfigError("decoder widths must be positive");
        if (encoder_strides != std::array<int, 4>{1, 1, 2, 2})
            throw ConfigError("encoder strides are fixed at 1,1,2,2");
        if (kernel != 3) throw ConfigError("encoder/decoder kernel is fixed at 3");
        if (reduction_ratio < 1) throw ConfigError("reduction ratio must be positive");
    }
};

/// Returns `base` retargeted to the named ablation variant.
inline GeneratorSpec build_variant(Variant name, GeneratorSpec base) {
    base.variant = name;
    return base;
}

/// Per-level features of the three encoder streams plus the interaction
/// outputs of levels 1..3. Levels 1-2 run at full resolution, level 3 at
/// half, level 4 at quarter.
template <typename T>
struct EncoderState {
    std::array<Var<T>, 4> f_ir;
    std::array<Var<T>, 4> f_vis;
    std::array<Var<T>, 4> f_cat;
    std::array<Var<T>, 3> interacted;
};

template <typename T>
class Generator {
public:
    explicit Generator(GeneratorSpec spec, Rng& rng) : spec_(spec) {
        spec_.validate();
        const auto& ew = spec_.encoder_widths;
        auto conv = [&](const std::string& name, int out_c, int in_c) {
            Layer l;
            l.w = store_.add(name + "_w", Shape{out_c, in_c, spec_.kernel, spec_.kernel});
            init_conv_weight(store_[l.w].value, in_c * spec_.kernel * spec_.kernel, rng);
            l.b = store_.add(name + "_b", Shape{out_c, 1, 1, 1});
            return l;
        };
        auto slope = [&](const std::string& name) {
            int slot = store_.add(name, Shape{1, 1, 1, 1});
            store_[slot].value[0] = T(0.25);
            return slot;
        };

        // Encoder streams. The concatenating stream consumes the previous
        // level's interaction output (4x that level's width); the modality
        // streams consume their own previous outputs.
        const std::array<int, 4> in_ir = {1, ew[0], ew[1], ew[2]};
        const std::array<int, 4> in_cat = {2, 4 * ew[0], 4 * ew[1], 4 * ew[2]};
        for (int l = 0; l < 4; ++l) {
            enc_ir_[l] = conv("generator/enc_ir/l" + std::to_string(l), ew[l], in_ir[l]);
            enc_ir_[l].slope = slope("generator/enc_ir/l" + std::to_string(l) + "_slope");
            enc_vis_[l] = conv("generator/enc_vis/l" + std::to_string(l), ew[l], in_ir[l]);
            enc_vis_[l].slope = slope("generator/enc_vis/l" + std::to_string(l) + "_slope");
            enc_cat_[l] = conv("generator/enc_cat/l" + std::to_string(l), ew[l], in_cat[l]);
            enc_cat_[l].slope = slope("generator/enc_cat/l" + std::to_string(l) + "_slope");
        }

        const AttentionOptions opt = spec_.attention_options();
        if (spec_.interactive_enabled()) {
            for (int l = 0; l < 3; ++l) {
                inter_m_[l] = register_attention_params(
                    store_, "generator/inter/l" + std::to_string(l) + "/m", 2 * ew[l],
                    spec_.reduction_ratio, rng, opt.channel, opt.spatial);
                inter_n_[l] = register_attention_params(
                    store_, "generator/inter/l" + std::to_string(l) + "/n", 2 * ew[l],
                    spec_.reduction_ratio, rng, opt.channel, opt.spatial);
            }
        }
        // Compensation at the fusion layer (level 4) and the two decoder
        // skips (levels 3 and 2); one parameter set per site, unshared.
        for (int k = 0; k < 3; ++k) {
            const int level = 3 - k;  // 3, 2, 1 (0-based encoder index)
            if (spec_.comp_ir_enabled())
                comp_ir_[k] = register_attention_params(
                    store_, "generator/comp_ir/l" + std::to_string(level), ew[level],
                    spec_.reduction_ratio, rng, opt.channel, opt.spatial);
            if (spec_.comp_vis_enabled())
                comp_vis_[k] = register_attention_params(
                    store_, "generator/comp_vis/l" + std::to_string(level), ew[level],
                    spec_.reduction_ratio, rng, opt.channel, opt.spatial);
        }

        const auto& dw = spec_.decoder_widths;
        dec_[0] = conv("generator/dec/d0", dw[0], 3 * ew[3]);
        dec_[0].slope = slope("generator/dec/d0_slope");
        dec_[1] = conv("generator/dec/d1", dw[1], dw[0] + 2 * ew[2]);
        dec_[1].slope = slope("generator/dec/d1_slope");
        dec_[2] = conv("generator/dec/d2", dw[2], dw[1] + 2 * ew[1]);
        dec_[2].slope = slope("generator/dec/d2_slope");
        dec_[3] = conv("generator/dec/d3", 1, dw[2]);  // Tanh output layer
    }

    const GeneratorSpec& spec() const { return spec_; }
    ParamStore<T>& params() { return store_; }
    const ParamStore<T>& params() const { return store_; }

    /// Runs the three encoder streams with per-level interaction.
    EncoderState<T> encode(Tape<T>& t, Var<T> ir, Var<T> vis) const {
        check_input(ir.value());
        check_same_shape(ir.value(), vis.value(), "encode");
        auto& s = store();
        EncoderState<T> st;
        const AttentionOptions opt = spec_.attention_options();

        Var<T> cur_ir = ir, cur_vis = vis, cur_cat = concat_channels(ir, vis);
        for (int l = 0; l < 4; ++l) {
            const int stride = spec_.encoder_strides[l];
            const int pad = spec_.kernel / 2;
            st.f_ir[l] = prelu(conv2d(cur_ir, t.param(s, enc_ir_[l].w), t.param(s, enc_ir_[l].b),
                                      stride, pad),
                               t.param(s, enc_ir_[l].slope));
            st.f_vis[l] = prelu(conv2d(cur_vis, t.param(s, enc_vis_[l].w),
                                       t.param(s, enc_vis_[l].b), stride, pad),
                                t.param(s, enc_vis_[l].slope));
            st.f_cat[l] = prelu(conv2d(cur_cat, t.param(s, enc_cat_[l].w),
                                       t.param(s, enc_cat_[l].b), stride, pad),
                                t.param(s, enc_cat_[l].slope));
            if (l < 3) {
                Var<T> phi_m = concat_channels(st.f_ir[l], st.f_cat[l]);
                Var<T> phi_n = concat_channels(st.f_vis[l], st.f_cat[l]);
                st.interacted[l] =
                    spec_.interactive_enabled()
                        ? interactive_attention(phi_m, phi_n, inter_m_[l], inter_n_[l], s, opt)
                        : concat_channels(phi_m, phi_n);
                cur_cat = st.interacted[l];
            }
            cur_ir = st.f_ir[l];
            cur_vis = st.f_vis[l];
        }
        return st;
    }

    /// Concatenates the level-4 concatenating-stream features with the
    /// compensated level-4 modality features (3x width, quarter resolution).
    Var<T> fuse_layer(Tape<T>&, const EncoderState<T>& st) const {
        return concat_channels<T>({st.f_cat[3], compensate(st.f_ir[3], comp_ir_[0], true),
                                   compensate(st.f_vis[3], comp_vis_[0], false)});
    }

    /// Decoder: conv+PReLU+2x upsample twice (with compensated skips from
    /// levels 3 and 2 concatenated after each upsample), then two plain
    /// convs; the last maps to one channel through Tanh.
    Var<T> decode(Tape<T>& t, Var<T> fused, const EncoderState<T>& st) const {
        auto& s = store();
        const int pad = spec_.kernel / 2;
        Var<T> x = prelu(conv2d(fused, t.param(s, dec_[0].w), t.param(s, dec_[0].b), 1, pad),
                         t.param(s, dec_[0].slope));
        x = upsample2x(x);
        x = concat_channels<T>({x, compensate(st.f_ir[2], comp_ir_[1], true),
                                compensate(st.f_vis[2], comp_vis_[1], false)});
        x = prelu(conv2d(x, t.param(s, dec_[1].w), t.param(s, dec_[1].b), 1, pad),
                  t.param(s, dec_[1].slope));
        x = upsample2x(x);
        x = concat_channels<T>({x, compensate(st.f_ir[1], comp_ir_[2], true),
                                compensate(st.f_vis[1], comp_vis_[2], false)});
        x = prelu(conv2d(x, t.param(s, dec_[2].w), t.param(s, dec_[2].b), 1, pad),
                  t.param(s, dec_[2].slope));
        return tanh_act(conv2d(x, t.param(s, dec_[3].w), t.param(s, dec_[3].b), 1, pad));
    }

    Var<T> forward(Tape<T>& t, Var<T> ir, Var<T> vis) const {
        EncoderState<T> st = encode(t, ir, vis);
        return decode(t, fuse_layer(t, st), st);
    }

    /// Value-only fusion. Inputs with H or W not divisible by 4 are
    /// reflect-padded up and the output cropped back.
    Tensor<T> infer(const Tensor<T>& ir, const Tensor<T>& vis) const {
        check_same_shape(ir, vis, "infer");
        const int h = ir.h(), w = ir.w();
        const int ph = (4 - h % 4) % 4, pw = (4 - w % 4) % 4;
        Tape<T> t(false);
        if (ph == 0 && pw == 0)
            return forward(t, t.input(ir), t.input(vis)).value();
        Tensor<T> out = forward(t, t.input(reflect_pad(ir, ph, pw)),
                                t.input(reflect_pad(vis, ph, pw)))
                            .value();
        Tensor<T> crop(1, h, w);
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) crop.at(0, i, j) = out.at(0, i, j);
        return crop;
    }

private:
    struct Layer {
        int w = -1, b = -1, slope = -1;
    };

    ParamStore<T>& store() const { return const_cast<ParamStore<T>&>(store_); }

    void check_input(const Tensor<T>& x) const {
        if (x.c() != 1) throw DimensionError("generator input must be single-channel");
        if (x.h() % 4 != 0 || x.w() % 4 != 0)
            throw DimensionError("generator input dimensions must be divisible by 4, got " +
                                 x.shape().str() + " (use infer() for padded fusion)");
    }

    Var<T> compensate(Var<T> f, const AttentionParams& p, bool is_ir) const {
        const bool enabled = is_ir ? spec_.comp_ir_enabled() : spec_.comp_vis_enabled();
        if (!enabled) return f;  // identity branch
        return compensatory_attention(f, p, store(), spec_.attention_options());
    }

    static Tensor<T> reflect_pad(const Tensor<T>& x, int ph, int pw) {
        Tensor<T> out(x.c(), x.h() + ph, x.w() + pw);
        for (int c = 0; c < x.c(); ++c)
            for (int i = 0; i < out.h(); ++i)
                for (int j = 0; j < out.w(); ++j) {
                    const int si = i < x.h() ? i : 2 * x.h() - 2 - i;
                    const int sj = j < x.w() ? j : 2 * x.w() - 2 - j;
                    out.at(c, i, j) = x.at(c, si, sj);
                }
        return out;
    }

    GeneratorSpec spec_;
    ParamStore<T> store_;
    std::array<Layer, 4> enc_ir_, enc_vis_, enc_cat_, dec_;
    std::array<AttentionParams, 3> inter_m_, inter_n_;
    std::array<AttentionParams, 3> comp_ir_, comp_vis_;
};

}  // namespace icafusion

#endif
