#ifndef ICAFUSION_LOSSES_HPP
#define ICAFUSION_LOSSES_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "icafusion/autodiff.hpp"
#include "icafusion/discriminator.hpp"
#include "icafusion/rng.hpp"

namespace icafusion {

enum class GradOp { forward_diff, sobel };

/// Where the penalty gradient is evaluated: at random convex combinations of
/// the real and fused samples (the standard choice), or literally at the
/// real samples.
enum class GpPoint { interpolate, real };

struct PenaltyConfig {
    double lambda = 10.0;
    GpPoint point = GpPoint::interpolate;
};

/// Per-step loss readout; all entries are batch means.
struct LossBreakdown {
    std::uint64_t step = 0;
    double l_g = 0, l_content = 0, l_adv = 0;
    double l_d_ir = 0, l_d_vis = 0;
    double gp_ir = 0, gp_vis = 0;

    bool finite() const {
        return std::isfinite(l_g) && std::isfinite(l_content) && std::isfinite(l_adv) &&
               std::isfinite(l_d_ir) && std::isfinite(l_d_vis) && std::isfinite(gp_ir) &&
               std::isfinite(gp_vis);
    }
};

inline constexpr const char* kLossCsvHeader =
    "step,l_g,l_content,l_adv,l_d_ir,l_d_vis,gp_ir,gp_vis";

template <typename T>
Var<T> apply_grad_op(Var<T> img, GradOp op) {
    return op == GradOp::forward_diff ? image_gradient(img) : sobel_gradient(img);
}

/// (1/HW) * ( |f - ir|_F^2 + w * |grad f - grad vis|_1 ), summed over both
/// gradient planes. Weights default to 1 on both terms.
template <typename T>
Var<T> content_loss(Var<T> f, Var<T> ir, Var<T> vis, GradOp op = GradOp::forward_diff,
                    T intensity_weight = T(1), T gradient_weight = T(1)) {
    check_same_shape(f.value(), ir.value(), "content_loss");
    check_same_shape(f.value(), vis.value(), "content_loss");
    const T inv_hw = T(1) / static_cast<T>(f.value().h() * f.value().w());
    Var<T> frob = sum_all(square(sub(f, ir)));
    Var<T> l1 = sum_all(abs_val(sub(apply_grad_op(f, op), apply_grad_op(vis, op))));
    return scale(add(scale(frob, intensity_weight), scale(l1, gradient_weight)), inv_hw);
}

template <typename T>
T content_loss_value(const Tensor<T>& f, const Tensor<T>& ir, const Tensor<T>& vis,
                     GradOp op = GradOp::forward_diff) {
    Tape<T> t(false);
    return content_loss(t.input(f), t.input(ir), t.input(vis), op).value()[0];
}

/// Plain-tensor forward differences (d/dx, d/dy), zero trailing border.
template <typename T>
Tensor<T> image_gradient(const Tensor<T>& img) {
    Tape<T> t(false);
    return image_gradient(t.input(img)).value();
}

/// -mean(critic-IR scores) - mean(critic-VIS scores) over the fused batch.
template <typename T>
T generator_adversarial_loss(const std::vector<T>& scores_ir, const std::vector<T>& scores_vis) {
    if (scores_ir.empty() || scores_ir.size() != scores_vis.size())
        throw std::domain_error("generator_adversarial_loss: empty or mismatched batches");
    T a = 0, b = 0;
    for (T v : scores_ir) a += v;
    for (T v : scores_vis) b += v;
    const T n = static_cast<T>(scores_ir.size());
    return -a / n - b / n;
}

/// mean_n (1 - |d critic / d input at x_n|_2)^2. Works with anything that
/// exposes input_gradient_at(); tests use linear stand-in critics.
template <typename T, typename CriticLike>
T gradient_penalty(const CriticLike& critic, const std::vector<Tensor<T>>& points) {
    if (points.empty()) throw std::domain_error("gradient_penalty: empty batch");
    T acc = 0;
    for (const Tensor<T>& x : points) {
        const Tensor<T> g = input_gradient_at(critic, x);
        T nsq = 0;
        for (const T& v : g) nsq += v * v;
        const T d = T(1) - std::sqrt(nsq);
        acc += d * d;
    }
    return acc / static_cast<T>(points.size());
}

template <typename T>
Tensor<T> input_gradient_at(const Critic<T>& c, const Tensor<T>& x) {
    return c.input_gradient(c.forward(x));
}

/// Selects the penalty evaluation points for one batch. `interpolate` draws
/// one epsilon per sample from `rng`.
template <typename T>
std::vector<Tensor<T>> penalty_points(const std::vector<Tensor<T>>& fused,
                                      const std::vector<Tensor<T>>& real,
                                      const PenaltyConfig& cfg, Rng& rng) {
    if (cfg.point == GpPoint::real) return real;
    std::vector<Tensor<T>> pts;
    pts.reserve(real.size());
    for (std::size_t i = 0; i < real.size(); ++i) {
        const T eps = static_cast<T>(rng.uniform());
        Tensor<T> x = real[i];
        for (std::size_t k = 0; k < x.size(); ++k)
            x[k] = eps * x[k] + (T(1) - eps) * fused[i][k];
        pts.push_back(std::move(x));
    }
    return pts;
}

template <typename T>
struct CriticLossParts {
    T total = 0;        // wasserstein + lambda * penalty
    T wasserstein = 0;  // mean[ D(fused) - D(real) ]
    T penalty = 0;
};

/// Critic objective on one batch: mean[D(fused) - D(real)] + lambda * GP.
/// Value only; draws the interpolation epsilons from `rng`.
template <typename T>
CriticLossParts<T> critic_loss(const Critic<T>& critic, const std::vector<Tensor<T>>& fused,
                               const std::vector<Tensor<T>>& real, const PenaltyConfig& cfg,
                               Rng& rng) {
    if (fused.empty() || fused.size() != real.size())
        throw std::domain_error("critic_loss: empty or mismatched batches");
    CriticLossParts<T> parts;
    for (std::size_t i = 0; i < fused.size(); ++i)
        parts.wasserstein += critic.score(fused[i]) - critic.score(real[i]);
    parts.wasserstein /= static_cast<T>(fused.size());
    if (cfg.lambda != 0.0) {
        parts.penalty = gradient_penalty(critic, penalty_points(fused, real, cfg, rng));
    }
    parts.total = parts.wasserstein + static_cast<T>(cfg.lambda) * parts.penalty;
    if (!std::isfinite(static_cast<double>(parts.total)))
        throw std::runtime_error("critic_loss: non-finite loss");
    return parts;
}

/// Critic objective plus parameter gradients accumulated into the critic's
/// store. Same epsilon draws as critic_loss given the same rng state.
template <typename T>
CriticLossParts<T> critic_loss_and_grads(Critic<T>& critic, const std::vector<Tensor<T>>& fused,
                                         const std::vector<Tensor<T>>& real,
                                         const PenaltyConfig& cfg, Rng& rng) {
    if (fused.empty() || fused.size() != real.size())
        throw std::domain_error("critic_loss: empty or mismatched batches");
    CriticLossParts<T> parts;
    const T inv_n = T(1) / static_cast<T>(fused.size());
    for (std::size_t i = 0; i < fused.size(); ++i) {
        auto tf = critic.forward(fused[i]);
        auto tr = critic.forward(real[i]);
        parts.wasserstein += tf.score - tr.score;
        critic.accumulate_score_grads(tf, inv_n);
        critic.accumulate_score_grads(tr, -inv_n);
    }
    parts.wasserstein *= inv_n;
    if (cfg.lambda != 0.0) {
        const auto pts = penalty_points(fused, real, cfg, rng);
        const T lam = static_cast<T>(cfg.lambda);
        for (const Tensor<T>& x : pts) {
            auto tx = critic.forward(x);
            const Tensor<T> g = critic.input_gradient(tx);
            T nsq = 0;
            for (const T& v : g) nsq += v * v;
            const T d = T(1) - std::sqrt(nsq);
            parts.penalty += d * d;
            critic.accumulate_penalty_grads(tx, g, lam * inv_n);
        }
        parts.penalty *= inv_n;
    }
    parts.total = parts.wasserstein + static_cast<T>(cfg.lambda) * parts.penalty;
    if (!std::isfinite(static_cast<double>(parts.total)))
        throw std::runtime_error("critic_loss: non-finite loss");
    return parts;
}

}  // namespace icafusion

#endif
