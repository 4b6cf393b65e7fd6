#ifndef ICAFUSION_TRAINER_HPP
#define ICAFUSION_TRAINER_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "icafusion/data.hpp"
#include "icafusion/generator.hpp"
#include "icafusion/losses.hpp"

namespace icafusion {

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Adversarial training protocol: per outer step, `critic_iters` updates of
/// both critics on the batch (against detached fused images), then
/// `generator_iters` updates of the generator.
struct TrainConfig {
    int batch_size = 4;
    int epochs = 16;
    double lr_generator = 1e-4;
    double lr_critic = 4e-4;
    int generator_iters = 1;
    int critic_iters = 2;
    double lambda_gp = 10.0;
    std::uint64_t seed = 1;
    int checkpoint_period = 500;  // steps; 0 disables periodic checkpoints
    int log_period = 1;           // steps between CSV rows
    std::string device = "cpu";
    int patch_size = 128;
    int patch_stride = 12;
    GpPoint gp_point = GpPoint::interpolate;
    GradOp grad_op = GradOp::forward_diff;

    void validate() const {
        if (batch_size < 1 || epochs < 1 || generator_iters < 1 || critic_iters < 1)
            throw ConfigError("train config: counts must be positive");
        // Zero learning rates are allowed so one side of the game can be
        // frozen; negative rates are not.
        if (lr_generator < 0 || lr_critic < 0)
            throw ConfigError("train config: learning rates must be nonnegative");
        if (lambda_gp < 0) throw ConfigError("train config: lambda must be nonnegative");
        if (log_period < 1 || checkpoint_period < 0)
            throw ConfigError("train config: bad period");
        if (patch_size < 16 || patch_size % 4 != 0)
            throw ConfigError("train config: patch size must be >= 16 and divisible by 4");
        if (patch_stride < 1) throw ConfigError("train config: bad stride");
    }
};

/// beta1 = 0.5 (the usual adversarial-training setting), bias-corrected.
struct AdamConfig {
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
void adam_step(ParamStore<T>& store, double lr, const AdamConfig& a, std::int64_t t) {
    const double bc1 = 1.0 - std::pow(a.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(a.beta2, static_cast<double>(t));
    for (auto& e : store) {
        for (std::size_t i = 0; i < e.value.size(); ++i) {
            const double g = static_cast<double>(e.grad[i]);
            const double m = a.beta1 * static_cast<double>(e.adam_m[i]) + (1.0 - a.beta1) * g;
            const double v = a.beta2 * static_cast<double>(e.adam_v[i]) + (1.0 - a.beta2) * g * g;
            e.adam_m[i] = static_cast<T>(m);
            e.adam_v[i] = static_cast<T>(v);
            e.value[i] -= static_cast<T>(lr * (m / bc1) / (std::sqrt(v / bc2) + a.eps));
        }
    }
}

template <typename T>
struct TrainBatch {
    std::vector<Tensor<T>> ir;
    std::vector<Tensor<T>> vis;
    std::vector<std::string> ids;
};

/// Step/checkpoint callbacks; any of them may be left empty.
template <typename T>
class Trainer;

template <typename T>
struct TrainSinks {
    std::function<void(const LossBreakdown&)> on_log;
    std::function<void(Trainer<T>&, std::uint64_t)> on_checkpoint;
};

template <typename T>
class Trainer {
public:
    Trainer(const GeneratorSpec& gspec, const TrainConfig& cfg) : cfg_(cfg), rng_(0) {
        cfg_.validate();
        Rng init(Rng::derive(cfg.seed, 1));
        gen_ = std::make_unique<Generator<T>>(gspec, init);
        CriticSpec cs;
        cs.input_h = cs.input_w = cfg.patch_size;
        d_ir_ = std::make_unique<Critic<T>>(cs, init, "critic_ir");
        d_vis_ = std::make_unique<Critic<T>>(cs, init, "critic_vis");
        rng_.set_state(Rng::derive(cfg.seed, 2));
    }

    const TrainConfig& config() const { return cfg_; }
    Generator<T>& generator() { return *gen_; }
    const Generator<T>& generator() const { return *gen_; }
    Critic<T>& critic_ir() { return *d_ir_; }
    const Critic<T>& critic_ir() const { return *d_ir_; }
    Critic<T>& critic_vis() { return *d_vis_; }
    const Critic<T>& critic_vis() const { return *d_vis_; }
    std::uint64_t step() const { return step_; }
    Rng& rng() { return rng_; }
    std::uint64_t rng_state() const { return rng_.state(); }
    std::int64_t adam_t_generator() const { return t_gen_; }
    std::int64_t adam_t_critic_ir() const { return t_ir_; }
    std::int64_t adam_t_critic_vis() const { return t_vis_; }
    const std::vector<LossBreakdown>& history() const { return history_; }

    /// One outer optimization step on a batch of normalized pairs. Any
    /// non-finite loss aborts with the offending batch identifiers.
    LossBreakdown train_step(const TrainBatch<T>& batch) {
        std::string ids;
        for (const auto& id : batch.ids) ids += (ids.empty() ? "" : ",") + id;
        if (ids.empty()) ids = "<unnamed>";
        try {
            return train_step_impl(batch);
        } catch (const NumericalError&) {
            throw;
        } catch (const std::runtime_error& e) {
            if (std::string(e.what()).find("non-finite") != std::string::npos)
                throw NumericalError(std::string(e.what()) + " at step " +
                                     std::to_string(step_ + 1) + " (batch: " + ids + ")");
            throw;
        }
    }

private:
    LossBreakdown train_step_impl(const TrainBatch<T>& batch) {
        const std::size_t n = batch.ir.size();
        if (n == 0 || batch.vis.size() != n)
            throw std::domain_error("train_step: empty or mismatched batch");

        PenaltyConfig pcfg{cfg_.lambda_gp, cfg_.gp_point};

        // Fused images for the critic updates, detached from the generator.
        std::vector<Tensor<T>> fused(n);
        for (std::size_t i = 0; i < n; ++i) fused[i] = gen_->infer(batch.ir[i], batch.vis[i]);

        CriticLossParts<T> lp_ir, lp_vis;
        for (int it = 0; it < cfg_.critic_iters; ++it) {
            d_ir_->params().zero_grad();
            lp_ir = critic_loss_and_grads(*d_ir_, fused, batch.ir, pcfg, rng_);
            adam_step(d_ir_->params(), cfg_.lr_critic, adam_, ++t_ir_);
            d_vis_->params().zero_grad();
            lp_vis = critic_loss_and_grads(*d_vis_, fused, batch.vis, pcfg, rng_);
            adam_step(d_vis_->params(), cfg_.lr_critic, adam_, ++t_vis_);
        }

        // Generator update against the updated critics, on freshly generated
        // fused images.
        double l_content = 0, l_adv = 0;
        for (int it = 0; it < cfg_.generator_iters; ++it) {
            gen_->params().zero_grad();
            std::vector<T> s_ir(n), s_vis(n);
            std::vector<double> lc(n);
            const T inv_n = T(1) / static_cast<T>(n);
            std::vector<std::unique_ptr<Tape<T>>> tapes(n);
            std::string failure;
#pragma omp parallel for schedule(static)
            for (std::size_t i = 0; i < n; ++i) {
                try {
                    tapes[i] = std::make_unique<Tape<T>>();
                    Tape<T>& tape = *tapes[i];
                    Var<T> f = gen_->forward(tape, tape.input(batch.ir[i]),
                                             tape.input(batch.vis[i]));
                    Var<T> loss = content_loss(f, tape.input(batch.ir[i]),
                                               tape.input(batch.vis[i]), cfg_.grad_op);
                    auto tf_ir = d_ir_->forward(f.value());
                    auto tf_vis = d_vis_->forward(f.value());
                    s_ir[i] = tf_ir.score;
                    s_vis[i] = tf_vis.score;
                    const Tensor<T> g_ir = d_ir_->input_gradient(tf_ir);
                    const Tensor<T> g_vis = d_vis_->input_gradient(tf_vis);
                    Tensor<T>& fg = f.grad();
                    for (std::size_t k = 0; k < fg.size(); ++k)
                        fg[k] += -inv_n * (g_ir[k] + g_vis[k]);
                    loss.grad()[0] += inv_n;
                    tape.backward();
                    lc[i] = static_cast<double>(loss.value()[0]);
                } catch (const std::exception& e) {
#pragma omp critical
                    failure = e.what();
                }
            }
            if (!failure.empty()) throw std::runtime_error(failure);
            for (std::size_t i = 0; i < n; ++i) tapes[i]->export_param_grads();
            l_content = 0;
            for (std::size_t i = 0; i < n; ++i) l_content += lc[i];
            l_content /= static_cast<double>(n);
            l_adv = static_cast<double>(generator_adversarial_loss(s_ir, s_vis));
            adam_step(gen_->params(), cfg_.lr_generator, adam_, ++t_gen_);
        }

        LossBreakdown b;
        b.step = ++step_;
        b.l_content = l_content;
        b.l_adv = l_adv;
        b.l_g = l_adv + l_content;
        b.l_d_ir = static_cast<double>(lp_ir.total);
        b.l_d_vis = static_cast<double>(lp_vis.total);
        b.gp_ir = static_cast<double>(lp_ir.penalty);
        b.gp_vis = static_cast<double>(lp_vis.penalty);
        if (!b.finite()) {
            std::string ids;
            for (const auto& id : batch.ids) ids += (ids.empty() ? "" : ",") + id;
            throw NumericalError("non-finite loss at step " + std::to_string(b.step) +
                                 " (batch: " + (ids.empty() ? "<unnamed>" : ids) + ")");
        }
        history_.push_back(b);
        if (history_.size() > kHistoryCap) history_.erase(history_.begin());
        return b;
    }

public:
    /// Full run over the dataset: epochs * floor(N / batch) steps, dataset
    /// order as built. Resumes from the internal counters, so restoring a
    /// checkpoint and calling train() continues the original schedule.
    /// `until_step` > 0 stops early (models an interrupted run).
    void train(const PatchSet& data, const TrainSinks<T>& sinks, std::uint64_t until_step = 0) {
        const std::size_t n_patches = data.count();
        const std::size_t per_epoch = n_patches / static_cast<std::size_t>(cfg_.batch_size);
        if (per_epoch == 0)
            throw std::domain_error("train: dataset smaller than one batch (" +
                                    std::to_string(n_patches) + " patches)");
        std::uint64_t total = per_epoch * static_cast<std::uint64_t>(cfg_.epochs);
        if (until_step > 0 && until_step < total) total = until_step;
        while (step_ < total) {
            const std::size_t b = static_cast<std::size_t>(step_ % per_epoch);
            TrainBatch<T> batch;
            for (int k = 0; k < cfg_.batch_size; ++k) {
                const std::size_t idx = b * cfg_.batch_size + k;
                Tensor<T> ir, vis;
                data.materialize(idx, ir, vis);
                batch.ir.push_back(std::move(ir));
                batch.vis.push_back(std::move(vis));
                batch.ids.push_back(data.refs()[idx].id + "@" +
                                    std::to_string(data.refs()[idx].row) + "," +
                                    std::to_string(data.refs()[idx].col));
            }
            LossBreakdown lb = train_step(batch);
            if (sinks.on_log && (lb.step % cfg_.log_period == 0)) sinks.on_log(lb);
            if (sinks.on_checkpoint && cfg_.checkpoint_period > 0 &&
                (lb.step % cfg_.checkpoint_period == 0 || lb.step == total))
                sinks.on_checkpoint(*this, lb.step);
        }
        if (sinks.on_checkpoint && (cfg_.checkpoint_period == 0 || total % cfg_.checkpoint_period != 0))
            sinks.on_checkpoint(*this, step_);
    }

    // Checkpoint plumbing (serialization lives in checkpoint.hpp).
    void set_counters(std::uint64_t step, std::int64_t tg, std::int64_t ti, std::int64_t tv,
                      std::uint64_t rng_state) {
        step_ = step;
        t_gen_ = tg;
        t_ir_ = ti;
        t_vis_ = tv;
        rng_.set_state(rng_state);
    }

private:
    static constexpr std::size_t kHistoryCap = 4096;

    TrainConfig cfg_;
    Rng rng_;
    std::unique_ptr<Generator<T>> gen_;
    std::unique_ptr<Critic<T>> d_ir_, d_vis_;
    AdamConfig adam_;
    std::uint64_t step_ = 0;
    std::int64_t t_gen_ = 0, t_ir_ = 0, t_vis_ = 0;
    std::vector<LossBreakdown> history_;
};

}  // namespace icafusion

#endif
