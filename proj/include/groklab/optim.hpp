#pragma once

// AdamW with linear warmup and global-norm gradient clipping.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "groklab/nn.hpp"
#include "groklab/tensor.hpp"

namespace groklab {

struct OptimConfig {
    double lr_peak = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-7;
    double weight_decay = 0.01;
    int64_t warmup_steps = 10000;
    double clip_norm = 10.0;
};

// Effective learning rate: linear warmup from 0 to lr_peak, then constant.
// step counts completed optimizer steps, so step 0 yields lr 0.
inline double warmup_lr(const OptimConfig& cfg, int64_t step) {
    if (cfg.warmup_steps <= 0) return cfg.lr_peak;
    if (step >= cfg.warmup_steps) return cfg.lr_peak;
    return cfg.lr_peak * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
}

template <typename T>
double global_grad_norm(const std::vector<Tensor<T>>& grads) {
    double ss = 0.0;
    for (const auto& g : grads) ss += g.sum_squares();
    return std::sqrt(ss);
}

// Scales gradients in place so the global L2 norm is at most max_norm;
// direction is preserved. Returns the pre-clip norm.
template <typename T>
double clip_gradients(std::vector<Tensor<T>>& grads, double max_norm) {
    double norm = global_grad_norm(grads);
    if (norm > max_norm && norm > 0.0) {
        T s = static_cast<T>(max_norm / norm);
        for (auto& g : grads) g.scale_inplace(s);
    }
    return norm;
}

template <typename T>
class AdamW {
public:
    AdamW() = default;

    AdamW(const OptimConfig& cfg, ModelParams<T>& params) : cfg_(cfg) {
        params.for_each([this](const std::string&, Tensor<T>& t) {
            m_.emplace_back(t.shape());
            v_.emplace_back(t.shape());
        });
    }

    const OptimConfig& config() const { return cfg_; }
    int64_t step_count() const { return step_; }

    std::vector<Tensor<T>>& first_moments() { return m_; }
    std::vector<Tensor<T>>& second_moments() { return v_; }
    void set_step_count(int64_t s) { step_ = s; }

    double current_lr() const { return warmup_lr(cfg_, step_); }

    // One decoupled-weight-decay Adam update. grads must align with
    // ModelParams::for_each order; gradient clipping is applied first.
    void step(ModelParams<T>& params, std::vector<Tensor<T>>& grads) {
        for (const auto& g : grads) {
            if (!g.all_finite())
                throw std::runtime_error("AdamW: non-finite gradient at step " +
                                         std::to_string(step_));
        }
        if (cfg_.clip_norm > 0.0) clip_gradients(grads, cfg_.clip_norm);
        const double lr = warmup_lr(cfg_, step_);
        ++step_;
        const double b1 = cfg_.beta1, b2 = cfg_.beta2;
        const double bias1 = 1.0 - std::pow(b1, static_cast<double>(step_));
        const double bias2 = 1.0 - std::pow(b2, static_cast<double>(step_));
        size_t idx = 0;
        params.for_each([&](const std::string&, Tensor<T>& p) {
            Tensor<T>& g = grads[idx];
            Tensor<T>& m = m_[idx];
            Tensor<T>& v = v_[idx];
            for (int64_t i = 0; i < p.size(); ++i) {
                double gi = g[i];
                double mi = b1 * m[i] + (1.0 - b1) * gi;
                double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
                m[i] = static_cast<T>(mi);
                v[i] = static_cast<T>(vi);
                double mhat = mi / bias1;
                double vhat = vi / bias2;
                double upd = lr * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                                   cfg_.weight_decay * static_cast<double>(p[i]));
                p[i] = static_cast<T>(p[i] - upd);
            }
            ++idx;
        });
    }

private:
    OptimConfig cfg_;
    int64_t step_ = 0;
    std::vector<Tensor<T>> m_;
    std::vector<Tensor<T>> v_;
};

}  // namespace groklab
