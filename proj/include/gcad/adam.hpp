#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gcad/core.hpp"

namespace gcad {

/// Adam with bias correction. Moment accumulators are keyed by parameter
/// position, so the caller must pass the same parameter list every step.
class Adam {
public:
    struct Config {
        double lr = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
    };

    Adam() = default;
    explicit Adam(Config cfg) : cfg_(cfg) {}

    long step_count() const { return step_; }
    const Config& config() const { return cfg_; }

    /// One update; lr_override (if >= 0) replaces the configured rate for
    /// this step only, which is how schedules plug in.
    void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
              const std::vector<std::string>& names, double lr_override = -1.0) {
        if (params.size() != grads.size() || params.size() != names.size())
            throw Error("Adam::step: params/grads/names size mismatch");
        if (m_.empty()) {
            for (const Tensor* p : params) {
                m_.emplace_back(p->rows(), p->cols());
                v_.emplace_back(p->rows(), p->cols());
            }
        }
        if (m_.size() != params.size()) throw Error("Adam::step: parameter set changed");
        double lr = lr_override >= 0.0 ? lr_override : cfg_.lr;
        ++step_;
        double bc1 = 1.0 - std::pow(cfg_.beta1, double(step_));
        double bc2 = 1.0 - std::pow(cfg_.beta2, double(step_));
        for (std::size_t k = 0; k < params.size(); ++k) {
            Tensor& p = *params[k];
            const Tensor& g = *grads[k];
            if (!p.same_shape(g))
                throw NumericError(detail::concat("Adam::step: gradient shape mismatch for ",
                                                  names[k]));
            if (!g.all_finite())
                throw NumericError(detail::concat("Adam::step: non-finite gradient for ",
                                                  names[k]));
            for (std::size_t i = 0; i < p.size(); ++i) {
                m_[k][i] = cfg_.beta1 * m_[k][i] + (1.0 - cfg_.beta1) * g[i];
                v_[k][i] = cfg_.beta2 * v_[k][i] + (1.0 - cfg_.beta2) * g[i] * g[i];
                double mhat = m_[k][i] / bc1;
                double vhat = v_[k][i] / bc2;
                p[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            }
        }
    }

private:
    Config cfg_{};
    long step_ = 0;
    std::vector<Tensor> m_, v_;
};

}  // namespace gcad
