#pragma once

#include "tempokit/tcn.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace tempokit {

struct TrainingConfig {
    double learning_rate = 0.0015;
    double clip_norm = 0.5;
    int max_epochs = 150;
    int early_stop_patience = 20;
    int lookahead_k = 5;
    double lookahead_alpha = 0.5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 1;

    void validate() const {
        if (learning_rate <= 0.0) raise(Errc::invalid_config, "learning_rate must be positive");
        if (clip_norm <= 0.0) raise(Errc::invalid_config, "clip_norm must be positive");
        if (max_epochs < 1) raise(Errc::invalid_config, "max_epochs must be >= 1");
        if (early_stop_patience < 1) raise(Errc::invalid_config, "patience must be >= 1");
        if (lookahead_k < 1) raise(Errc::invalid_config, "lookahead_k must be >= 1");
        if (!(0.0 < lookahead_alpha && lookahead_alpha <= 1.0)) {
            raise(Errc::invalid_config, "lookahead_alpha must lie in (0, 1]");
        }
    }
};

// Rescales gradients so the global norm does not exceed `cap`; returns the
// pre-clip norm.
template <typename Scalar>
double clip_global_norm(TcnWeights<Scalar>& grads, double cap) {
    double sq = 0.0;
    visit_tensors(grads, [&](const std::string&, Scalar* data, Eigen::Index count) {
        for (Eigen::Index i = 0; i < count; ++i) {
            sq += static_cast<double>(data[i]) * static_cast<double>(data[i]);
        }
    });
    const double norm = std::sqrt(sq);
    if (norm > cap && norm > 0.0) {
        const auto scale = static_cast<Scalar>(cap / norm);
        visit_tensors(grads, [&](const std::string&, Scalar* data, Eigen::Index count) {
            for (Eigen::Index i = 0; i < count; ++i) data[i] *= scale;
        });
    }
    return norm;
}

// Rectified Adam wrapped in Lookahead. Each step: clip the global gradient
// norm, apply the RAdam update (plain bias-corrected momentum while the
// variance rectification rho_t <= 4, the rectified adaptive step otherwise),
// and every lookahead_k steps interpolate the slow weights toward the fast
// ones and reset the fast weights onto them.
template <typename Scalar>
class RAdamLookahead {
public:
    RAdamLookahead(const TcnWeights<Scalar>& weights, const TrainingConfig& cfg) : cfg_(cfg) {
        cfg.validate();
        visit_tensors(const_cast<TcnWeights<Scalar>&>(weights),
                      [&](const std::string&, Scalar* data, Eigen::Index count) {
                          m_.emplace_back(Vector<Scalar>::Zero(count));
                          v_.emplace_back(Vector<Scalar>::Zero(count));
                          slow_.emplace_back(Eigen::Map<const Vector<Scalar>>(data, count));
                      });
        rho_inf_ = 2.0 / (1.0 - cfg.beta2) - 1.0;
    }

    void step(TcnWeights<Scalar>& weights, TcnWeights<Scalar>& grads) {
        clip_global_norm(grads, cfg_.clip_norm);
        ++t_;

        const double b1t = std::pow(cfg_.beta1, static_cast<double>(t_));
        const double b2t = std::pow(cfg_.beta2, static_cast<double>(t_));
        const double rho_t = rho_inf_ - 2.0 * static_cast<double>(t_) * b2t / (1.0 - b2t);
        const bool rectified = rho_t > 4.0;
        double rect = 0.0;
        if (rectified) {
            rect = std::sqrt(((rho_t - 4.0) * (rho_t - 2.0) * rho_inf_) /
                             ((rho_inf_ - 4.0) * (rho_inf_ - 2.0) * rho_t));
        }

        std::size_t slot = 0;
        std::vector<Eigen::Map<Vector<Scalar>>> grad_views;
        visit_tensors(grads, [&](const std::string&, Scalar* data, Eigen::Index count) {
            grad_views.emplace_back(data, count);
        });
        visit_tensors(weights, [&](const std::string&, Scalar* data, Eigen::Index count) {
            Eigen::Map<Vector<Scalar>> theta(data, count);
            auto& g = grad_views[slot];
            auto& m = m_[slot];
            auto& v = v_[slot];
            if (m.size() != count) {
                raise(Errc::state_shape_mismatch, "optimizer state does not match weights");
            }
            m = static_cast<Scalar>(cfg_.beta1) * m + static_cast<Scalar>(1.0 - cfg_.beta1) * g;
            v.array() = static_cast<Scalar>(cfg_.beta2) * v.array() +
                        static_cast<Scalar>(1.0 - cfg_.beta2) * g.array().square();
            const Vector<Scalar> m_hat = m / static_cast<Scalar>(1.0 - b1t);
            if (rectified) {
                const auto denom =
                    ((v / static_cast<Scalar>(1.0 - b2t)).array().sqrt() +
                     static_cast<Scalar>(cfg_.epsilon));
                theta.array() -= static_cast<Scalar>(cfg_.learning_rate * rect) *
                                 m_hat.array() / denom;
            } else {
                theta -= static_cast<Scalar>(cfg_.learning_rate) * m_hat;
            }
            ++slot;
        });

        synced_ = (t_ % cfg_.lookahead_k == 0);
        if (synced_) {
            slot = 0;
            visit_tensors(weights, [&](const std::string&, Scalar* data, Eigen::Index count) {
                Eigen::Map<Vector<Scalar>> theta(data, count);
                auto& slow = slow_[slot];
                slow += static_cast<Scalar>(cfg_.lookahead_alpha) * (theta - slow);
                theta = slow;
                ++slot;
            });
        }
    }

    std::int64_t step_count() const { return t_; }
    bool synced_on_last_step() const { return synced_; }

private:
    TrainingConfig cfg_;
    double rho_inf_ = 0.0;
    std::int64_t t_ = 0;
    bool synced_ = false;
    std::vector<Vector<Scalar>> m_, v_, slow_;
};

} // namespace tempokit
