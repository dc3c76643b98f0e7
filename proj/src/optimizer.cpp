#include "mimoe/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mimoe {

CosineSchedule CosineSchedule::with_warmup_fraction(double base_lr, std::size_t total_steps, double fraction) {
    CosineSchedule s;
    s.base_lr = base_lr;
    s.total_steps = std::max<std::size_t>(total_steps, 1);
    s.warmup_steps = total_steps == 0
                         ? 0
                         : std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * total_steps)));
    s.warmup_steps = std::min(s.warmup_steps, s.total_steps);
    return s;
}

double CosineSchedule::at(std::size_t step) const {
    if (step < warmup_steps) {
        return base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
    }
    const std::size_t span = total_steps > warmup_steps ? total_steps - warmup_steps : 1;
    const double progress = std::min(1.0, static_cast<double>(step - warmup_steps) / static_cast<double>(span));
    return 0.5 * base_lr * (1.0 + std::cos(std::numbers::pi * progress));
}

Adam::Adam(const ParamStore& params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (std::size_t p = 0; p < params.count(); ++p) {
        m_.emplace_back(params.value(p).rows, params.value(p).cols);
        v_.emplace_back(params.value(p).rows, params.value(p).cols);
    }
}

void Adam::step(ParamStore& params, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t p = 0; p < params.count(); ++p) {
        auto& w = params.value(p).data;
        const auto& g = params.grad(p).data;
        auto& m = m_[p].data;
        auto& v = v_[p].data;
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
        }
    }
}

}  // namespace mimoe
