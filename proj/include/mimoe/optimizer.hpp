#pragma once

#include <cstddef>
#include <vector>

#include "mimoe/autodiff.hpp"

namespace mimoe {

// Linear warm-up to the base rate, then cosine annealing to zero.
struct CosineSchedule {
    double base_lr = 1e-3;
    std::size_t total_steps = 1;
    std::size_t warmup_steps = 0;

    // warmup_steps = max(1, round(fraction * total)) when total > 0.
    static CosineSchedule with_warmup_fraction(double base_lr, std::size_t total_steps, double fraction);
    double at(std::size_t step) const;
};

// Adam with bias correction.
class Adam {
public:
    explicit Adam(const ParamStore& params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step(ParamStore& params, double lr);
    std::size_t steps() const noexcept { return t_; }

private:
    double beta1_, beta2_, eps_;
    std::size_t t_ = 0;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
};

}  // namespace mimoe
