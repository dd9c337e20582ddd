#ifndef THGNN_OPTIM_HPP
#define THGNN_OPTIM_HPP

#include <cmath>
#include <vector>

#include "thgnn/autodiff.hpp"
#include "thgnn/common.hpp"
#include "thgnn/params.hpp"

namespace thgnn {

// Bias-corrected Adam. L2 regularization enters as grad += weight_decay * param
// before the moment update.
class Adam {
public:
    Adam(ModelParams& params, double lr, double weight_decay, double beta1 = 0.9,
         double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {
        if (lr <= 0.0) throw ConfigError("lr must be > 0");
        if (wd_ < 0.0) throw ConfigError("weight_decay must be >= 0");
        params.for_each([this](Param& p) {
            m_.emplace_back(p.value.rows, p.value.cols);
            v_.emplace_back(p.value.rows, p.value.cols);
        });
    }

    void step(ModelParams& params) {
        ++t_;
        double bc1 = 1.0 - std::pow(beta1_, t_);
        double bc2 = 1.0 - std::pow(beta2_, t_);
        size_t slot = 0;
        params.for_each([&](Param& p) {
            auto& m = m_[slot].data;
            auto& v = v_[slot].data;
            ++slot;
            for (size_t i = 0; i < p.value.data.size(); ++i) {
                double g = p.grad.data[i] + wd_ * p.value.data[i];
                m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
                v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
                double mhat = m[i] / bc1;
                double vhat = v[i] / bc2;
                p.value.data[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        });
    }

    long t() const { return t_; }

private:
    double lr_, wd_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Tensor> m_, v_;
};

}  // namespace thgnn

#endif
