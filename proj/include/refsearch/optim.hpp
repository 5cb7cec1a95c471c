#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace refsearch {

// Adam with bias correction. Tensors are registered once in a fixed
// order and updated in that same order every step.
class Adam {
public:
    explicit Adam(double learning_rate) : lr_(learning_rate) {}

    int register_tensor(Eigen::Index size) {
        slots_.push_back({Eigen::ArrayXd::Zero(size), Eigen::ArrayXd::Zero(size)});
        return static_cast<int>(slots_.size()) - 1;
    }

    void begin_step() {
        ++t_;
        next_ = 0;
    }

    void update(double* param, const double* grad, Eigen::Index size) {
        Slot& slot = slots_[static_cast<std::size_t>(next_++)];
        Eigen::Map<Eigen::ArrayXd> p(param, size);
        Eigen::Map<const Eigen::ArrayXd> g(grad, size);
        slot.m = beta1_ * slot.m + (1.0 - beta1_) * g;
        slot.v = beta2_ * slot.v + (1.0 - beta2_) * g.square();
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        p -= lr_ * (slot.m / bc1) / ((slot.v / bc2).sqrt() + eps_);
    }

    template <typename Derived>
    void update(Eigen::PlainObjectBase<Derived>& param,
                const Eigen::PlainObjectBase<Derived>& grad) {
        update(param.data(), grad.data(), param.size());
    }

private:
    struct Slot {
        Eigen::ArrayXd m;
        Eigen::ArrayXd v;
    };

    double lr_;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    long t_ = 0;
    int next_ = 0;
    std::vector<Slot> slots_;
};

// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) fill in linear storage order.
inline void init_uniform(double* data, Eigen::Index size, int fan_in, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < size; ++i) data[i] = dist(rng);
}

template <typename Derived>
void init_uniform(Eigen::PlainObjectBase<Derived>& tensor, int fan_in, std::mt19937_64& rng) {
    init_uniform(tensor.data(), tensor.size(), fan_in, rng);
}

}  // namespace refsearch
