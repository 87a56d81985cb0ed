#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "amad/tensor.hpp"

namespace amad {

/// RMSProp: acc <- decay*acc + (1-decay)*g^2 ; p <- p - lr*g/sqrt(acc+eps).
/// The accumulator lives next to its parameter and must match its shape.
struct RmsProp {
    double learning_rate = 0.01;
    double decay = 0.9;
    double epsilon = 1e-8;

    void step(Tensor& param, Tensor& acc, const std::vector<double>& grad) const {
        if (param.numel() != grad.size() || acc.numel() != param.numel())
            throw std::invalid_argument("RmsProp::step: shape mismatch");
        for (std::size_t i = 0; i < grad.size(); ++i) {
            const double g = grad[i];
            acc.values[i] = decay * acc.values[i] + (1.0 - decay) * g * g;
            param.values[i] -= learning_rate * g / std::sqrt(acc.values[i] + epsilon);
        }
    }
};

}  // namespace amad
