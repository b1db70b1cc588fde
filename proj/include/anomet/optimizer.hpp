#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "anomet/encoder.hpp"
#include "anomet/errors.hpp"

namespace anomet {

// SGD with classical momentum: v <- mu v - lr g; p <- p + v.
struct OptimizerState {
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::vector<std::vector<double>> weight_velocity;
  std::vector<std::vector<double>> bias_velocity;
  std::size_t steps = 0;
};

inline OptimizerState init_optimizer(const EncoderParameters& params,
                                     double learning_rate = 0.01,
                                     double momentum = 0.9) {
  OptimizerState state;
  state.learning_rate = learning_rate;
  state.momentum = momentum;
  for (const LayerParams& layer : params.layers) {
    state.weight_velocity.emplace_back(layer.weights.size(), 0.0);
    state.bias_velocity.emplace_back(layer.bias.size(), 0.0);
  }
  return state;
}

inline void sgd_momentum_step(EncoderParameters& params,
                              const EncoderGradients& grads,
                              OptimizerState& state) {
  if (grads.weights.size() != params.layers.size()) {
    throw std::invalid_argument(
        "sgd_momentum_step: gradient layer count does not match encoder");
  }
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    LayerParams& layer = params.layers[l];
    for (double g : grads.weights[l]) {
      if (!std::isfinite(g)) {
        throw NumericalError("sgd_momentum_step: non-finite weight gradient "
                             "in layer " +
                             std::to_string(l));
      }
    }
    for (double g : grads.bias[l]) {
      if (!std::isfinite(g)) {
        throw NumericalError("sgd_momentum_step: non-finite bias gradient "
                             "in layer " +
                             std::to_string(l));
      }
    }
    for (std::size_t i = 0; i < layer.weights.size(); ++i) {
      double& v = state.weight_velocity[l][i];
      v = state.momentum * v - state.learning_rate * grads.weights[l][i];
      layer.weights[i] += v;
    }
    for (std::size_t i = 0; i < layer.bias.size(); ++i) {
      double& v = state.bias_velocity[l][i];
      v = state.momentum * v - state.learning_rate * grads.bias[l][i];
      layer.bias[i] += v;
    }
  }
  ++state.steps;
}

}  // namespace anomet
