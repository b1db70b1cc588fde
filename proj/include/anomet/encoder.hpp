#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "anomet/distance.hpp"
#include "anomet/errors.hpp"
#include "anomet/rng.hpp"

namespace anomet {

struct EncoderConfig {
  std::size_t input_dim = 8;
  std::vector<std::size_t> hidden_dims = {64, 64};
  std::size_t output_dim = 32;
};

struct LayerParams {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;  // row-major, out rows of in columns
  std::vector<double> bias;     // out
};

// Fully connected encoder: ReLU hidden layers, affine output layer,
// then projection onto the unit sphere.
struct EncoderParameters {
  EncoderConfig config;
  std::vector<LayerParams> layers;
};

// Glorot-uniform weights, zero biases. Weights are drawn row-major,
// layer by layer, so a given rng stream always produces the same
// parameters.
inline EncoderParameters init_encoder(const EncoderConfig& config, Rng& rng) {
  if (config.input_dim == 0 || config.output_dim == 0) {
    throw std::invalid_argument(
        "init_encoder: input and output dims must be positive");
  }
  for (std::size_t h : config.hidden_dims) {
    if (h == 0) {
      throw std::invalid_argument(
          "init_encoder: hidden dims must be positive");
    }
  }
  std::vector<std::size_t> dims;
  dims.push_back(config.input_dim);
  for (std::size_t h : config.hidden_dims) dims.push_back(h);
  dims.push_back(config.output_dim);

  EncoderParameters params;
  params.config = config;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    LayerParams layer;
    layer.in = dims[l];
    layer.out = dims[l + 1];
    const double limit =
        std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    layer.weights.resize(layer.in * layer.out);
    for (double& w : layer.weights) w = rng.uniform(-limit, limit);
    layer.bias.assign(layer.out, 0.0);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

struct ForwardTrace {
  std::vector<std::vector<double>> inputs;   // input seen by each layer
  std::vector<std::vector<double>> preacts;  // affine outputs per layer
  double pre_norm_norm = 0.0;                // norm of the last affine output
  Embedding output;                          // unit-normalized embedding
};

inline ForwardTrace forward_trace(const EncoderParameters& params,
                                  const std::vector<double>& features) {
  if (params.layers.empty()) {
    throw std::invalid_argument("forward: encoder has no layers");
  }
  if (features.size() != params.layers.front().in) {
    throw std::invalid_argument(
        "forward: feature dim " + std::to_string(features.size()) +
        " does not match encoder input dim " +
        std::to_string(params.layers.front().in));
  }
  ForwardTrace trace;
  std::vector<double> x = features;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const LayerParams& layer = params.layers[l];
    trace.inputs.push_back(x);
    std::vector<double> z(layer.out);
    for (std::size_t r = 0; r < layer.out; ++r) {
      double s = layer.bias[r];
      const double* row = layer.weights.data() + r * layer.in;
      for (std::size_t c = 0; c < layer.in; ++c) s += row[c] * x[c];
      z[r] = s;
    }
    trace.preacts.push_back(z);
    if (l + 1 < params.layers.size()) {
      for (double& v : z) v = v > 0.0 ? v : 0.0;
    }
    x = std::move(z);
  }
  double nrm = 0.0;
  for (double v : x) nrm += v * v;
  nrm = std::sqrt(nrm);
  if (nrm < kZeroNormThreshold) {
    throw NumericalError(
        "forward: encoder output norm " + std::to_string(nrm) +
        " is too small to normalize");
  }
  trace.pre_norm_norm = nrm;
  trace.output.values.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    trace.output.values[i] = x[i] / nrm;
  }
  return trace;
}

inline Embedding forward(const EncoderParameters& params,
                         const std::vector<double>& features) {
  return forward_trace(params, features).output;
}

struct EncoderGradients {
  std::vector<std::vector<double>> weights;  // same shapes as the layers
  std::vector<std::vector<double>> bias;
};

inline EncoderGradients zero_gradients(const EncoderParameters& params) {
  EncoderGradients grads;
  for (const LayerParams& layer : params.layers) {
    grads.weights.emplace_back(layer.weights.size(), 0.0);
    grads.bias.emplace_back(layer.bias.size(), 0.0);
  }
  return grads;
}

// Backpropagates dL/d(output) through the normalization and every layer,
// adding parameter gradients into `grads`. With u = v/r the normalization
// jacobian gives dL/dv = (g - (g.u) u) / r.
inline void accumulate_backward(const EncoderParameters& params,
                                const ForwardTrace& trace,
                                const std::vector<double>& output_grad,
                                EncoderGradients& grads) {
  const std::size_t last = params.layers.size() - 1;
  if (output_grad.size() != params.layers[last].out) {
    throw std::invalid_argument(
        "accumulate_backward: output grad dim " +
        std::to_string(output_grad.size()) + " does not match encoder output " +
        std::to_string(params.layers[last].out));
  }
  const double r = trace.pre_norm_norm;
  double dot = 0.0;
  for (std::size_t i = 0; i < output_grad.size(); ++i) {
    dot += output_grad[i] * trace.output.values[i];
  }
  std::vector<double> delta(output_grad.size());
  for (std::size_t i = 0; i < output_grad.size(); ++i) {
    delta[i] = (output_grad[i] - dot * trace.output.values[i]) / r;
  }

  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const LayerParams& layer = params.layers[l];
    if (l != last) {
      // ReLU gate; the derivative at exactly zero is taken as zero.
      for (std::size_t ri = 0; ri < delta.size(); ++ri) {
        if (trace.preacts[l][ri] <= 0.0) delta[ri] = 0.0;
      }
    }
    const std::vector<double>& x = trace.inputs[l];
    for (std::size_t ri = 0; ri < layer.out; ++ri) {
      grads.bias[l][ri] += delta[ri];
      double* wrow = grads.weights[l].data() + ri * layer.in;
      for (std::size_t c = 0; c < layer.in; ++c) {
        wrow[c] += delta[ri] * x[c];
      }
    }
    if (l == 0) break;
    std::vector<double> prev(layer.in, 0.0);
    for (std::size_t ri = 0; ri < layer.out; ++ri) {
      const double* row = layer.weights.data() + ri * layer.in;
      for (std::size_t c = 0; c < layer.in; ++c) {
        prev[c] += row[c] * delta[ri];
      }
    }
    delta = std::move(prev);
  }
}

// Gradient of a batch: one trace and one output gradient per sample.
inline EncoderGradients backward(
    const EncoderParameters& params, const std::vector<ForwardTrace>& traces,
    const std::vector<std::vector<double>>& output_grads) {
  if (traces.size() != output_grads.size()) {
    throw std::invalid_argument(
        "backward: trace count does not match gradient count");
  }
  EncoderGradients grads = zero_gradients(params);
  for (std::size_t k = 0; k < traces.size(); ++k) {
    accumulate_backward(params, traces[k], output_grads[k], grads);
  }
  return grads;
}

}  // namespace anomet
