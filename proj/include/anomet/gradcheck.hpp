#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "anomet/distance.hpp"
#include "anomet/losses.hpp"

namespace anomet {

// Compares analytic gradients against central finite differences and
// returns the worst relative error over every coordinate. `loss` must
// return gradients aligned one-to-one with its input embeddings.
inline double finite_difference_check(
    const std::function<LossOutput(const std::vector<Embedding>&)>& loss,
    std::vector<Embedding> inputs, double epsilon = 1e-5) {
  const LossOutput analytic = loss(inputs);
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].dim(); ++i) {
      const double saved = inputs[k][i];
      inputs[k][i] = saved + epsilon;
      const double up = loss(inputs).value;
      inputs[k][i] = saved - epsilon;
      const double down = loss(inputs).value;
      inputs[k][i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double err = std::fabs(analytic.gradients[k][i] - numeric) /
                         std::max(1e-8, std::fabs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace anomet
