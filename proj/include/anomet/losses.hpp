#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "anomet/distance.hpp"

namespace anomet {

// Orientation of the pairwise softmax ratio. paper_literal keeps the
// ratio exactly as published, which rewards large anchor-positive
// distances; corrected flips it so that minimizing the loss pulls
// positives in and pushes negatives out. corrected is the default and
// is what training uses unless explicitly overridden.
enum class SoftmaxSign { paper_literal, corrected };

inline const char* to_string(SoftmaxSign s) {
  return s == SoftmaxSign::paper_literal ? "paper" : "corrected";
}

inline SoftmaxSign softmax_sign_from_string(const std::string& s) {
  if (s == "paper" || s == "paper-literal") return SoftmaxSign::paper_literal;
  if (s == "corrected") return SoftmaxSign::corrected;
  throw std::invalid_argument("unknown softmax sign '" + s +
                              "' (expected paper or corrected)");
}

struct LossConfig {
  double margin = 0.2;
  double sigma = 0.3;
  double lambda = 1.0;
  SoftmaxSign softmax_sign = SoftmaxSign::corrected;
};

// Loss value plus one gradient vector per input embedding, in input
// order. Triplet-family losses take embeddings laid out
// [a0, p0, n0, a1, p1, n1, ...]; pair losses [a0, b0, a1, b1, ...].
struct LossOutput {
  double value = 0.0;
  std::vector<std::vector<double>> gradients;
};

inline double stable_softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Scalar loss term as a function of the two squared distances, with
// partial derivatives. These are the building blocks both the batch
// losses and their tests use.
struct TermGrad {
  double value = 0.0;
  double d_ap = 0.0;
  double d_an = 0.0;
};

// max(0, d_ap - d_an + margin). Subgradient at the kink is zero.
inline TermGrad triplet_term(double d_ap, double d_an, double margin) {
  TermGrad g;
  const double s = d_ap - d_an + margin;
  if (s > 0.0) {
    g.value = s;
    g.d_ap = 1.0;
    g.d_an = -1.0;
  }
  return g;
}

// max(0, exp(d_ap/sigma) - exp(d_an/sigma) + margin). The exponential
// inflates the penalty on hard triplets.
inline TermGrad triplet_focal_term(double d_ap, double d_an, double sigma,
                                   double margin) {
  if (sigma <= 0.0) {
    throw std::invalid_argument("triplet_focal_term: sigma must be positive");
  }
  TermGrad g;
  const double ea = std::exp(d_ap / sigma);
  const double en = std::exp(d_an / sigma);
  const double s = ea - en + margin;
  if (s > 0.0) {
    g.value = s;
    g.d_ap = ea / sigma;
    g.d_an = -en / sigma;
  }
  return g;
}

// Pairwise softmax cross-entropy over the two distances. In corrected
// orientation this is softplus(d_ap - d_an); paper_literal is
// softplus(d_an - d_ap), the ratio as published.
inline TermGrad metric_softmax_term(double d_ap, double d_an,
                                    SoftmaxSign sign) {
  TermGrad g;
  const double x =
      sign == SoftmaxSign::corrected ? d_ap - d_an : d_an - d_ap;
  g.value = stable_softplus(x);
  const double s = stable_sigmoid(x);
  if (sign == SoftmaxSign::corrected) {
    g.d_ap = s;
    g.d_an = -s;
  } else {
    g.d_ap = -s;
    g.d_an = s;
  }
  return g;
}

// Combined objective: softmax term regularized by lambda times the
// focal term.
inline TermGrad anomaly_term(double d_ap, double d_an,
                             const LossConfig& cfg) {
  const TermGrad ms = metric_softmax_term(d_ap, d_an, cfg.softmax_sign);
  const TermGrad tf =
      triplet_focal_term(d_ap, d_an, cfg.sigma, cfg.margin);
  TermGrad g;
  g.value = ms.value + cfg.lambda * tf.value;
  g.d_ap = ms.d_ap + cfg.lambda * tf.d_ap;
  g.d_an = ms.d_an + cfg.lambda * tf.d_an;
  return g;
}

namespace detail {

inline void check_triplet_layout(const std::vector<Embedding>& embeddings) {
  if (embeddings.empty() || embeddings.size() % 3 != 0) {
    throw std::invalid_argument(
        "triplet loss expects a non-empty [anchor, positive, negative] "
        "layout; got " +
        std::to_string(embeddings.size()) + " embeddings");
  }
}

// Sums a distance-based term over every (a, p, n) group and chains the
// term partials through d||a-p||^2 and d||a-n||^2.
template <typename TermFn>
LossOutput assemble_triplet_loss(const std::vector<Embedding>& embeddings,
                                 TermFn&& term) {
  check_triplet_layout(embeddings);
  const std::size_t dim = embeddings[0].dim();
  LossOutput out;
  out.gradients.assign(embeddings.size(), std::vector<double>(dim, 0.0));
  for (std::size_t t = 0; t + 2 < embeddings.size(); t += 3) {
    const Embedding& a = embeddings[t];
    const Embedding& p = embeddings[t + 1];
    const Embedding& n = embeddings[t + 2];
    const double d_ap = squared_distance(a, p);
    const double d_an = squared_distance(a, n);
    const TermGrad g = term(d_ap, d_an);
    out.value += g.value;
    for (std::size_t i = 0; i < dim; ++i) {
      const double ap = 2.0 * (a[i] - p[i]);
      const double an = 2.0 * (a[i] - n[i]);
      out.gradients[t][i] += g.d_ap * ap + g.d_an * an;
      out.gradients[t + 1][i] -= g.d_ap * ap;
      out.gradients[t + 2][i] -= g.d_an * an;
    }
  }
  return out;
}

}  // namespace detail

inline LossOutput triplet_loss(const std::vector<Embedding>& embeddings,
                               const LossConfig& cfg) {
  return detail::assemble_triplet_loss(
      embeddings,
      [&](double ap, double an) { return triplet_term(ap, an, cfg.margin); });
}

inline LossOutput triplet_focal_loss(const std::vector<Embedding>& embeddings,
                                     const LossConfig& cfg) {
  return detail::assemble_triplet_loss(embeddings, [&](double ap, double an) {
    return triplet_focal_term(ap, an, cfg.sigma, cfg.margin);
  });
}

inline LossOutput metric_softmax_loss(const std::vector<Embedding>& embeddings,
                                      const LossConfig& cfg) {
  return detail::assemble_triplet_loss(embeddings, [&](double ap, double an) {
    return metric_softmax_term(ap, an, cfg.softmax_sign);
  });
}

inline LossOutput anomaly_loss(const std::vector<Embedding>& embeddings,
                               const LossConfig& cfg) {
  return detail::assemble_triplet_loss(
      embeddings,
      [&](double ap, double an) { return anomaly_term(ap, an, cfg); });
}

// Pair loss: same pairs pay their squared distance, different pairs pay
// a squared hinge on the margin. Layout [a0, b0, a1, b1, ...] with one
// same/different flag per pair.
inline LossOutput contrastive_loss(const std::vector<Embedding>& embeddings,
                                   const std::vector<bool>& same,
                                   const LossConfig& cfg) {
  if (embeddings.empty() || embeddings.size() % 2 != 0) {
    throw std::invalid_argument(
        "contrastive loss expects a non-empty [a, b] pair layout; got " +
        std::to_string(embeddings.size()) + " embeddings");
  }
  if (same.size() * 2 != embeddings.size()) {
    throw std::invalid_argument(
        "contrastive loss: flag count " + std::to_string(same.size()) +
        " does not match pair count " + std::to_string(embeddings.size() / 2));
  }
  const std::size_t dim = embeddings[0].dim();
  LossOutput out;
  out.gradients.assign(embeddings.size(), std::vector<double>(dim, 0.0));
  for (std::size_t k = 0; k < same.size(); ++k) {
    const Embedding& a = embeddings[2 * k];
    const Embedding& b = embeddings[2 * k + 1];
    const double d = squared_distance(a, b);
    double dl_dd = 0.0;
    if (same[k]) {
      out.value += d;
      dl_dd = 1.0;
    } else {
      const double h = cfg.margin - d;
      if (h > 0.0) {
        out.value += h * h;
        dl_dd = -2.0 * h;
      }
    }
    for (std::size_t i = 0; i < dim; ++i) {
      const double g = dl_dd * 2.0 * (a[i] - b[i]);
      out.gradients[2 * k][i] += g;
      out.gradients[2 * k + 1][i] -= g;
    }
  }
  return out;
}

// Running per-class embedding centers, updated by exponential moving
// average toward each batch's class means.
struct ClassCenters {
  std::map<std::string, std::vector<double>> centers;
  double update_rate = 0.5;
};

// 1/2 sum_i ||f_i - c_{y_i}||^2 against fixed centers; the gradient
// flows to the embeddings only.
inline LossOutput center_loss(const std::vector<Embedding>& embeddings,
                              const std::vector<std::string>& class_ids,
                              const ClassCenters& centers) {
  if (embeddings.size() != class_ids.size()) {
    throw std::invalid_argument(
        "center loss: embedding count " + std::to_string(embeddings.size()) +
        " does not match class id count " + std::to_string(class_ids.size()));
  }
  if (embeddings.empty()) {
    throw std::invalid_argument("center loss: empty batch");
  }
  const std::size_t dim = embeddings[0].dim();
  LossOutput out;
  out.gradients.assign(embeddings.size(), std::vector<double>(dim, 0.0));
  for (std::size_t k = 0; k < embeddings.size(); ++k) {
    const auto it = centers.centers.find(class_ids[k]);
    if (it == centers.centers.end()) {
      throw std::invalid_argument("center loss: no center for class '" +
                                  class_ids[k] + "'");
    }
    if (it->second.size() != dim) {
      throw std::invalid_argument(
          "center loss: center for class '" + class_ids[k] + "' has dim " +
          std::to_string(it->second.size()) + ", embeddings have dim " +
          std::to_string(dim));
    }
    for (std::size_t i = 0; i < dim; ++i) {
      const double diff = embeddings[k][i] - it->second[i];
      out.value += 0.5 * diff * diff;
      out.gradients[k][i] = diff;
    }
  }
  return out;
}

// Moves each center a fraction of the way toward its batch mean. A class
// seen for the first time adopts the batch mean outright.
inline void update_centers(ClassCenters& centers,
                           const std::vector<Embedding>& embeddings,
                           const std::vector<std::string>& class_ids) {
  if (embeddings.size() != class_ids.size()) {
    throw std::invalid_argument(
        "update_centers: embedding count does not match class id count");
  }
  std::map<std::string, std::pair<std::vector<double>, std::size_t>> sums;
  for (std::size_t k = 0; k < embeddings.size(); ++k) {
    auto& [sum, count] = sums[class_ids[k]];
    if (sum.empty()) sum.assign(embeddings[k].dim(), 0.0);
    for (std::size_t i = 0; i < embeddings[k].dim(); ++i) {
      sum[i] += embeddings[k][i];
    }
    ++count;
  }
  for (auto& [key, entry] : sums) {
    auto& [sum, count] = entry;
    for (double& v : sum) v /= static_cast<double>(count);
    auto it = centers.centers.find(key);
    if (it == centers.centers.end()) {
      centers.centers.emplace(key, std::move(sum));
    } else {
      for (std::size_t i = 0; i < it->second.size(); ++i) {
        it->second[i] += centers.update_rate * (sum[i] - it->second[i]);
      }
    }
  }
}

}  // namespace anomet
