#pragma once
// Layered feed-forward networks with sigmoid, three-valued symbolic, and
// softmax activations. Networks are immutable after construction; forward
// evaluation is pure and safe to call concurrently.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "enn/common.hpp"

namespace enn {

// A neuron: affine hyperplane plus training metadata. `margin` is the
// geometric margin 1/|w| recorded when the hyperplane was fit; it is not
// rescaled when (w, b) are multiplier-scaled.
struct Hyperplane {
  std::vector<double> w;
  double b = 0.0;
  double margin = 0.0;
  std::vector<std::size_t> support_indices;

  double score(std::span<const double> x) const { return dot(w, x) + b; }
};

enum class Activation { kSigmoid, kSymbolic, kSoftmax, kIdentity };

inline std::string activation_name(Activation a) {
  switch (a) {
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kSymbolic: return "symbolic";
    case Activation::kSoftmax: return "softmax";
    case Activation::kIdentity: return "identity";
  }
  return "?";
}

inline std::optional<Activation> activation_from_name(const std::string& s) {
  if (s == "sigmoid") return Activation::kSigmoid;
  if (s == "symbolic") return Activation::kSymbolic;
  if (s == "softmax") return Activation::kSoftmax;
  if (s == "identity") return Activation::kIdentity;
  return std::nullopt;
}

struct Layer {
  std::vector<Hyperplane> units;
  Activation activation = Activation::kSigmoid;
  double symbolic_tolerance = 1e-9;

  std::size_t width() const { return units.size(); }
  std::size_t input_width() const { return units.empty() ? 0 : units.front().w.size(); }
};

enum class Role { kDifferentia, kSubconcept, kConcept };

inline std::string role_name(Role r) {
  switch (r) {
    case Role::kDifferentia: return "differentia";
    case Role::kSubconcept: return "subconcept";
    case Role::kConcept: return "concept";
  }
  return "?";
}

inline std::optional<Role> role_from_name(const std::string& s) {
  if (s == "differentia") return Role::kDifferentia;
  if (s == "subconcept") return Role::kSubconcept;
  if (s == "concept") return Role::kConcept;
  return std::nullopt;
}

struct Network {
  std::vector<Layer> layers;
  std::map<std::size_t, Role> roles;  // layer index -> role annotation
  std::vector<std::string> class_names;

  std::size_t input_width() const {
    return layers.empty() ? 0 : layers.front().input_width();
  }
  std::size_t output_width() const {
    return layers.empty() ? 0 : layers.back().width();
  }

  void validate() const {
    require(!layers.empty(), "Network: layer list must be nonempty");
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const Layer& l = layers[k];
      require(!l.units.empty(), "Network: layer " + std::to_string(k) + " is empty");
      require(l.symbolic_tolerance >= 0.0, "Network: symbolic tolerance must be >= 0");
      for (const auto& u : l.units)
        require(u.w.size() == l.input_width(),
                "Network: unequal input widths within layer " + std::to_string(k));
      if (k > 0)
        require(l.input_width() == layers[k - 1].width(),
                "Network: layer " + std::to_string(k) + " input width " +
                    std::to_string(l.input_width()) + " != previous layer width " +
                    std::to_string(layers[k - 1].width()));
      if (l.activation == Activation::kSoftmax)
        require(k + 1 == layers.size(), "Network: softmax allowed only on the final layer");
    }
    require(class_names.size() == output_width(),
            "Network: output width " + std::to_string(output_width()) +
                " != number of class names " + std::to_string(class_names.size()));
  }
};

// Numerically stable logistic; saturates instead of overflowing. NaN in,
// NaN out.
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// Three-valued sign with a zero band of half-width tau: {0, 0.5, 1}.
inline double symbolic_activation(double z, double tau) {
  if (z > tau) return 1.0;
  if (z < -tau) return 0.0;
  return 0.5;
}

inline void softmax_inplace(std::span<double> z) {
  double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

struct ForwardTrace {
  std::vector<std::vector<double>> activations;  // one vector per layer
  std::vector<double> logits;                    // final layer pre-activation
};

inline ForwardTrace forward(const Network& net, std::span<const double> x) {
  require(!net.layers.empty(), "forward: empty network");
  require(x.size() == net.input_width(),
          "forward: input dimension " + std::to_string(x.size()) + " != expected " +
              std::to_string(net.input_width()));
  ForwardTrace trace;
  trace.activations.reserve(net.layers.size());
  std::vector<double> cur(x.begin(), x.end());
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const Layer& l = net.layers[k];
    std::vector<double> z(l.width());
    for (std::size_t j = 0; j < l.width(); ++j) z[j] = l.units[j].score(cur);
    if (k + 1 == net.layers.size()) trace.logits = z;
    switch (l.activation) {
      case Activation::kSigmoid:
        for (double& v : z) v = sigmoid(v);
        break;
      case Activation::kSymbolic:
        for (double& v : z) v = symbolic_activation(v, l.symbolic_tolerance);
        break;
      case Activation::kSoftmax:
        softmax_inplace(z);
        break;
      case Activation::kIdentity:
        break;
    }
    trace.activations.push_back(z);
    cur = trace.activations.back();
  }
  return trace;
}

struct Classification {
  std::size_t class_index = 0;
  std::vector<double> probabilities;
};

// Argmax over unmasked outputs; ties break to the lowest class index.
inline std::size_t masked_argmax(std::span<const double> outputs,
                                 std::span<const bool> mask) {
  std::size_t best = outputs.size();
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    if (best == outputs.size() || outputs[i] > outputs[best]) best = i;
  }
  require(best < outputs.size(), "classify: all outputs masked");
  return best;
}

inline Classification classify(const Network& net, std::span<const double> x,
                               std::span<const bool> mask = {}) {
  if (!mask.empty())
    require(mask.size() == net.output_width(),
            "classify: mask length != output width");
  ForwardTrace t = forward(net, x);
  Classification c;
  c.probabilities = t.activations.back();
  c.class_index = masked_argmax(c.probabilities, mask);
  return c;
}

}  // namespace enn
