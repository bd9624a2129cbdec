#include "convkit/verify.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace convkit {
namespace {

std::size_t argmax(std::span<const float> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

FeatureMap random_input(const Shape3& shape, Rng& rng) {
  FeatureMap map(shape.w, shape.h, shape.c);
  for (float& v : map.data()) v = rng.uniform_pm1();
  return map;
}

Divergence verify_networks(const Network& a, const Network& b, std::size_t inputs,
                           std::uint64_t seed) {
  if (a.input_shape() != b.input_shape()) {
    fail_validation("verify: models take different input shapes");
  }
  Divergence d;
  d.inputs = inputs;
  if (inputs == 0) return d;

  Rng rng(seed);
  std::size_t agree = 0;
  double rel_sum = 0.0;
  for (std::size_t k = 0; k < inputs; ++k) {
    const FeatureMap x = random_input(a.input_shape(), rng);
    const FeatureMap ya = a.forward(x);
    const FeatureMap yb = b.forward(x);
    if (ya.size() != yb.size()) {
      fail_validation("verify: models produce outputs of different sizes (" +
                      std::to_string(ya.size()) + " vs " + std::to_string(yb.size()) +
                      ")");
    }
    double diff_sq = 0.0, ref_sq = 0.0;
    for (std::size_t i = 0; i < ya.size(); ++i) {
      const double diff = static_cast<double>(ya.data()[i]) - yb.data()[i];
      d.max_abs_diff = std::max(d.max_abs_diff, std::abs(diff));
      diff_sq += diff * diff;
      ref_sq += static_cast<double>(ya.data()[i]) * ya.data()[i];
    }
    if (ref_sq > 0.0) {
      rel_sum += std::sqrt(diff_sq / ref_sq);
    } else if (diff_sq > 0.0) {
      rel_sum += 1.0;
    }
    if (ya.size() > 0 && argmax(ya.data()) == argmax(yb.data())) ++agree;
  }
  d.mean_rel_diff = rel_sum / static_cast<double>(inputs);
  d.top1_agreement = 100.0 * static_cast<double>(agree) / static_cast<double>(inputs);
  return d;
}

Divergence verify_models(const ModelGraph& a, const ModelGraph& b, std::size_t inputs,
                         std::uint64_t seed) {
  if (a.input != b.input) fail_validation("verify: models take different input shapes");
  return verify_networks(Network(a), Network(b), inputs, seed);
}

std::string divergence_json(const Divergence& d) {
  nlohmann::json j{{"inputs", d.inputs},
                   {"max_abs_diff", d.max_abs_diff},
                   {"mean_rel_diff", d.mean_rel_diff},
                   {"top1_agreement", d.top1_agreement}};
  return j.dump(2) + "\n";
}

}  // namespace convkit
