#include "rdlm/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rdlm {

int greedy_argmax(const float* logits, int n) {
  int best = 0;
  for (int i = 1; i < n; ++i) {
    if (logits[i] > logits[best]) best = i;  // strict: ties keep the lower id
  }
  return best;
}

std::vector<double> softmax_probs(const float* logits, int n, double temperature) {
  std::vector<double> p(n);
  double max_l = -1e300;
  for (int i = 0; i < n; ++i) max_l = std::max(max_l, logits[i] / temperature);
  double denom = 0.0;
  for (int i = 0; i < n; ++i) {
    p[i] = std::exp(logits[i] / temperature - max_l);
    denom += p[i];
  }
  for (double& x : p) x /= denom;
  return p;
}

TokenSequence sample_tokens(const Logits& logits, double temperature, double top_p,
                            const std::vector<double>& uniforms) {
  if (top_p <= 0.0 || top_p > 1.0) throw std::invalid_argument("sample: top_p must be in (0, 1]");
  if (temperature < 0.0) throw std::invalid_argument("sample: temperature must be >= 0");
  if (!logits.all_finite()) throw std::invalid_argument("sample: non-finite logits");

  TokenSequence out(logits.rows);
  if (temperature == 0.0) {
    for (int i = 0; i < logits.rows; ++i) out[i] = greedy_argmax(logits.row(i), logits.cols);
    return out;
  }
  if (static_cast<int>(uniforms.size()) < logits.rows) {
    throw std::invalid_argument("sample: one uniform draw per row is required");
  }

  std::vector<int> order(logits.cols);
  for (int i = 0; i < logits.rows; ++i) {
    const std::vector<double> probs = softmax_probs(logits.row(i), logits.cols, temperature);
    std::iota(order.begin(), order.end(), 0);
    // Descending probability; equal probabilities keep lower ids first so the
    // nucleus content is deterministic.
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return probs[a] > probs[b]; });
    double cum = 0.0;
    int nucleus = 0;
    for (int j = 0; j < logits.cols; ++j) {
      cum += probs[order[j]];
      nucleus = j + 1;
      if (cum >= top_p) break;
    }
    double mass = 0.0;
    for (int j = 0; j < nucleus; ++j) mass += probs[order[j]];

    const double u = uniforms[i];
    double acc = 0.0;
    int picked = order[nucleus - 1];
    for (int j = 0; j < nucleus; ++j) {
      acc += probs[order[j]] / mass;
      if (u <= acc) {
        picked = order[j];
        break;
      }
    }
    out[i] = picked;
  }
  return out;
}

}  // namespace rdlm
