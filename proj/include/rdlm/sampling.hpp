#pragma once

#include <vector>

#include "rdlm/model.hpp"

namespace rdlm {

// One token per logit row. temperature == 0 is greedy argmax with the lowest
// token id winning ties; otherwise temperature scaling, nucleus truncation at
// top_p, renormalization, then an inverse-CDF draw using uniforms[row].
// uniforms may be empty for the greedy path.
TokenSequence sample_tokens(const Logits& p, double temperature, double top_p,
                            const std::vector<double>& uniforms);

int greedy_argmax(const float* logits, int n);

// Exact softmax (double precision), used by tests as the distribution oracle.
std::vector<double> softmax_probs(const float* logits, int n, double temperature);

}  // namespace rdlm
