#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "espark/rng.hpp"
#include "espark/types.hpp"

namespace espark {

/// Categorical distribution over the action grid, kept alongside its
/// log-probabilities so masking and sampling stay numerically aligned.
struct ActionDistribution {
    std::vector<double> probs;
    std::vector<double> log_probs;

    static ActionDistribution from_probs(std::vector<double> p);
    static ActionDistribution from_logits(const std::vector<double>& logits);

    int size() const { return static_cast<int>(probs.size()); }
};

/// Restricts a distribution to the mask's support and renormalizes.
/// When the mask removes all probability mass the input distribution is
/// returned unchanged; `fallback` (when given) reports that case so
/// callers can count degenerate exploration functions.
ActionDistribution apply_mask(const ActionDistribution& dist, const ActionMask& mask,
                              bool* fallback = nullptr);

/// Inverse-CDF sample; the returned log-probability is taken from the
/// distribution actually sampled (i.e. the masked one when masked).
std::pair<int, double> sample(const ActionDistribution& dist, SeededRng& rng);

}  // namespace espark
