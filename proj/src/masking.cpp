#include "espark/masking.hpp"

#include <algorithm>
#include <limits>

namespace espark {

ActionDistribution ActionDistribution::from_probs(std::vector<double> p) {
    ActionDistribution d;
    d.log_probs.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!(p[i] >= 0.0) || !std::isfinite(p[i]))
            throw std::invalid_argument("probabilities must be finite and nonnegative");
        d.log_probs[i] = p[i] > 0.0 ? std::log(p[i]) : -std::numeric_limits<double>::infinity();
    }
    d.probs = std::move(p);
    return d;
}

ActionDistribution ActionDistribution::from_logits(const std::vector<double>& logits) {
    const double max_logit = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    ActionDistribution d;
    d.probs.resize(logits.size());
    d.log_probs.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        d.probs[i] = std::exp(logits[i] - max_logit);
        sum += d.probs[i];
    }
    const double log_sum = std::log(sum);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        d.probs[i] /= sum;
        d.log_probs[i] = logits[i] - max_logit - log_sum;
    }
    return d;
}

ActionDistribution apply_mask(const ActionDistribution& dist, const ActionMask& mask,
                              bool* fallback) {
    if (mask.size() != dist.size())
        throw std::invalid_argument("mask length does not match distribution");
    if (fallback) *fallback = false;
    bool all_allowed = true;
    double kept = 0.0;
    for (int i = 0; i < dist.size(); ++i) {
        if (mask.allow[i]) kept += dist.probs[i];
        else all_allowed = false;
    }
    // the trivial mask is the exact identity, not a renormalization
    if (all_allowed) return dist;
    if (!(kept > 0.0)) {
        if (fallback) *fallback = true;
        return dist;
    }
    ActionDistribution out;
    out.probs.resize(dist.probs.size());
    out.log_probs.resize(dist.probs.size());
    const double log_kept = std::log(kept);
    for (int i = 0; i < dist.size(); ++i) {
        if (mask.allow[i]) {
            out.probs[i] = dist.probs[i] / kept;
            out.log_probs[i] = dist.log_probs[i] - log_kept;
        } else {
            out.probs[i] = 0.0;
            out.log_probs[i] = -std::numeric_limits<double>::infinity();
        }
    }
    return out;
}

std::pair<int, double> sample(const ActionDistribution& dist, SeededRng& rng) {
    for (double p : dist.probs)
        if (!std::isfinite(p)) throw std::domain_error("distribution contains non-finite mass");
    const int idx = static_cast<int>(rng.weighted_index(dist.probs));
    return {idx, dist.log_probs[idx]};
}

}  // namespace espark
