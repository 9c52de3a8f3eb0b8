#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "espark/masking.hpp"
#include "espark/rng.hpp"

using namespace espark;

namespace {

ActionMask mask_of(std::vector<bool> allow) {
    ActionMask m;
    m.allow = std::move(allow);
    return m;
}

ActionDistribution random_dist(SeededRng& rng, int n) {
    std::vector<double> p(static_cast<std::size_t>(n));
    double sum = 0.0;
    for (auto& v : p) {
        v = rng.uniform(1e-4, 1.0);
        sum += v;
    }
    for (auto& v : p) v /= sum;
    return ActionDistribution::from_probs(p);
}

}  // namespace

TEST_CASE("renormalization over the kept support") {
    ActionDistribution d = ActionDistribution::from_probs({0.5, 0.5});
    ActionDistribution m = apply_mask(d, mask_of({true, false}));
    CHECK(m.probs[0] == doctest::Approx(1.0));
    CHECK(m.probs[1] == 0.0);

    ActionDistribution d2 = ActionDistribution::from_probs({0.2, 0.3, 0.5});
    ActionDistribution m2 = apply_mask(d2, mask_of({false, true, true}));
    CHECK(m2.probs[0] == 0.0);
    CHECK(m2.probs[1] == doctest::Approx(0.375));
    CHECK(m2.probs[2] == doctest::Approx(0.625));
}

TEST_CASE("all-masked falls back to the raw distribution") {
    ActionDistribution d = ActionDistribution::from_probs({0.25, 0.75});
    bool fallback = false;
    ActionDistribution m = apply_mask(d, mask_of({false, false}), &fallback);
    CHECK(fallback);
    CHECK(m.probs == d.probs);
    CHECK(m.log_probs == d.log_probs);
}

TEST_CASE("the trivial mask is the exact identity") {
    SeededRng rng(3, 3);
    ActionDistribution d = random_dist(rng, 5);
    ActionDistribution m = apply_mask(d, ActionMask::all_allow(5));
    CHECK(m.probs == d.probs);       // bitwise
    CHECK(m.log_probs == d.log_probs);
}

TEST_CASE("length mismatch violates the contract") {
    ActionDistribution d = ActionDistribution::from_probs({1.0});
    CHECK_THROWS_AS(apply_mask(d, mask_of({true, false})), std::invalid_argument);
}

TEST_CASE("masking property suite: 10k generated cases") {
    SeededRng rng(99, 0);
    for (int i = 0; i < 10'000; ++i) {
        const int n = 2 + static_cast<int>(rng.uniform_int(7));
        ActionDistribution d = random_dist(rng, n);
        ActionMask mask;
        mask.allow.resize(static_cast<std::size_t>(n));
        for (int a = 0; a < n; ++a) mask.allow[static_cast<std::size_t>(a)] = rng.uniform01() < 0.6;

        bool fallback = false;
        ActionDistribution masked = apply_mask(d, mask, &fallback);

        // idempotence
        ActionDistribution twice = apply_mask(masked, mask, nullptr);
        for (int a = 0; a < n; ++a)
            CHECK(twice.probs[static_cast<std::size_t>(a)] ==
                  doctest::Approx(masked.probs[static_cast<std::size_t>(a)]).epsilon(1e-12));

        double total = 0.0;
        for (double p : masked.probs) total += p;
        CHECK(total == doctest::Approx(1.0).epsilon(1e-9));

        if (!fallback) {
            // support inclusion: masked-out actions carry no mass
            for (int a = 0; a < n; ++a) {
                if (!mask.allow[static_cast<std::size_t>(a)])
                    CHECK(masked.probs[static_cast<std::size_t>(a)] == 0.0);
                if (d.probs[static_cast<std::size_t>(a)] == 0.0)
                    CHECK(masked.probs[static_cast<std::size_t>(a)] == 0.0);
            }
            // relative odds preserved among unmasked actions
            int first = -1;
            for (int a = 0; a < n; ++a) {
                if (!mask.allow[static_cast<std::size_t>(a)]) continue;
                if (first < 0) {
                    first = a;
                    continue;
                }
                const double lhs = masked.probs[static_cast<std::size_t>(a)] *
                                   d.probs[static_cast<std::size_t>(first)];
                const double rhs = masked.probs[static_cast<std::size_t>(first)] *
                                   d.probs[static_cast<std::size_t>(a)];
                CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
            }
        } else {
            CHECK(masked.probs == d.probs);
        }

        // log_probs consistent with probs
        for (int a = 0; a < n; ++a) {
            if (masked.probs[static_cast<std::size_t>(a)] > 0.0)
                CHECK(std::exp(masked.log_probs[static_cast<std::size_t>(a)]) ==
                      doctest::Approx(masked.probs[static_cast<std::size_t>(a)]).epsilon(1e-9));
        }
    }
}

TEST_CASE("degenerate distribution always samples its support") {
    ActionDistribution d = ActionDistribution::from_probs({1.0, 0.0, 0.0});
    SeededRng rng(1, 0);
    for (int i = 0; i < 200; ++i) {
        auto [idx, logp] = sample(d, rng);
        CHECK(idx == 0);
        CHECK(logp == 0.0);
    }
}

TEST_CASE("masked-out actions are never sampled") {
    SeededRng rng(8, 8);
    ActionDistribution d = random_dist(rng, 6);
    ActionMask mask = mask_of({true, false, true, false, false, true});
    ActionDistribution masked = apply_mask(d, mask);
    for (int i = 0; i < 5000; ++i) {
        auto [idx, logp] = sample(masked, rng);
        CHECK(mask.allow[static_cast<std::size_t>(idx)]);
        CHECK(logp == masked.log_probs[static_cast<std::size_t>(idx)]);
    }
}

TEST_CASE("sampling frequencies track the distribution within 3 sigma") {
    ActionDistribution d = ActionDistribution::from_probs({0.25, 0.25, 0.25, 0.25});
    SeededRng rng(2024, 0);
    const int draws = 100'000;
    std::vector<int> counts(4, 0);
    for (int i = 0; i < draws; ++i) counts[static_cast<std::size_t>(sample(d, rng).first)]++;
    const double sigma = std::sqrt(0.25 * 0.75 * draws);
    for (int a = 0; a < 4; ++a)
        CHECK(std::abs(counts[static_cast<std::size_t>(a)] - 0.25 * draws) <= 3.0 * sigma);
}

TEST_CASE("non-finite probabilities are rejected at sampling") {
    ActionDistribution d = ActionDistribution::from_probs({0.5, 0.5});
    d.probs[0] = std::numeric_limits<double>::quiet_NaN();
    SeededRng rng(1, 1);
    CHECK_THROWS_AS(sample(d, rng), std::domain_error);
}
