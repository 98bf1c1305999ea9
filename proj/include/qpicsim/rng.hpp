// Copyright 2026 The qpicsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "errors.hpp"

namespace qpicsim {

/// Seeded random source with explicit conversion formulas so that streams are
/// reproducible bit-for-bit for a given seed, independent of standard-library
/// distribution internals.
class Rng {
   public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Exponential with the given mean (inverse-CDF).
    double exponential(double mean) { return -mean * std::log1p(-uniform01()); }

    /// Standard normal via Box-Muller (one fresh pair per call, no cache).
    double gaussian() {
        double u1 = uniform01();
        while (u1 <= 0.0) {
            u1 = uniform01();
        }
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    double gaussian(double mean, double sigma) { return mean + sigma * gaussian(); }

    /// Poisson draw: Knuth product method for small means, PTRS transformed
    /// rejection for large ones.
    std::uint64_t poisson(double mean) {
        if (mean < 0.0) {
            throw invalid_input("Rng::poisson: negative mean");
        }
        if (mean == 0.0) {
            return 0;
        }
        if (mean < 30.0) {
            const double limit = std::exp(-mean);
            std::uint64_t k = 0;
            double prod = uniform01();
            while (prod > limit) {
                ++k;
                prod *= uniform01();
            }
            return k;
        }
        // Hörmann's PTRS rejection sampler.
        const double b = 0.931 + 2.53 * std::sqrt(mean);
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double v_r = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            double u = uniform01() - 0.5;
            double v = uniform01();
            const double us = 0.5 - std::abs(u);
            const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
            if (us >= 0.07 && v <= v_r) {
                return static_cast<std::uint64_t>(k);
            }
            if (k < 0.0 || (us < 0.013 && v > us)) {
                continue;
            }
            if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
                k * std::log(mean) - mean - std::lgamma(k + 1.0)) {
                return static_cast<std::uint64_t>(k);
            }
        }
    }

    /// Index drawn according to the (unnormalized) weights.
    std::size_t categorical(const std::vector<double> &weights) {
        double total = 0.0;
        for (double w : weights) {
            if (w < 0.0) {
                throw invalid_input("Rng::categorical: negative weight");
            }
            total += w;
        }
        if (total <= 0.0) {
            throw invalid_input("Rng::categorical: weights sum to zero");
        }
        double x = uniform01() * total;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            x -= weights[i];
            if (x < 0.0) {
                return i;
            }
        }
        return weights.size() - 1;
    }

    std::uint64_t raw() { return engine_(); }

   private:
    std::mt19937_64 engine_;
};

}  // namespace qpicsim
