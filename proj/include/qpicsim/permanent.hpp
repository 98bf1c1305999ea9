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

#include <algorithm>
#include <bit>
#include <cstdint>
#include <numeric>
#include <vector>

#include "complex_matrix.hpp"
#include "errors.hpp"

namespace qpicsim {

constexpr std::size_t kBruteforcePermanentMaxDim = 8;

inline double factorial(std::size_t n) {
    double f = 1.0;
    for (std::size_t i = 2; i <= n; ++i) {
        f *= static_cast<double>(i);
    }
    return f;
}

/// Permanent as the literal sum over all n! permutations. Reference oracle;
/// guarded to n <= 8.
inline cdouble permanent_bruteforce(const ComplexMatrix &m) {
    if (!m.is_square()) {
        throw invalid_input("permanent_bruteforce: matrix must be square");
    }
    const std::size_t n = m.rows();
    if (n > kBruteforcePermanentMaxDim) {
        throw invalid_input("permanent_bruteforce: dimension exceeds factorial-cost guard (n <= 8)");
    }
    std::vector<std::size_t> sigma(n);
    std::iota(sigma.begin(), sigma.end(), 0);
    cdouble total = 0.0;
    do {
        cdouble term = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            term *= m(i, sigma[i]);
        }
        total += term;
    } while (std::next_permutation(sigma.begin(), sigma.end()));
    return total;
}

/// Ryser's inclusion-exclusion formula with Gray-code subset iteration:
///   perm(A) = (-1)^n sum_{S != {}} (-1)^|S| prod_i sum_{j in S} a_ij
/// Each Gray-code step updates the cached row sums with one column.
inline cdouble permanent_ryser(const ComplexMatrix &m) {
    if (!m.is_square()) {
        throw invalid_input("permanent_ryser: matrix must be square");
    }
    const std::size_t n = m.rows();
    if (n > 62) {
        throw invalid_input("permanent_ryser: dimension exceeds subset-mask width");
    }
    if (n == 1) {
        return m(0, 0);
    }
    std::vector<cdouble> row_sums(n, cdouble{0.0, 0.0});
    cdouble total = 0.0;
    std::uint64_t prev_gray = 0;
    const std::uint64_t count = std::uint64_t{1} << n;
    for (std::uint64_t k = 1; k < count; ++k) {
        const std::uint64_t gray = k ^ (k >> 1);
        const std::uint64_t changed = gray ^ prev_gray;
        const int col = std::countr_zero(changed);
        const bool added = (gray & changed) != 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (added) {
                row_sums[i] += m(i, static_cast<std::size_t>(col));
            } else {
                row_sums[i] -= m(i, static_cast<std::size_t>(col));
            }
        }
        cdouble prod = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            prod *= row_sums[i];
        }
        const int popcount = std::popcount(gray);
        if (((n - static_cast<std::size_t>(popcount)) & 1u) == 0) {
            total += prod;
        } else {
            total -= prod;
        }
        prev_gray = gray;
    }
    return total;
}

}  // namespace qpicsim
