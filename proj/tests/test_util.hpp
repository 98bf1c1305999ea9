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
#include <cstddef>
#include <vector>

#include "qpicsim/complex_matrix.hpp"
#include "qpicsim/interference.hpp"
#include "qpicsim/rng.hpp"
#include "qpicsim/tomography.hpp"

namespace testutil {

using qpicsim::cdouble;
using qpicsim::ComplexMatrix;
using qpicsim::Rng;

inline bool rel_close(cdouble a, cdouble b, double tol) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-30});
    return std::abs(a - b) <= tol * scale;
}

inline cdouble random_unit_disk(Rng &rng) {
    const double r = std::sqrt(rng.uniform01());
    const double phi = rng.uniform(0.0, 2.0 * qpicsim::kPi);
    return std::polar(r, phi);
}

inline ComplexMatrix random_matrix(std::size_t n, Rng &rng) {
    ComplexMatrix m(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            m(r, c) = random_unit_disk(rng);
        }
    }
    return m;
}

/// Haar-random unitary: complex Ginibre matrix, modified Gram-Schmidt, then
/// the R-diagonal phase fix.
inline qpicsim::UnitaryMatrix haar_unitary(std::size_t n, Rng &rng) {
    std::vector<std::vector<cdouble>> cols(n, std::vector<cdouble>(n));
    for (auto &col : cols) {
        for (auto &v : col) {
            v = cdouble{rng.gaussian(), rng.gaussian()};
        }
    }
    std::vector<cdouble> r_diag(n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < j; ++k) {
            cdouble proj = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                proj += std::conj(cols[k][i]) * cols[j][i];
            }
            for (std::size_t i = 0; i < n; ++i) {
                cols[j][i] -= proj * cols[k][i];
            }
        }
        double norm = 0.0;
        for (const auto &v : cols[j]) {
            norm += std::norm(v);
        }
        norm = std::sqrt(norm);
        cdouble pivot = cols[j][j];
        if (std::abs(pivot) == 0.0) {
            pivot = 1.0;
        }
        r_diag[j] = pivot / std::abs(pivot);
        for (auto &v : cols[j]) {
            v /= norm;
        }
    }
    ComplexMatrix u(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            u(i, j) = cols[j][i] * std::conj(r_diag[j]);
        }
    }
    return qpicsim::UnitaryMatrix(std::move(u));
}

/// Random valid Gram matrix from normalized random internal-state vectors in
/// a dim-dimensional space.
inline qpicsim::GramMatrix random_gram(std::size_t n, Rng &rng, std::size_t dim = 4) {
    std::vector<std::vector<cdouble>> states(n, std::vector<cdouble>(dim));
    for (auto &v : states) {
        double norm = 0.0;
        for (auto &x : v) {
            x = cdouble{rng.gaussian(), rng.gaussian()};
            norm += std::norm(x);
        }
        norm = std::sqrt(norm);
        for (auto &x : v) {
            x /= norm;
        }
    }
    ComplexMatrix s(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t l = 0; l < n; ++l) {
            cdouble inner = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                inner += std::conj(states[k][i]) * states[l][i];
            }
            s(k, l) = inner;
        }
        s(k, k) = 1.0;
    }
    return qpicsim::GramMatrix(std::move(s));
}

/// Concurrence of a near-pure two-qubit state via its dominant eigenvector:
/// C = |<psi*| Y x Y |psi>|.
inline double concurrence_pure(const qpicsim::TwoQubitState &state) {
    const auto eig = qpicsim::hermitian_eigen(state.rho());
    std::vector<cdouble> psi(4);
    for (std::size_t i = 0; i < 4; ++i) {
        psi[i] = eig.vectors(i, 3);  // eigenvalues ascending
    }
    // Y x Y = antidiag(-1, 1, 1, -1) in the computational basis.
    const cdouble val = -psi[0] * psi[3] + psi[1] * psi[2] + psi[2] * psi[1] - psi[3] * psi[0];
    return std::abs(val);
}

/// O(N^2) coincidence-count oracle used against the two-pointer sweep.
inline std::uint64_t pair_count_oracle(const std::vector<double> &a, const std::vector<double> &b, double offset,
                                       double half) {
    std::uint64_t count = 0;
    for (double ta : a) {
        for (double tb : b) {
            const double d = tb - ta - offset;
            if (d >= -half && d < half) {
                ++count;
            }
        }
    }
    return count;
}

}  // namespace testutil
