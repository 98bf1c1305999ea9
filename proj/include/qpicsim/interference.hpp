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
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "complex_matrix.hpp"
#include "errors.hpp"
#include "fock.hpp"
#include "permanent.hpp"

namespace qpicsim {

constexpr int kMaxInterferencePhotons = 4;

/// Pairwise overlaps of the photons' internal (spectral-temporal) states.
/// All-ones means ideal indistinguishable bosons, the identity fully
/// distinguishable particles. Hermitian, unit diagonal, positive semidefinite.
class GramMatrix {
   public:
    explicit GramMatrix(ComplexMatrix overlaps) : s_(std::move(overlaps)) {
        if (!s_.is_square()) {
            throw invalid_input("GramMatrix: matrix must be square");
        }
        const std::size_t n = s_.rows();
        for (std::size_t k = 0; k < n; ++k) {
            if (std::abs(s_(k, k) - cdouble{1.0, 0.0}) > 1e-10) {
                throw invalid_input("GramMatrix: diagonal must be 1");
            }
            for (std::size_t l = 0; l < n; ++l) {
                if (std::abs(s_(k, l) - std::conj(s_(l, k))) > 1e-10) {
                    throw invalid_input("GramMatrix: matrix must be Hermitian");
                }
                if (std::abs(s_(k, l)) > 1.0 + 1e-12) {
                    throw invalid_input("GramMatrix: overlap modulus exceeds 1");
                }
            }
        }
        const auto eigs = hermitian_eigenvalues(s_);
        if (!eigs.empty() && eigs.front() < -1e-12) {
            throw invalid_input("GramMatrix: not positive semidefinite");
        }
    }

    static GramMatrix ideal(std::size_t n) {
        ComplexMatrix m(n, n);
        for (std::size_t k = 0; k < n; ++k) {
            for (std::size_t l = 0; l < n; ++l) {
                m(k, l) = 1.0;
            }
        }
        return GramMatrix(std::move(m));
    }

    static GramMatrix distinguishable(std::size_t n) { return GramMatrix(ComplexMatrix::identity(n)); }

    /// Two photons with HOM visibility V: the single off-diagonal overlap is
    /// sqrt(V), taken real and non-negative.
    static GramMatrix pair_overlap(double visibility) {
        if (visibility < 0.0 || visibility > 1.0) {
            throw invalid_input("GramMatrix: visibility must lie in [0, 1]");
        }
        const double x = std::sqrt(visibility);
        ComplexMatrix m(2, 2);
        m(0, 0) = 1.0;
        m(1, 1) = 1.0;
        m(0, 1) = x;
        m(1, 0) = x;
        return GramMatrix(std::move(m));
    }

    std::size_t photon_count() const { return s_.rows(); }
    const cdouble &operator()(std::size_t k, std::size_t l) const { return s_(k, l); }
    const ComplexMatrix &matrix() const { return s_; }

   private:
    ComplexMatrix s_;
};

namespace detail {

inline const std::vector<std::vector<int>> &permutations_of(int n) {
    static const std::vector<std::vector<std::vector<int>>> cache = [] {
        std::vector<std::vector<std::vector<int>>> all(kMaxInterferencePhotons + 1);
        for (int k = 0; k <= kMaxInterferencePhotons; ++k) {
            std::vector<int> idx(static_cast<std::size_t>(k));
            std::iota(idx.begin(), idx.end(), 0);
            do {
                all[static_cast<std::size_t>(k)].push_back(idx);
            } while (std::next_permutation(idx.begin(), idx.end()));
        }
        return all;
    }();
    return cache[static_cast<std::size_t>(n)];
}

/// Squared norm of the input multi-photon state: sum over permutations that
/// only shuffle photons sharing an input mode of the Gram product. Equals
/// prod s_i! for ideal photons and 1 whenever the input is collision-free.
inline double input_state_norm(const GramMatrix &s, const std::vector<int> &input_assignment) {
    const int n = static_cast<int>(input_assignment.size());
    double norm = 0.0;
    for (const auto &sigma : permutations_of(n)) {
        bool preserves = true;
        for (int k = 0; k < n; ++k) {
            if (input_assignment[static_cast<std::size_t>(sigma[static_cast<std::size_t>(k)])] !=
                input_assignment[static_cast<std::size_t>(k)]) {
                preserves = false;
                break;
            }
        }
        if (!preserves) {
            continue;
        }
        cdouble term = 1.0;
        for (int k = 0; k < n; ++k) {
            term *= s(static_cast<std::size_t>(k), static_cast<std::size_t>(sigma[static_cast<std::size_t>(k)]));
        }
        norm += term.real();
    }
    return norm;
}

inline void require_interference_inputs(const UnitaryMatrix &u, const PhotonConfig &input, const GramMatrix &s) {
    if (input.num_modes() != u.dim()) {
        throw invalid_input("interference: occupation length does not match circuit modes");
    }
    const int n = input.photon_count();
    if (static_cast<std::size_t>(n) != s.photon_count()) {
        throw invalid_input("interference: Gram matrix size does not match photon number");
    }
    if (n < 1) {
        throw invalid_input("interference: at least one photon required");
    }
    if (n > kMaxInterferencePhotons) {
        throw invalid_input("interference: photon number exceeds supported maximum of 4");
    }
}

}  // namespace detail

/// Probability of detecting the given output occupation for partially
/// distinguishable photons. Double sum over permutation pairs weighted by
/// Gram products:
///   P = Re sum_{sigma, rho} prod_k S(sigma_k, rho_k) M(k, sigma_k) M*(k, rho_k)
///       / (norm * prod_j t_j!)
/// with M the scattering submatrix. The imaginary part must vanish; a residue
/// above 1e-12 signals a formula bug and throws rather than being rounded
/// away.
inline double output_probability(const UnitaryMatrix &u, const PhotonConfig &input, const PhotonConfig &output,
                                 const GramMatrix &s) {
    detail::require_interference_inputs(u, input, s);
    if (output.num_modes() != u.dim()) {
        throw invalid_input("interference: occupation length does not match circuit modes");
    }
    if (output.photon_count() != input.photon_count()) {
        throw invalid_input("interference: photon number mismatch between input and output");
    }
    const int n = input.photon_count();
    const ComplexMatrix m = scattering_submatrix(u, input, output);
    const auto &perms = detail::permutations_of(n);

    cdouble total = 0.0;
    for (const auto &sigma : perms) {
        cdouble forward = 1.0;
        for (int k = 0; k < n; ++k) {
            forward *= m(static_cast<std::size_t>(k), static_cast<std::size_t>(sigma[static_cast<std::size_t>(k)]));
        }
        if (forward == cdouble{0.0, 0.0}) {
            continue;
        }
        for (const auto &rho : perms) {
            cdouble term = forward;
            for (int k = 0; k < n; ++k) {
                const std::size_t sk = static_cast<std::size_t>(sigma[static_cast<std::size_t>(k)]);
                const std::size_t rk = static_cast<std::size_t>(rho[static_cast<std::size_t>(k)]);
                term *= s(sk, rk) * std::conj(m(static_cast<std::size_t>(k), rk));
            }
            total += term;
        }
    }

    if (std::abs(total.imag()) > 1e-12 * std::max(1.0, std::abs(total.real()))) {
        throw std::logic_error("output_probability: non-real probability, imaginary residue " +
                               std::to_string(total.imag()));
    }

    double denom = detail::input_state_norm(s, input.assignment_list());
    for (int occ : output.occupations()) {
        denom *= factorial(static_cast<std::size_t>(occ));
    }
    const double p = total.real() / denom;
    return std::clamp(p, 0.0, 1.0);
}

namespace detail {

inline void enumerate_occupations(int modes, int photons, std::vector<int> &prefix,
                                  std::vector<std::vector<int>> &out) {
    if (modes == 1) {
        prefix.push_back(photons);
        out.push_back(prefix);
        prefix.pop_back();
        return;
    }
    for (int k = photons; k >= 0; --k) {
        prefix.push_back(k);
        enumerate_occupations(modes - 1, photons - k, prefix, out);
        prefix.pop_back();
    }
}

}  // namespace detail

/// Probabilities over all output occupations (or only the collision-free
/// subset, renormalized, when requested for comparison with threshold
/// detectors). The full map sums to 1 within 1e-9.
inline std::map<PhotonConfig, double> full_distribution(const UnitaryMatrix &u, const PhotonConfig &input,
                                                        const GramMatrix &s, bool collision_free) {
    detail::require_interference_inputs(u, input, s);
    const int n = input.photon_count();
    std::vector<std::vector<int>> occupations;
    std::vector<int> prefix;
    detail::enumerate_occupations(static_cast<int>(u.dim()), n, prefix, occupations);

    std::map<PhotonConfig, double> dist;
    double kept_weight = 0.0;
    for (auto &occ : occupations) {
        PhotonConfig out(occ);
        if (collision_free && !out.collision_free()) {
            continue;
        }
        const double p = output_probability(u, input, out, s);
        kept_weight += p;
        dist.emplace(std::move(out), p);
    }
    if (collision_free) {
        if (kept_weight <= 0.0) {
            throw invalid_input("full_distribution: collision-free subset has zero probability");
        }
        for (auto &[cfg, p] : dist) {
            p /= kept_weight;
        }
    }
    return dist;
}

enum class SuppressionVerdict { suppressed, allowed, not_applicable };

/// Zero-transmission law for the m-mode DFT: a cyclic input (modes spaced by
/// m/n) suppresses every output whose mode labels c_i satisfy
/// sum_i (c_i mod n) != 0 (mod n). Returns not_applicable for non-cyclic
/// inputs, including when n does not divide m.
inline SuppressionVerdict suppression_predicate(const PhotonConfig &input, const PhotonConfig &output, int m) {
    if (static_cast<int>(input.num_modes()) != m || static_cast<int>(output.num_modes()) != m) {
        throw invalid_input("suppression_predicate: occupation length does not match mode count");
    }
    const int n = input.photon_count();
    if (output.photon_count() != n) {
        throw invalid_input("suppression_predicate: photon number mismatch");
    }
    if (n < 1) {
        throw invalid_input("suppression_predicate: at least one photon required");
    }

    bool cyclic = input.collision_free() && m % n == 0;
    if (cyclic) {
        const std::vector<int> modes = input.assignment_list();
        const int gap = m / n;
        for (std::size_t k = 0; k + 1 < modes.size(); ++k) {
            if (modes[k + 1] - modes[k] != gap) {
                cyclic = false;
                break;
            }
        }
    }
    if (!cyclic) {
        return SuppressionVerdict::not_applicable;
    }

    int total = 0;
    for (int mode0 : output.assignment_list()) {
        total += (mode0 + 1) % n;  // 1-based output mode labels enter the sum rule
    }
    return total % n != 0 ? SuppressionVerdict::suppressed : SuppressionVerdict::allowed;
}

/// Cross-output coincidence probability of one photon per MZI input as a
/// function of internal phase and indistinguishability:
///   P(theta, V) = V cos^2(theta) + (1 - V)(1 + cos^2(theta)) / 2.
/// Matches output_probability on the two-mode mesh under the library's
/// beam-splitter convention.
inline double mzi_fringe(double theta, double visibility) {
    if (visibility < 0.0 || visibility > 1.0) {
        throw invalid_input("mzi_fringe: visibility must lie in [0, 1]");
    }
    const double c2 = std::cos(theta) * std::cos(theta);
    return visibility * c2 + (1.0 - visibility) * 0.5 * (1.0 + c2);
}

}  // namespace qpicsim
