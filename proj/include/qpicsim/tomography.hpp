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

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "complex_matrix.hpp"
#include "errors.hpp"
#include "fock.hpp"
#include "interference.hpp"
#include "mesh.hpp"
#include "rng.hpp"

namespace qpicsim {

/// Density matrix of the post-selected path-encoded qubit pair in the basis
/// {|00>, |01>, |10>, |11>} with mode 1 -> |0>_1, 2 -> |1>_1, 3 -> |0>_2,
/// 4 -> |1>_2 (1-based mode labels).
class TwoQubitState {
   public:
    explicit TwoQubitState(ComplexMatrix rho) : rho_(std::move(rho)) {
        if (rho_.rows() != 4 || rho_.cols() != 4) {
            throw invalid_input("TwoQubitState: density matrix must be 4x4");
        }
        for (std::size_t r = 0; r < 4; ++r) {
            for (std::size_t c = 0; c < 4; ++c) {
                if (std::abs(rho_(r, c) - std::conj(rho_(c, r))) > 1e-10) {
                    throw invalid_input("TwoQubitState: density matrix must be Hermitian");
                }
            }
        }
        if (std::abs(rho_.trace() - cdouble{1.0, 0.0}) > 1e-10) {
            throw invalid_input("TwoQubitState: trace must be 1");
        }
        const auto eigs = hermitian_eigenvalues(rho_);
        if (eigs.front() < -1e-9) {
            throw invalid_input("TwoQubitState: not positive semidefinite, min eigenvalue " +
                                std::to_string(eigs.front()));
        }
    }

    static TwoQubitState from_pure(const std::array<cdouble, 4> &amplitudes) {
        double norm = 0.0;
        for (const auto &a : amplitudes) {
            norm += std::norm(a);
        }
        if (norm <= 0.0) {
            throw invalid_input("TwoQubitState: zero state vector");
        }
        ComplexMatrix rho(4, 4);
        for (std::size_t r = 0; r < 4; ++r) {
            for (std::size_t c = 0; c < 4; ++c) {
                rho(r, c) = amplitudes[r] * std::conj(amplitudes[c]) / norm;
            }
        }
        return TwoQubitState(std::move(rho));
    }

    static TwoQubitState maximally_mixed() {
        ComplexMatrix rho(4, 4);
        for (std::size_t i = 0; i < 4; ++i) {
            rho(i, i) = 0.25;
        }
        return TwoQubitState(std::move(rho));
    }

    const ComplexMatrix &rho() const { return rho_; }
    const cdouble &operator()(std::size_t r, std::size_t c) const { return rho_(r, c); }

   private:
    ComplexMatrix rho_;
};

enum class PauliAxis { X, Y, Z };

/// Two-qubit Pauli measurement setting; realized on hardware by the output
/// analysis MZIs.
struct PauliSetting {
    PauliAxis basis_1 = PauliAxis::Z;
    PauliAxis basis_2 = PauliAxis::Z;

    std::string name() const {
        auto letter = [](PauliAxis a) {
            switch (a) {
                case PauliAxis::X:
                    return 'X';
                case PauliAxis::Y:
                    return 'Y';
                default:
                    return 'Z';
            }
        };
        return std::string{letter(basis_1), letter(basis_2)};
    }
};

inline PauliAxis pauli_axis_from_char(char c) {
    switch (c) {
        case 'X':
            return PauliAxis::X;
        case 'Y':
            return PauliAxis::Y;
        case 'Z':
            return PauliAxis::Z;
        default:
            throw invalid_input(std::string("unknown Pauli axis '") + c + "'");
    }
}

/// The nine two-qubit Pauli settings in row-major order XX, XY, ..., ZZ.
inline std::vector<PauliSetting> all_pauli_settings() {
    std::vector<PauliSetting> out;
    for (PauliAxis a : {PauliAxis::X, PauliAxis::Y, PauliAxis::Z}) {
        for (PauliAxis b : {PauliAxis::X, PauliAxis::Y, PauliAxis::Z}) {
            out.push_back({a, b});
        }
    }
    return out;
}

/// Analysis MZI phases realizing a single-qubit basis change: Z keeps the bar
/// state (theta = pi), X and Y use a 50:50 cell (theta = pi/2) with external
/// phase 0 and pi/2.
inline std::pair<double, double> analysis_mzi_phases(PauliAxis axis) {
    switch (axis) {
        case PauliAxis::Z:
            return {kPi, 0.0};
        case PauliAxis::X:
            return {kPi / 2.0, 0.0};
        default:
            return {kPi / 2.0, kPi / 2.0};
    }
}

inline ComplexMatrix pauli_matrix(PauliAxis axis) {
    switch (axis) {
        case PauliAxis::X:
            return ComplexMatrix{{0.0, 1.0}, {1.0, 0.0}};
        case PauliAxis::Y:
            return ComplexMatrix{{0.0, cdouble{0.0, -1.0}}, {cdouble{0.0, 1.0}, 0.0}};
        default:
            return ComplexMatrix{{1.0, 0.0}, {0.0, -1.0}};
    }
}

inline ComplexMatrix kron(const ComplexMatrix &a, const ComplexMatrix &b) {
    ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (std::size_t ar = 0; ar < a.rows(); ++ar) {
        for (std::size_t ac = 0; ac < a.cols(); ++ac) {
            for (std::size_t br = 0; br < b.rows(); ++br) {
                for (std::size_t bc = 0; bc < b.cols(); ++bc) {
                    out(ar * b.rows() + br, ac * b.cols() + bc) = a(ar, ac) * b(br, bc);
                }
            }
        }
    }
    return out;
}

inline std::array<cdouble, 4> bell_psi_plus() {
    const double r = 1.0 / std::sqrt(2.0);
    return {0.0, r, r, 0.0};
}

inline std::array<cdouble, 4> bell_phi_minus() {
    const double r = 1.0 / std::sqrt(2.0);
    return {r, 0.0, 0.0, -r};
}

struct degenerate_postselection : std::runtime_error {
    explicit degenerate_postselection(const std::string &msg) : std::runtime_error(msg) {}
};

/// Post-selected two-qubit block for one photon injected into each of modes
/// 1 and 3. Coherences between the four cross-pair output configurations are
/// built with the same permutation-pair machinery as probabilities; the
/// success probability is the trace of the unnormalized block.
inline std::pair<TwoQubitState, double> postselect_two_qubit(const UnitaryMatrix &u, const PhotonConfig &input,
                                                             const GramMatrix &s) {
    if (u.dim() != 4) {
        throw invalid_input("postselect_two_qubit: circuit must have 4 modes");
    }
    if (input.num_modes() != 4 || input.occupations() != std::vector<int>{1, 0, 1, 0}) {
        throw invalid_input("postselect_two_qubit: input must be one photon in each of modes 1 and 3");
    }
    if (s.photon_count() != 2) {
        throw invalid_input("postselect_two_qubit: Gram matrix must be 2x2");
    }

    // Output assignment lists for |00>, |01>, |10>, |11>.
    constexpr std::array<std::array<std::size_t, 2>, 4> outcome_modes = {{{0, 2}, {0, 3}, {1, 2}, {1, 3}}};
    constexpr std::array<std::size_t, 2> in_modes = {0, 2};

    // M(d)[k][l] = U(d_k, s_l); with n = 2 the permutation-pair sum has four
    // (sigma, rho) terms per matrix element.
    auto amp = [&](std::size_t d, std::size_t k, std::size_t l) { return u(outcome_modes[d][k], in_modes[l]); };

    ComplexMatrix block(4, 4);
    const std::array<std::array<std::size_t, 2>, 2> perms = {{{0, 1}, {1, 0}}};
    for (std::size_t d = 0; d < 4; ++d) {
        for (std::size_t e = 0; e < 4; ++e) {
            cdouble sum = 0.0;
            for (const auto &sigma : perms) {
                for (const auto &rho : perms) {
                    cdouble term = 1.0;
                    for (std::size_t k = 0; k < 2; ++k) {
                        term *= s(sigma[k], rho[k]) * amp(d, k, sigma[k]) * std::conj(amp(e, k, rho[k]));
                    }
                    sum += term;
                }
            }
            block(d, e) = sum;
        }
    }

    const double success = block.trace().real();
    if (success < 1e-15) {
        throw degenerate_postselection("postselect_two_qubit: post-selection succeeds with zero probability");
    }
    ComplexMatrix rho(4, 4);
    for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t c = 0; c < 4; ++c) {
            rho(r, c) = block(r, c) / success;
        }
    }
    return {TwoQubitState(std::move(rho)), success};
}

/// Mesh whose post-selected output state is the Bell state
/// (|01> + |10>)/sqrt(2). Output phases alone cannot rotate the raw DFT state
/// (|00> - |11>)/sqrt(2) onto it, so a local correction on the second qubit's
/// mode pair is composed with the DFT before compilation; the result is
/// verified against the post-selection oracle in the test suite.
inline MeshConfig bell_settings() {
    const UnitaryMatrix dft = dft_unitary(4);
    ComplexMatrix correction = ComplexMatrix::identity(4);
    correction(2, 2) = 0.0;
    correction(2, 3) = -1.0;
    correction(3, 2) = 1.0;
    correction(3, 3) = 0.0;
    return compile_unitary(UnitaryMatrix(correction * dft.matrix()));
}

/// tr(rho sigma_1 x sigma_2).
inline double pauli_expectation(const TwoQubitState &state, const PauliSetting &setting) {
    const ComplexMatrix op = kron(pauli_matrix(setting.basis_1), pauli_matrix(setting.basis_2));
    cdouble tr = 0.0;
    for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t c = 0; c < 4; ++c) {
            tr += state(r, c) * op(c, r);
        }
    }
    return tr.real();
}

namespace detail {

inline ComplexMatrix analysis_layer(const PauliSetting &setting) {
    ComplexMatrix a = ComplexMatrix::identity(4);
    const auto [t1, p1] = analysis_mzi_phases(setting.basis_1);
    const auto [t2, p2] = analysis_mzi_phases(setting.basis_2);
    apply_two_mode_left(a, 0, mzi_block(t1, p1));
    apply_two_mode_left(a, 2, mzi_block(t2, p2));
    return a;
}

/// Projector onto the outcome pair (o1, o2), o = 0 for the +1 eigenstate.
inline ComplexMatrix outcome_projector(const PauliSetting &setting, int o1, int o2) {
    auto proj = [](PauliAxis axis, int o) {
        ComplexMatrix p = pauli_matrix(axis);
        const double sign = o == 0 ? 1.0 : -1.0;
        ComplexMatrix out(2, 2);
        for (std::size_t r = 0; r < 2; ++r) {
            for (std::size_t c = 0; c < 2; ++c) {
                out(r, c) = 0.5 * (sign * p(r, c) + (r == c ? 1.0 : 0.0));
            }
        }
        return out;
    };
    return kron(proj(setting.basis_1, o1), proj(setting.basis_2, o2));
}

}  // namespace detail

/// Post-selected four-outcome distribution of one Pauli-pair measurement on
/// the state prepared by the mesh: the analysis cells are appended to the
/// preparation circuit and the cross-pair detection patterns renormalized.
/// Outcome order 00, 01, 10, 11 (0 = +1 eigenvalue).
inline std::array<double, 4> tomography_outcome_probabilities(const MeshConfig &prep, const GramMatrix &s,
                                                              const PauliSetting &setting) {
    const UnitaryMatrix u_prep = mesh_to_unitary(prep);
    const ComplexMatrix u_tot = detail::analysis_layer(setting) * u_prep.matrix();
    const auto [state, success] =
        postselect_two_qubit(UnitaryMatrix(u_tot), PhotonConfig({1, 0, 1, 0}), s);
    std::array<double, 4> probs{};
    for (std::size_t d = 0; d < 4; ++d) {
        probs[d] = std::max(state(d, d).real(), 0.0);
    }
    return probs;
}

/// Same four-outcome distribution computed directly from a two-qubit state.
inline std::array<double, 4> tomography_outcome_probabilities(const TwoQubitState &state,
                                                              const PauliSetting &setting) {
    std::array<double, 4> probs{};
    for (int o1 = 0; o1 < 2; ++o1) {
        for (int o2 = 0; o2 < 2; ++o2) {
            const ComplexMatrix proj = detail::outcome_projector(setting, o1, o2);
            cdouble tr = 0.0;
            for (std::size_t r = 0; r < 4; ++r) {
                for (std::size_t c = 0; c < 4; ++c) {
                    tr += state(r, c) * proj(c, r);
                }
            }
            probs[static_cast<std::size_t>(o1 * 2 + o2)] = std::max(tr.real(), 0.0);
        }
    }
    return probs;
}

/// Multinomial counts for the nine Pauli-pair settings, outcome order
/// 00, 01, 10, 11 per setting. Deterministic in the seed.
using TomographyCounts = std::map<std::string, std::array<std::uint64_t, 4>>;

namespace detail {

inline TomographyCounts draw_tomography_counts(
    const std::vector<std::pair<std::string, std::array<double, 4>>> &distributions, std::uint64_t shots_per_setting,
    std::uint64_t seed) {
    if (shots_per_setting < 1) {
        throw invalid_input("simulate_tomography_counts: need at least one shot per setting");
    }
    Rng rng(seed);
    TomographyCounts counts;
    for (const auto &[name, probs] : distributions) {
        std::array<std::uint64_t, 4> c{};
        const std::vector<double> weights(probs.begin(), probs.end());
        for (std::uint64_t k = 0; k < shots_per_setting; ++k) {
            c[rng.categorical(weights)] += 1;
        }
        counts[name] = c;
    }
    return counts;
}

}  // namespace detail

inline TomographyCounts simulate_tomography_counts(const MeshConfig &prep, const GramMatrix &s,
                                                   std::uint64_t shots_per_setting, std::uint64_t seed) {
    std::vector<std::pair<std::string, std::array<double, 4>>> dists;
    for (const auto &setting : all_pauli_settings()) {
        dists.emplace_back(setting.name(), tomography_outcome_probabilities(prep, s, setting));
    }
    return detail::draw_tomography_counts(dists, shots_per_setting, seed);
}

inline TomographyCounts simulate_tomography_counts(const TwoQubitState &state, std::uint64_t shots_per_setting,
                                                   std::uint64_t seed) {
    std::vector<std::pair<std::string, std::array<double, 4>>> dists;
    for (const auto &setting : all_pauli_settings()) {
        dists.emplace_back(setting.name(), tomography_outcome_probabilities(state, setting));
    }
    return detail::draw_tomography_counts(dists, shots_per_setting, seed);
}

/// F = <psi| rho |psi> against a pure target.
inline double fidelity(const TwoQubitState &state, const std::array<cdouble, 4> &target) {
    double norm = 0.0;
    for (const auto &a : target) {
        norm += std::norm(a);
    }
    if (norm <= 0.0) {
        throw invalid_input("fidelity: zero target vector");
    }
    cdouble f = 0.0;
    for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t c = 0; c < 4; ++c) {
            f += std::conj(target[r]) * state(r, c) * target[c];
        }
    }
    return f.real() / norm;
}

/// Linear-inversion estimate from the nine settings (single-qubit terms from
/// averaged marginals). Diagnostic only: the result may be unphysical.
inline ComplexMatrix linear_inversion(const TomographyCounts &counts) {
    auto expectation = [&](const std::string &name, int which) {
        const auto it = counts.find(name);
        if (it == counts.end()) {
            throw invalid_input("linear_inversion: missing setting " + name);
        }
        const auto &c = it->second;
        const double total = static_cast<double>(c[0] + c[1] + c[2] + c[3]);
        if (total <= 0.0) {
            throw invalid_input("linear_inversion: empty counts for setting " + name);
        }
        // which = 0: <s1 s2>; 1: <s1 I>; 2: <I s2>.
        double value = 0.0;
        for (int o1 = 0; o1 < 2; ++o1) {
            for (int o2 = 0; o2 < 2; ++o2) {
                double sign = 1.0;
                if (which == 0) {
                    sign = ((o1 + o2) % 2 == 0) ? 1.0 : -1.0;
                } else if (which == 1) {
                    sign = o1 == 0 ? 1.0 : -1.0;
                } else {
                    sign = o2 == 0 ? 1.0 : -1.0;
                }
                value += sign * static_cast<double>(c[static_cast<std::size_t>(o1 * 2 + o2)]);
            }
        }
        return value / total;
    };

    const std::array<char, 3> axes = {'X', 'Y', 'Z'};
    ComplexMatrix rho(4, 4);
    for (std::size_t i = 0; i < 4; ++i) {
        rho(i, i) += 0.25;
    }
    for (char a : axes) {
        double single = 0.0;
        for (char b : axes) {
            single += expectation(std::string{a, b}, 1);
        }
        const ComplexMatrix op = kron(pauli_matrix(pauli_axis_from_char(a)), ComplexMatrix::identity(2));
        for (std::size_t r = 0; r < 4; ++r) {
            for (std::size_t c = 0; c < 4; ++c) {
                rho(r, c) += 0.25 * (single / 3.0) * op(r, c);
            }
        }
    }
    for (char b : axes) {
        double single = 0.0;
        for (char a : axes) {
            single += expectation(std::string{a, b}, 2);
        }
        const ComplexMatrix op = kron(ComplexMatrix::identity(2), pauli_matrix(pauli_axis_from_char(b)));
        for (std::size_t r = 0; r < 4; ++r) {
            for (std::size_t c = 0; c < 4; ++c) {
                rho(r, c) += 0.25 * (single / 3.0) * op(r, c);
            }
        }
    }
    for (char a : axes) {
        for (char b : axes) {
            const double pair = expectation(std::string{a, b}, 0);
            const ComplexMatrix op = kron(pauli_matrix(pauli_axis_from_char(a)), pauli_matrix(pauli_axis_from_char(b)));
            for (std::size_t r = 0; r < 4; ++r) {
                for (std::size_t c = 0; c < 4; ++c) {
                    rho(r, c) += 0.25 * pair * op(r, c);
                }
            }
        }
    }
    return rho;
}

struct MleResult {
    TwoQubitState state;
    double log_likelihood = 0.0;
    int iterations = 0;
    int restarts_used = 0;
};

struct reconstruction_failure : std::runtime_error {
    reconstruction_failure(const std::string &msg, MleResult best)
        : std::runtime_error(msg), best_iterate(std::move(best)) {}
    MleResult best_iterate;
};

namespace detail {

/// 16 real parameters -> lower-triangular T (real diagonal first, then
/// row-major complex sub-diagonal entries).
inline ComplexMatrix t_from_params(const std::array<double, 16> &x) {
    ComplexMatrix t(4, 4);
    for (std::size_t i = 0; i < 4; ++i) {
        t(i, i) = x[i];
    }
    std::size_t idx = 4;
    for (std::size_t r = 1; r < 4; ++r) {
        for (std::size_t c = 0; c < r; ++c) {
            t(r, c) = cdouble{x[idx], x[idx + 1]};
            idx += 2;
        }
    }
    return t;
}

inline ComplexMatrix rho_from_t(const ComplexMatrix &t, double *trace_out) {
    ComplexMatrix g = t.adjoint() * t;
    const double s = g.trace().real();
    if (trace_out != nullptr) {
        *trace_out = s;
    }
    ComplexMatrix rho(4, 4);
    for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t c = 0; c < 4; ++c) {
            rho(r, c) = g(r, c) / s;
        }
    }
    return rho;
}

/// Lower-triangular T with T†T = rho (exists for any PSD matrix; computed as
/// a Cholesky factorization of the index-reversed matrix).
inline ComplexMatrix lower_t_from_rho(const ComplexMatrix &rho) {
    const std::size_t n = rho.rows();
    ComplexMatrix flipped(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            flipped(r, c) = rho(n - 1 - r, n - 1 - c);
        }
    }
    // Cholesky flipped = L L†.
    ComplexMatrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        cdouble diag = flipped(j, j);
        for (std::size_t k = 0; k < j; ++k) {
            diag -= l(j, k) * std::conj(l(j, k));
        }
        const double d = std::sqrt(std::max(diag.real(), 1e-12));
        l(j, j) = d;
        for (std::size_t i = j + 1; i < n; ++i) {
            cdouble v = flipped(i, j);
            for (std::size_t k = 0; k < j; ++k) {
                v -= l(i, k) * std::conj(l(j, k));
            }
            l(i, j) = v / d;
        }
    }
    // rho = U U† with U = J L J upper triangular, so T = U†.
    ComplexMatrix t(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            t(r, c) = std::conj(l(n - 1 - c, n - 1 - r));
        }
    }
    return t;
}

}  // namespace detail

/// Maximum-likelihood reconstruction over the Cholesky parametrization
/// rho = T†T / tr(T†T), T lower-triangular with 16 real parameters. L-BFGS
/// with analytic gradients and Armijo backtracking; converged when the
/// parameter step drops below 1e-9. Restarts from perturbed and canonical
/// starting points; failure after the restart budget raises
/// reconstruction_failure carrying the best iterate.
inline MleResult mle_reconstruct(const TomographyCounts &counts) {
    const auto settings = all_pauli_settings();
    std::vector<ComplexMatrix> projectors;
    std::vector<double> observed;
    double total_counts = 0.0;
    for (const auto &setting : settings) {
        const auto it = counts.find(setting.name());
        if (it == counts.end()) {
            throw invalid_input("mle_reconstruct: missing setting " + setting.name());
        }
        std::uint64_t setting_total = 0;
        for (int o1 = 0; o1 < 2; ++o1) {
            for (int o2 = 0; o2 < 2; ++o2) {
                projectors.push_back(detail::outcome_projector(setting, o1, o2));
                const auto n = it->second[static_cast<std::size_t>(o1 * 2 + o2)];
                observed.push_back(static_cast<double>(n));
                setting_total += n;
            }
        }
        if (setting_total == 0) {
            throw invalid_input("mle_reconstruct: zero total counts for setting " + setting.name());
        }
        total_counts += static_cast<double>(setting_total);
    }

    const std::size_t dim = 16;
    auto eval = [&](const std::array<double, 16> &x, std::array<double, 16> *grad_out) {
        const ComplexMatrix t = detail::t_from_params(x);
        double s = 0.0;
        const ComplexMatrix rho = detail::rho_from_t(t, &s);
        double nll = 0.0;
        ComplexMatrix r_sum(4, 4);
        for (std::size_t k = 0; k < projectors.size(); ++k) {
            cdouble tr = 0.0;
            for (std::size_t a = 0; a < 4; ++a) {
                for (std::size_t b = 0; b < 4; ++b) {
                    tr += rho(a, b) * projectors[k](b, a);
                }
            }
            const double p = std::max(tr.real(), 1e-14);
            nll -= observed[k] * std::log(p);
            if (grad_out != nullptr && observed[k] > 0.0) {
                const double wk = observed[k] / p;
                for (std::size_t a = 0; a < 4; ++a) {
                    for (std::size_t b = 0; b < 4; ++b) {
                        r_sum(a, b) += wk * projectors[k](a, b);
                    }
                }
            }
        }
        if (grad_out != nullptr) {
            // dNLL/dT* = -(1/s) T (R - N I), restricted to the triangle.
            ComplexMatrix inner = r_sum;
            for (std::size_t i = 0; i < 4; ++i) {
                inner(i, i) -= total_counts;
            }
            const ComplexMatrix g = cdouble{-1.0 / s, 0.0} * (t * inner);
            auto &grad = *grad_out;
            for (std::size_t i = 0; i < 4; ++i) {
                grad[i] = 2.0 * g(i, i).real();
            }
            std::size_t idx = 4;
            for (std::size_t r = 1; r < 4; ++r) {
                for (std::size_t c = 0; c < r; ++c) {
                    grad[idx] = 2.0 * g(r, c).real();
                    grad[idx + 1] = 2.0 * g(r, c).imag();
                    idx += 2;
                }
            }
        }
        return nll;
    };

    auto optimize = [&](std::array<double, 16> x, int max_iters, int *iters_out) {
        constexpr int history = 8;
        std::vector<std::array<double, 16>> s_hist;
        std::vector<std::array<double, 16>> y_hist;
        std::vector<double> rho_hist;
        std::array<double, 16> grad{};
        double f = eval(x, &grad);
        bool converged = false;
        int iter = 0;
        for (; iter < max_iters; ++iter) {
            // Two-loop recursion.
            std::array<double, 16> q = grad;
            std::vector<double> alpha(s_hist.size());
            for (std::size_t h = s_hist.size(); h-- > 0;) {
                double sq = 0.0;
                for (std::size_t i = 0; i < dim; ++i) {
                    sq += s_hist[h][i] * q[i];
                }
                alpha[h] = rho_hist[h] * sq;
                for (std::size_t i = 0; i < dim; ++i) {
                    q[i] -= alpha[h] * y_hist[h][i];
                }
            }
            double gamma = 1.0;
            if (!s_hist.empty()) {
                double sy = 0.0;
                double yy = 0.0;
                for (std::size_t i = 0; i < dim; ++i) {
                    sy += s_hist.back()[i] * y_hist.back()[i];
                    yy += y_hist.back()[i] * y_hist.back()[i];
                }
                if (yy > 0.0) {
                    gamma = sy / yy;
                }
            }
            for (auto &qi : q) {
                qi *= gamma;
            }
            for (std::size_t h = 0; h < s_hist.size(); ++h) {
                double yq = 0.0;
                for (std::size_t i = 0; i < dim; ++i) {
                    yq += y_hist[h][i] * q[i];
                }
                const double beta = rho_hist[h] * yq;
                for (std::size_t i = 0; i < dim; ++i) {
                    q[i] += s_hist[h][i] * (alpha[h] - beta);
                }
            }
            std::array<double, 16> dir;
            double gd = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                dir[i] = -q[i];
                gd += grad[i] * dir[i];
            }
            if (gd >= 0.0) {
                for (std::size_t i = 0; i < dim; ++i) {
                    dir[i] = -grad[i];
                }
                gd = 0.0;
                for (std::size_t i = 0; i < dim; ++i) {
                    gd += grad[i] * dir[i];
                }
                s_hist.clear();
                y_hist.clear();
                rho_hist.clear();
            }
            if (gd >= 0.0) {
                break;  // zero gradient
            }

            double step = 1.0;
            std::array<double, 16> x_new{};
            std::array<double, 16> grad_new{};
            double f_new = f;
            bool accepted = false;
            for (int ls = 0; ls < 50; ++ls) {
                for (std::size_t i = 0; i < dim; ++i) {
                    x_new[i] = x[i] + step * dir[i];
                }
                f_new = eval(x_new, nullptr);
                if (f_new <= f + 1e-4 * step * gd) {
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) {
                break;
            }
            f_new = eval(x_new, &grad_new);

            double step_norm = 0.0;
            std::array<double, 16> s_vec{};
            std::array<double, 16> y_vec{};
            double sy = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                s_vec[i] = x_new[i] - x[i];
                y_vec[i] = grad_new[i] - grad[i];
                sy += s_vec[i] * y_vec[i];
                step_norm = std::max(step_norm, std::abs(s_vec[i]));
            }
            if (sy > 1e-12) {
                s_hist.push_back(s_vec);
                y_hist.push_back(y_vec);
                rho_hist.push_back(1.0 / sy);
                if (static_cast<int>(s_hist.size()) > history) {
                    s_hist.erase(s_hist.begin());
                    y_hist.erase(y_hist.begin());
                    rho_hist.erase(rho_hist.begin());
                }
            }
            x = x_new;
            grad = grad_new;
            f = f_new;
            if (step_norm < 1e-9) {
                converged = true;
                ++iter;
                break;
            }
        }
        if (iters_out != nullptr) {
            *iters_out = iter;
        }
        return std::make_tuple(x, f, converged);
    };

    // Starting point from the physicality-projected linear inversion, blended
    // with the maximally mixed state for full rank.
    auto initial_params = [&]() {
        ComplexMatrix rho_lin = linear_inversion(counts);
        auto eig = hermitian_eigen(rho_lin);
        ComplexMatrix rho0(4, 4);
        double kept = 0.0;
        for (std::size_t k = 0; k < 4; ++k) {
            kept += std::max(eig.values[k], 0.0);
        }
        if (kept <= 0.0) {
            kept = 1.0;
        }
        for (std::size_t k = 0; k < 4; ++k) {
            const double lam = std::max(eig.values[k], 0.0) / kept;
            for (std::size_t r = 0; r < 4; ++r) {
                for (std::size_t c = 0; c < 4; ++c) {
                    rho0(r, c) += lam * eig.vectors(r, k) * std::conj(eig.vectors(c, k));
                }
            }
        }
        const double mix = 0.02;
        for (std::size_t r = 0; r < 4; ++r) {
            for (std::size_t c = 0; c < 4; ++c) {
                rho0(r, c) *= (1.0 - mix);
            }
            rho0(r, r) += mix * 0.25;
        }
        const ComplexMatrix t0 = detail::lower_t_from_rho(rho0);
        std::array<double, 16> x{};
        for (std::size_t i = 0; i < 4; ++i) {
            x[i] = t0(i, i).real();
        }
        std::size_t idx = 4;
        for (std::size_t r = 1; r < 4; ++r) {
            for (std::size_t c = 0; c < r; ++c) {
                x[idx] = t0(r, c).real();
                x[idx + 1] = t0(r, c).imag();
                idx += 2;
            }
        }
        return x;
    };

    constexpr int max_restarts = 4;
    Rng restart_rng(0x9e3779b97f4a7c15ull);
    std::array<double, 16> best_x{};
    double best_f = std::numeric_limits<double>::infinity();
    int best_iters = 0;
    bool any_converged = false;
    int restarts = 0;
    for (int attempt = 0; attempt <= max_restarts; ++attempt) {
        std::array<double, 16> x0{};
        if (attempt == 0) {
            x0 = initial_params();
        } else if (attempt == 1) {
            x0.fill(0.0);
            x0[0] = x0[1] = x0[2] = x0[3] = 0.5;  // maximally mixed
        } else {
            for (auto &v : x0) {
                v = restart_rng.uniform(-0.5, 0.5);
            }
        }
        int iters = 0;
        auto [x, f, converged] = optimize(x0, 500, &iters);
        restarts = attempt;
        if (f < best_f) {
            best_f = f;
            best_x = x;
            best_iters = iters;
        }
        if (converged) {
            any_converged = true;
            break;
        }
    }

    const ComplexMatrix t = detail::t_from_params(best_x);
    MleResult result{TwoQubitState(detail::rho_from_t(t, nullptr)), -best_f, best_iters, restarts};
    if (!any_converged) {
        throw reconstruction_failure("mle_reconstruct: optimizer did not converge within the restart budget",
                                     std::move(result));
    }
    return result;
}

}  // namespace qpicsim
