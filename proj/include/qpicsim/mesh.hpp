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
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "complex_matrix.hpp"
#include "errors.hpp"

namespace qpicsim {

inline double wrap_phase(double x) {
    double w = std::fmod(x, kTwoPi);
    if (w < 0.0) {
        w += kTwoPi;
    }
    // fmod can return exactly 2*pi after the correction when x is a tiny
    // negative number.
    if (w >= kTwoPi) {
        w = 0.0;
    }
    return w;
}

/// One Mach-Zehnder cell of a rectangular mesh: internal phase theta sets the
/// splitting ratio, external phase phi sits on the top input arm. Acts on
/// modes (top_mode, top_mode + 1); 0-based in memory.
struct MziCell {
    int layer = 0;
    int top_mode = 0;
    double theta = 0.0;
    double phi = 0.0;
};

/// Transfer matrix BS . P(theta) . BS . P_ext(phi) with the symmetric coupler
/// BS = (1/sqrt(2)) [[1, i], [i, 1]]. Closed form:
///   i e^{i theta/2} [[e^{i phi} sin(theta/2), cos(theta/2)],
///                    [e^{i phi} cos(theta/2), -sin(theta/2)]]
/// theta = pi is the bar state, theta = 0 the full crossover, theta = pi/2 a
/// 50:50 splitter.
inline UnitaryMatrix mzi_unitary(double theta, double phi) {
    const double s = std::sin(theta / 2.0);
    const double c = std::cos(theta / 2.0);
    const cdouble g = cdouble(0.0, 1.0) * std::polar(1.0, theta / 2.0);
    const cdouble ephi = std::polar(1.0, phi);
    ComplexMatrix m(2, 2);
    m(0, 0) = g * ephi * s;
    m(0, 1) = g * c;
    m(1, 0) = g * ephi * c;
    m(1, 1) = -g * s;
    return UnitaryMatrix(std::move(m));
}

namespace detail {

/// Left-multiply rows (a, a+1) of m by the 2x2 block t.
inline void apply_two_mode_left(ComplexMatrix &m, std::size_t a, const std::array<cdouble, 4> &t) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
        const cdouble top = m(a, c);
        const cdouble bot = m(a + 1, c);
        m(a, c) = t[0] * top + t[1] * bot;
        m(a + 1, c) = t[2] * top + t[3] * bot;
    }
}

/// Right-multiply columns (a, a+1) of m by the 2x2 block t.
inline void apply_two_mode_right(ComplexMatrix &m, std::size_t a, const std::array<cdouble, 4> &t) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const cdouble left = m(r, a);
        const cdouble right = m(r, a + 1);
        m(r, a) = left * t[0] + right * t[2];
        m(r, a + 1) = left * t[1] + right * t[3];
    }
}

inline std::array<cdouble, 4> mzi_block(double theta, double phi) {
    const double s = std::sin(theta / 2.0);
    const double c = std::cos(theta / 2.0);
    const cdouble g = cdouble(0.0, 1.0) * std::polar(1.0, theta / 2.0);
    const cdouble ephi = std::polar(1.0, phi);
    return {g * ephi * s, g * c, g * ephi * c, -g * s};
}

inline std::array<cdouble, 4> adjoint_block(const std::array<cdouble, 4> &t) {
    return {std::conj(t[0]), std::conj(t[2]), std::conj(t[1]), std::conj(t[3])};
}

}  // namespace detail

/// Rectangular mesh of MZI cells plus a final layer of per-mode output
/// phases. Cells within one layer must act on disjoint mode pairs. Phases are
/// wrapped into [0, 2pi) at construction.
class MeshConfig {
   public:
    MeshConfig(int num_modes, std::vector<MziCell> cells, std::vector<double> output_phases)
        : num_modes_(num_modes), cells_(std::move(cells)), output_phases_(std::move(output_phases)) {
        if (num_modes_ < 1) {
            throw invalid_input("MeshConfig: num_modes must be >= 1");
        }
        if (output_phases_.size() != static_cast<std::size_t>(num_modes_)) {
            throw invalid_input("MeshConfig: output_phases length must equal num_modes");
        }
        for (auto &cell : cells_) {
            if (cell.layer < 0) {
                throw invalid_input("MeshConfig: negative layer index");
            }
            if (cell.top_mode < 0 || cell.top_mode + 1 >= num_modes_) {
                throw invalid_input("MeshConfig: cell top_mode out of range");
            }
            if (!std::isfinite(cell.theta) || !std::isfinite(cell.phi)) {
                throw invalid_input("MeshConfig: non-finite phase");
            }
            cell.theta = wrap_phase(cell.theta);
            cell.phi = wrap_phase(cell.phi);
        }
        for (auto &p : output_phases_) {
            if (!std::isfinite(p)) {
                throw invalid_input("MeshConfig: non-finite output phase");
            }
            p = wrap_phase(p);
        }
        // Overlap check within each layer.
        std::map<int, std::vector<int>> tops_by_layer;
        for (const auto &cell : cells_) {
            tops_by_layer[cell.layer].push_back(cell.top_mode);
        }
        for (auto &[layer, tops] : tops_by_layer) {
            std::vector<bool> used(static_cast<std::size_t>(num_modes_), false);
            for (int top : tops) {
                if (used[static_cast<std::size_t>(top)] || used[static_cast<std::size_t>(top) + 1]) {
                    throw invalid_input("MeshConfig: overlapping cells in layer " + std::to_string(layer));
                }
                used[static_cast<std::size_t>(top)] = true;
                used[static_cast<std::size_t>(top) + 1] = true;
            }
        }
        sort_cells();
    }

    int num_modes() const { return num_modes_; }
    const std::vector<MziCell> &cells() const { return cells_; }
    const std::vector<double> &output_phases() const { return output_phases_; }

   private:
    void sort_cells() {
        std::sort(cells_.begin(), cells_.end(), [](const MziCell &a, const MziCell &b) {
            return a.layer != b.layer ? a.layer < b.layer : a.top_mode < b.top_mode;
        });
    }

    int num_modes_;
    std::vector<MziCell> cells_;
    std::vector<double> output_phases_;
};

/// Forward map: photons traverse layers in ascending order, then the output
/// phase shifters, so U = diag(e^{i out}) . T_last ... T_first.
inline UnitaryMatrix mesh_to_unitary(const MeshConfig &cfg) {
    const std::size_t m = static_cast<std::size_t>(cfg.num_modes());
    ComplexMatrix u = ComplexMatrix::identity(m);
    for (const auto &cell : cfg.cells()) {
        detail::apply_two_mode_left(u, static_cast<std::size_t>(cell.top_mode),
                                    detail::mzi_block(cell.theta, cell.phi));
    }
    for (std::size_t r = 0; r < m; ++r) {
        const cdouble ph = std::polar(1.0, cfg.output_phases()[r]);
        for (std::size_t c = 0; c < m; ++c) {
            u(r, c) *= ph;
        }
    }
    return UnitaryMatrix(std::move(u));
}

/// m-mode discrete Fourier transform, entries exp[(j-1)(k-1) 2 pi i / m] / sqrt(m).
inline UnitaryMatrix dft_unitary(int m) {
    if (m < 2) {
        throw invalid_input("dft_unitary: need at least 2 modes");
    }
    const std::size_t n = static_cast<std::size_t>(m);
    const double norm = 1.0 / std::sqrt(static_cast<double>(m));
    ComplexMatrix u(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t e = (j * k) % n;
            u(j, k) = std::polar(norm, kTwoPi * static_cast<double>(e) / static_cast<double>(m));
        }
    }
    return UnitaryMatrix(std::move(u));
}

namespace detail {

struct CellParams {
    int top_mode;
    double theta;
    double phi;
};

/// Parameters of the T that zeroes u(row, col) when applied to columns
/// (col, col+1) from the right as U <- U T†.
inline CellParams solve_right_null(const ComplexMatrix &u, std::size_t row, std::size_t col) {
    const cdouble x = u(row, col);
    const cdouble y = u(row, col + 1);
    const double ax = std::abs(x);
    const double ay = std::abs(y);
    if (ax < 1e-12 && ay < 1e-12) {
        return {static_cast<int>(col), kPi, 0.0};  // already null; keep the bar state
    }
    const double theta = 2.0 * std::atan2(ay, ax);
    double phi = 0.0;
    if (ax >= 1e-12 && ay >= 1e-12) {
        phi = -std::arg(-y / x);
    }
    return {static_cast<int>(col), theta, phi};
}

/// Parameters of the T that zeroes u(row, col) when applied to rows
/// (row-1, row) from the left as U <- T U.
inline CellParams solve_left_null(const ComplexMatrix &u, std::size_t row, std::size_t col) {
    const cdouble above = u(row - 1, col);
    const cdouble target = u(row, col);
    const double aa = std::abs(above);
    const double at = std::abs(target);
    if (aa < 1e-12 && at < 1e-12) {
        return {static_cast<int>(row - 1), kPi, 0.0};
    }
    const double theta = 2.0 * std::atan2(aa, at);
    double phi = 0.0;
    if (aa >= 1e-12 && at >= 1e-12) {
        phi = std::arg(target / above);
    }
    return {static_cast<int>(row - 1), theta, phi};
}

/// Factor a 2x2 unitary with modulus pattern [[s, c], [c, s]] as
/// diag(e^{i alpha}, e^{i beta}) . T(theta, phi). Phase extraction always uses
/// the larger-modulus entries so rounding noise is never amplified.
struct U2Decomposition {
    double alpha;
    double beta;
    double theta;
    double phi;
};

inline U2Decomposition decompose_u2(const std::array<cdouble, 4> &v) {
    const double s_est = 0.5 * (std::abs(v[0]) + std::abs(v[3]));
    const double c_est = 0.5 * (std::abs(v[1]) + std::abs(v[2]));
    const double theta = 2.0 * std::atan2(s_est, c_est);
    const cdouble g = cdouble(0.0, 1.0) * std::polar(1.0, theta / 2.0);

    double phi = 0.0;
    const cdouble phi_vec = v[0] * std::conj(v[1]) - v[2] * std::conj(v[3]);
    if (std::abs(phi_vec) > 1e-18) {
        phi = std::arg(phi_vec);
    }

    double alpha;
    double beta;
    if (s_est >= c_est) {
        alpha = std::arg(v[0]) - std::arg(g) - phi;
        beta = std::arg(-v[3]) - std::arg(g);
    } else {
        alpha = std::arg(v[1]) - std::arg(g);
        beta = std::arg(v[2]) - std::arg(g) - phi;
    }
    return {alpha, beta, theta, wrap_phase(phi)};
}

}  // namespace detail

/// Rectangular (Clements-style) decomposition of an m-mode unitary into
/// m(m-1)/2 MZI cells plus output phases. The returned mesh reproduces U
/// exactly up to floating-point error: nulling sweeps reduce U to a diagonal
/// D with alternating column (right) and row (left) operations, then D is
/// commuted through the left factors, each step re-factoring T† D as D' T'.
inline MeshConfig compile_unitary(const UnitaryMatrix &u_in) {
    const std::size_t m = u_in.dim();
    if (m > 16) {
        throw invalid_input("compile_unitary: supported up to 16 modes");
    }
    ComplexMatrix u = u_in.matrix();

    std::vector<detail::CellParams> right_ops;  // application order
    std::vector<detail::CellParams> left_ops;   // application order

    for (std::size_t i = 1; i < m; ++i) {
        if (i % 2 == 1) {
            for (std::size_t j = 0; j < i; ++j) {
                const std::size_t row = m - 1 - j;
                const std::size_t col = i - j - 1;
                auto params = detail::solve_right_null(u, row, col);
                detail::apply_two_mode_right(
                    u, col, detail::adjoint_block(detail::mzi_block(params.theta, params.phi)));
                right_ops.push_back(params);
            }
        } else {
            for (std::size_t j = 1; j <= i; ++j) {
                const std::size_t row = m + j - i - 1;
                const std::size_t col = j - 1;
                auto params = detail::solve_left_null(u, row, col);
                detail::apply_two_mode_left(u, row - 1, detail::mzi_block(params.theta, params.phi));
                left_ops.push_back(params);
            }
        }
    }

    std::vector<cdouble> diag(m);
    for (std::size_t k = 0; k < m; ++k) {
        diag[k] = u(k, k) / std::abs(u(k, k));
    }

    // U = T_L1† ... T_Lp† D T_Rq ... T_R1. Pull D leftward: T† D = D' T'.
    std::vector<detail::CellParams> cells_in_order = right_ops;
    for (auto it = left_ops.rbegin(); it != left_ops.rend(); ++it) {
        const std::size_t a = static_cast<std::size_t>(it->top_mode);
        const auto tdag = detail::adjoint_block(detail::mzi_block(it->theta, it->phi));
        const std::array<cdouble, 4> v = {tdag[0] * diag[a], tdag[1] * diag[a + 1], tdag[2] * diag[a],
                                          tdag[3] * diag[a + 1]};
        const auto dec = detail::decompose_u2(v);
        diag[a] = std::polar(1.0, dec.alpha);
        diag[a + 1] = std::polar(1.0, dec.beta);
        cells_in_order.push_back({it->top_mode, dec.theta, dec.phi});
    }

    // Greedy packing into layers; cells sharing a mode keep their order.
    std::vector<MziCell> cells;
    std::vector<int> last_layer(m, -1);
    for (const auto &p : cells_in_order) {
        const std::size_t a = static_cast<std::size_t>(p.top_mode);
        const int layer = std::max(last_layer[a], last_layer[a + 1]) + 1;
        last_layer[a] = layer;
        last_layer[a + 1] = layer;
        cells.push_back({layer, p.top_mode, p.theta, p.phi});
    }

    std::vector<double> output_phases(m);
    for (std::size_t k = 0; k < m; ++k) {
        output_phases[k] = std::arg(diag[k]);
    }
    return MeshConfig(static_cast<int>(m), std::move(cells), std::move(output_phases));
}

/// Residual max |D a - b| minimized over diagonal unitaries D (row-wise phase
/// alignment).
inline double phase_equiv_residual(const UnitaryMatrix &a, const UnitaryMatrix &b) {
    if (a.dim() != b.dim()) {
        throw invalid_input("phase_equiv_residual: dimension mismatch");
    }
    const std::size_t m = a.dim();
    double worst = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
        cdouble overlap = 0.0;
        for (std::size_t c = 0; c < m; ++c) {
            overlap += b(r, c) * std::conj(a(r, c));
        }
        const cdouble d = std::abs(overlap) > 0.0 ? overlap / std::abs(overlap) : cdouble{1.0, 0.0};
        for (std::size_t c = 0; c < m; ++c) {
            worst = std::max(worst, std::abs(d * a(r, c) - b(r, c)));
        }
    }
    return worst;
}

/// True when some diagonal phase matrix D makes D a match b within tol.
/// Such unitaries produce identical counting statistics because photons carry
/// no shared reference phase across distinct inputs.
inline bool unitary_equiv_up_to_input_phases(const UnitaryMatrix &a, const UnitaryMatrix &b, double tol = 1e-8) {
    return phase_equiv_residual(a, b) < tol;
}

}  // namespace qpicsim
