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
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace qpicsim {

using cdouble = std::complex<double>;

constexpr double kUnitarityTol = 1e-10;
constexpr double kPi = 3.141592653589793238462643;
constexpr double kTwoPi = 6.283185307179586476925287;

/// Dense row-major complex matrix. Entries are validated to be finite on
/// construction; dimensions must be at least 1x1.
class ComplexMatrix {
   public:
    ComplexMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, cdouble{0.0, 0.0}) {
        if (rows == 0 || cols == 0) {
            throw invalid_input("ComplexMatrix: dimensions must be >= 1");
        }
    }

    ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cdouble> entries)
        : rows_(rows), cols_(cols), data_(std::move(entries)) {
        if (rows == 0 || cols == 0) {
            throw invalid_input("ComplexMatrix: dimensions must be >= 1");
        }
        if (data_.size() != rows * cols) {
            throw invalid_input("ComplexMatrix: entry count does not match dimensions");
        }
        check_finite();
    }

    /// Row-major nested initializer, e.g. {{1, 0}, {0, 1}}.
    ComplexMatrix(std::initializer_list<std::initializer_list<cdouble>> init) {
        rows_ = init.size();
        cols_ = rows_ ? init.begin()->size() : 0;
        if (rows_ == 0 || cols_ == 0) {
            throw invalid_input("ComplexMatrix: dimensions must be >= 1");
        }
        data_.reserve(rows_ * cols_);
        for (const auto &row : init) {
            if (row.size() != cols_) {
                throw invalid_input("ComplexMatrix: ragged initializer");
            }
            data_.insert(data_.end(), row.begin(), row.end());
        }
        check_finite();
    }

    static ComplexMatrix identity(std::size_t n) {
        ComplexMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            m(i, i) = 1.0;
        }
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool is_square() const { return rows_ == cols_; }

    cdouble &operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const cdouble &operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    const std::vector<cdouble> &entries() const { return data_; }

    ComplexMatrix adjoint() const {
        ComplexMatrix out(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r) {
            for (std::size_t c = 0; c < cols_; ++c) {
                out(c, r) = std::conj((*this)(r, c));
            }
        }
        return out;
    }

    ComplexMatrix operator*(const ComplexMatrix &rhs) const {
        if (cols_ != rhs.rows_) {
            throw invalid_input("ComplexMatrix: incompatible shapes for product");
        }
        ComplexMatrix out(rows_, rhs.cols_);
        for (std::size_t r = 0; r < rows_; ++r) {
            for (std::size_t k = 0; k < cols_; ++k) {
                const cdouble a = (*this)(r, k);
                if (a == cdouble{0.0, 0.0}) {
                    continue;
                }
                for (std::size_t c = 0; c < rhs.cols_; ++c) {
                    out(r, c) += a * rhs(k, c);
                }
            }
        }
        return out;
    }

    friend ComplexMatrix operator*(cdouble s, const ComplexMatrix &m) {
        ComplexMatrix out = m;
        for (auto &e : out.data_) {
            e *= s;
        }
        return out;
    }

    ComplexMatrix operator+(const ComplexMatrix &rhs) const {
        require_same_shape(rhs);
        ComplexMatrix out = *this;
        for (std::size_t i = 0; i < data_.size(); ++i) {
            out.data_[i] += rhs.data_[i];
        }
        return out;
    }

    ComplexMatrix operator-(const ComplexMatrix &rhs) const {
        require_same_shape(rhs);
        ComplexMatrix out = *this;
        for (std::size_t i = 0; i < data_.size(); ++i) {
            out.data_[i] -= rhs.data_[i];
        }
        return out;
    }

    /// Largest entry modulus of (this - rhs).
    double max_abs_diff(const ComplexMatrix &rhs) const {
        require_same_shape(rhs);
        double worst = 0.0;
        for (std::size_t i = 0; i < data_.size(); ++i) {
            worst = std::max(worst, std::abs(data_[i] - rhs.data_[i]));
        }
        return worst;
    }

    cdouble trace() const {
        if (!is_square()) {
            throw invalid_input("ComplexMatrix: trace of non-square matrix");
        }
        cdouble t = 0.0;
        for (std::size_t i = 0; i < rows_; ++i) {
            t += (*this)(i, i);
        }
        return t;
    }

   private:
    void check_finite() const {
        for (const auto &e : data_) {
            if (!std::isfinite(e.real()) || !std::isfinite(e.imag())) {
                throw invalid_input("ComplexMatrix: non-finite entry");
            }
        }
    }

    void require_same_shape(const ComplexMatrix &rhs) const {
        if (rows_ != rhs.rows_ || cols_ != rhs.cols_) {
            throw invalid_input("ComplexMatrix: shape mismatch");
        }
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<cdouble> data_;
};

/// Max-entry deviation of U†U from the identity.
inline double unitarity_deviation(const ComplexMatrix &m) {
    if (!m.is_square()) {
        throw invalid_input("unitarity_deviation: matrix must be square");
    }
    return (m.adjoint() * m).max_abs_diff(ComplexMatrix::identity(m.rows()));
}

/// Square matrix validated to satisfy U†U = I within kUnitarityTol at
/// construction. Immutable after construction.
class UnitaryMatrix {
   public:
    explicit UnitaryMatrix(ComplexMatrix m) : inner_(std::move(m)) {
        if (!inner_.is_square()) {
            throw invalid_input("UnitaryMatrix: matrix must be square");
        }
        const double dev = unitarity_deviation(inner_);
        if (dev > kUnitarityTol) {
            throw invalid_input("UnitaryMatrix: U†U deviates from identity by " + std::to_string(dev));
        }
    }

    std::size_t dim() const { return inner_.rows(); }
    const cdouble &operator()(std::size_t r, std::size_t c) const { return inner_(r, c); }
    const ComplexMatrix &matrix() const { return inner_; }

   private:
    ComplexMatrix inner_;
};

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix via the
/// cyclic Jacobi method with complex rotations. Columns of `vectors` are the
/// eigenvectors matching `values`.
struct HermitianEigen {
    std::vector<double> values;
    ComplexMatrix vectors;
};

inline HermitianEigen hermitian_eigen(const ComplexMatrix &input, double tol = 1e-14, int max_sweeps = 100) {
    if (!input.is_square()) {
        throw invalid_input("hermitian_eigen: matrix must be square");
    }
    const std::size_t n = input.rows();
    ComplexMatrix a = input;
    // Symmetrize to wash out representation noise in nominally Hermitian input.
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = r; c < n; ++c) {
            const cdouble avg = 0.5 * (a(r, c) + std::conj(a(c, r)));
            a(r, c) = avg;
            a(c, r) = std::conj(avg);
        }
    }
    ComplexMatrix v = ComplexMatrix::identity(n);

    auto off_norm = [&]() {
        double s = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = r + 1; c < n; ++c) {
                s += std::norm(a(r, c));
            }
        }
        return std::sqrt(s);
    };

    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        scale = std::max(scale, std::abs(a(i, i)));
    }
    scale = std::max(scale, off_norm());
    if (scale == 0.0) {
        scale = 1.0;
    }

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        if (off_norm() <= tol * scale) {
            break;
        }
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const cdouble apq = a(p, q);
                if (std::abs(apq) <= 1e-300) {
                    continue;
                }
                // 2x2 Hermitian block [[app, apq], [apq*, aqq]] is diagonalized
                // by a rotation with angle theta and phase of apq.
                const double app = a(p, p).real();
                const double aqq = a(q, q).real();
                const double phase = std::arg(apq);
                const double mod = std::abs(apq);
                const double theta = 0.5 * std::atan2(2.0 * mod, aqq - app);
                const double c = std::cos(theta);
                const cdouble s = std::sin(theta) * std::polar(1.0, phase);
                // Apply G† A G and V G with G = [[c, s], [-conj(s), c]] on (p, q).
                for (std::size_t k = 0; k < n; ++k) {
                    const cdouble akp = a(k, p);
                    const cdouble akq = a(k, q);
                    a(k, p) = c * akp - std::conj(s) * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const cdouble apk = a(p, k);
                    const cdouble aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = std::conj(s) * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const cdouble vkp = v(k, p);
                    const cdouble vkq = v(k, q);
                    v(k, p) = c * vkp - std::conj(s) * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = i;
    }
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i).real() < a(j, j).real(); });

    HermitianEigen out{std::vector<double>(n), ComplexMatrix(n, n)};
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = a(order[j], order[j]).real();
        for (std::size_t r = 0; r < n; ++r) {
            out.vectors(r, j) = v(r, order[j]);
        }
    }
    return out;
}

inline std::vector<double> hermitian_eigenvalues(const ComplexMatrix &m) {
    return hermitian_eigen(m).values;
}

}  // namespace qpicsim
