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

#include <compare>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "complex_matrix.hpp"
#include "errors.hpp"

namespace qpicsim {

/// Photon occupation numbers over the spatial modes of a circuit.
/// Mode indices are 0-based in code; the text formats use 1-based labels.
class PhotonConfig {
   public:
    explicit PhotonConfig(std::vector<int> occupations) : occupations_(std::move(occupations)) {
        if (occupations_.empty()) {
            throw invalid_input("PhotonConfig: at least one mode required");
        }
        for (int occ : occupations_) {
            if (occ < 0) {
                throw invalid_input("PhotonConfig: negative occupation");
            }
        }
    }

    /// Build from a list of occupied 1-based mode labels (repeats allowed).
    static PhotonConfig from_modes(const std::vector<int> &modes_1based, std::size_t num_modes) {
        std::vector<int> occ(num_modes, 0);
        for (int m : modes_1based) {
            if (m < 1 || static_cast<std::size_t>(m) > num_modes) {
                throw invalid_input("PhotonConfig: mode label " + std::to_string(m) + " out of range 1.." +
                                    std::to_string(num_modes));
            }
            occ[static_cast<std::size_t>(m - 1)] += 1;
        }
        return PhotonConfig(std::move(occ));
    }

    const std::vector<int> &occupations() const { return occupations_; }
    std::size_t num_modes() const { return occupations_.size(); }

    int photon_count() const { return std::accumulate(occupations_.begin(), occupations_.end(), 0); }

    bool collision_free() const {
        for (int occ : occupations_) {
            if (occ > 1) {
                return false;
            }
        }
        return true;
    }

    /// 0-based mode index per photon, nondecreasing (e.g. occupations
    /// (1,0,2,0) -> [0, 2, 2]).
    std::vector<int> assignment_list() const {
        std::vector<int> modes;
        modes.reserve(static_cast<std::size_t>(photon_count()));
        for (std::size_t m = 0; m < occupations_.size(); ++m) {
            for (int k = 0; k < occupations_[m]; ++k) {
                modes.push_back(static_cast<int>(m));
            }
        }
        return modes;
    }

    /// 1-based comma-separated occupied modes, collisions repeated: "1,3".
    std::string to_mode_string() const {
        std::string out;
        for (int mode : assignment_list()) {
            if (!out.empty()) {
                out += ',';
            }
            out += std::to_string(mode + 1);
        }
        return out;
    }

    auto operator<=>(const PhotonConfig &) const = default;

   private:
    std::vector<int> occupations_;
};

/// n x n transition block of U for a given input/output occupation pair:
/// entry (k, l) = U(d_k, s_l) with d and s the nondecreasing output/input
/// photon assignment lists. Requires equal photon totals on both sides.
inline ComplexMatrix scattering_submatrix(const UnitaryMatrix &u, const PhotonConfig &input,
                                          const PhotonConfig &output) {
    if (input.num_modes() != u.dim() || output.num_modes() != u.dim()) {
        throw invalid_input("scattering_submatrix: occupation length does not match circuit modes");
    }
    const int n = input.photon_count();
    if (n != output.photon_count()) {
        throw invalid_input("scattering_submatrix: photon number mismatch between input and output");
    }
    if (n == 0) {
        throw invalid_input("scattering_submatrix: at least one photon required");
    }
    const std::vector<int> s = input.assignment_list();
    const std::vector<int> d = output.assignment_list();
    ComplexMatrix m(static_cast<std::size_t>(n), static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        for (int l = 0; l < n; ++l) {
            m(static_cast<std::size_t>(k), static_cast<std::size_t>(l)) =
                u(static_cast<std::size_t>(d[static_cast<std::size_t>(k)]),
                  static_cast<std::size_t>(s[static_cast<std::size_t>(l)]));
        }
    }
    return m;
}

}  // namespace qpicsim
