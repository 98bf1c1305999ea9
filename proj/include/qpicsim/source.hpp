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
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace qpicsim {

/// Pulsed-emitter parameters: exciton lifetime, pure dephasing, per-pulse
/// multiphoton probability, end-to-end efficiency, and laser repetition rate.
struct SourceModel {
    double lifetime_ps = 917.0;
    double pure_dephasing_per_ns = 0.0;
    double multiphoton_prob = 0.0;
    double efficiency = 1.0;
    double repetition_rate_mhz = 72.0;

    void validate() const {
        if (!(lifetime_ps > 0.0)) {
            throw invalid_input("SourceModel: lifetime must be positive");
        }
        if (pure_dephasing_per_ns < 0.0) {
            throw invalid_input("SourceModel: dephasing rate must be non-negative");
        }
        if (multiphoton_prob < 0.0 || multiphoton_prob > 1.0) {
            throw invalid_input("SourceModel: multiphoton probability must lie in [0, 1]");
        }
        if (efficiency < 0.0 || efficiency > 1.0) {
            throw invalid_input("SourceModel: efficiency must lie in [0, 1]");
        }
        if (!(repetition_rate_mhz > 0.0)) {
            throw invalid_input("SourceModel: repetition rate must be positive");
        }
    }

    double repetition_period_ps() const { return 1.0e6 / repetition_rate_mhz; }
};

/// Photons surviving one excitation pulse; emission times are offsets from
/// the pulse trigger.
struct PulseRecord {
    std::uint64_t pulse_index = 0;
    std::vector<double> emission_times_ps;

    int photon_count() const { return static_cast<int>(emission_times_ps.size()); }
    bool occupied() const { return !emission_times_ps.empty(); }

    bool operator==(const PulseRecord &) const = default;
};

/// Two-photon overlap of a Markovian two-level emitter with pure dephasing:
/// V = gamma / (gamma + 2 gamma_d), gamma = 1 / lifetime.
inline double indistinguishability_from_dephasing(double lifetime_ps, double dephasing_per_ns) {
    if (!(lifetime_ps > 0.0)) {
        throw invalid_input("indistinguishability_from_dephasing: lifetime must be positive");
    }
    if (dephasing_per_ns < 0.0) {
        throw invalid_input("indistinguishability_from_dephasing: dephasing rate must be non-negative");
    }
    const double gamma_per_ns = 1000.0 / lifetime_ps;
    return gamma_per_ns / (gamma_per_ns + 2.0 * dephasing_per_ns);
}

/// Draw per-pulse photon content: one excitation, an extra with probability
/// p2, each surviving the end-to-end efficiency independently. Emission
/// offsets are i.i.d. exponential with the lifetime. Deterministic in the
/// seed.
inline std::vector<PulseRecord> generate_pulse_stream(const SourceModel &model, std::uint64_t num_pulses,
                                                      std::uint64_t seed) {
    model.validate();
    if (num_pulses < 1) {
        throw invalid_input("generate_pulse_stream: need at least one pulse");
    }
    Rng rng(seed);
    std::vector<PulseRecord> stream;
    stream.reserve(num_pulses);
    for (std::uint64_t i = 0; i < num_pulses; ++i) {
        PulseRecord rec;
        rec.pulse_index = i;
        const int emitted = 1 + (rng.bernoulli(model.multiphoton_prob) ? 1 : 0);
        for (int k = 0; k < emitted; ++k) {
            if (rng.bernoulli(model.efficiency)) {
                rec.emission_times_ps.push_back(rng.exponential(model.lifetime_ps));
            }
        }
        stream.push_back(std::move(rec));
    }
    return stream;
}

/// Route occupied pulses alternately to arms A and B; a pair is released when
/// the two arms hold photons from consecutive source pulses and both survive
/// the switch. Constituents of a pair never share a source pulse.
inline std::vector<std::pair<PulseRecord, PulseRecord>> demultiplex(const std::vector<PulseRecord> &stream,
                                                                    double switch_efficiency, std::uint64_t seed) {
    if (switch_efficiency < 0.0 || switch_efficiency > 1.0) {
        throw invalid_input("demultiplex: switch efficiency must lie in [0, 1]");
    }
    Rng rng(seed);
    std::vector<std::pair<PulseRecord, PulseRecord>> pairs;

    auto thin = [&](const PulseRecord &rec) {
        PulseRecord out;
        out.pulse_index = rec.pulse_index;
        for (double t : rec.emission_times_ps) {
            if (rng.bernoulli(switch_efficiency)) {
                out.emission_times_ps.push_back(t);
            }
        }
        return out;
    };

    bool next_is_a = true;
    PulseRecord pending_a;
    bool have_a = false;
    for (const auto &rec : stream) {
        if (!rec.occupied()) {
            continue;
        }
        PulseRecord routed = thin(rec);
        if (next_is_a) {
            pending_a = std::move(routed);
            have_a = pending_a.occupied();
            next_is_a = false;
        } else {
            if (have_a && routed.occupied() && rec.pulse_index == pending_a.pulse_index + 1) {
                pairs.emplace_back(std::move(pending_a), std::move(routed));
            }
            have_a = false;
            next_is_a = true;
        }
    }
    return pairs;
}

/// One attenuation stage, specified either as a dB loss or as a linear
/// efficiency.
struct LossStage {
    std::string label;
    double loss_db = 0.0;
    double efficiency = 1.0;

    static LossStage from_db(std::string label, double db) {
        if (db < 0.0) {
            throw invalid_input("LossStage: negative dB loss would exceed unit efficiency");
        }
        LossStage s;
        s.label = std::move(label);
        s.loss_db = db;
        s.efficiency = std::pow(10.0, -db / 10.0);
        return s;
    }

    static LossStage from_efficiency(std::string label, double eta) {
        if (eta < 0.0 || eta > 1.0) {
            throw invalid_input("LossStage: efficiency must lie in [0, 1]");
        }
        LossStage s;
        s.label = std::move(label);
        s.efficiency = eta;
        s.loss_db = eta > 0.0 ? -10.0 * std::log10(eta) : std::numeric_limits<double>::infinity();
        return s;
    }
};

struct LossBudgetEntry {
    std::string label;
    double loss_db;
    double efficiency;
    double cumulative_efficiency;
};

struct LossBudgetReport {
    std::vector<LossBudgetEntry> stages;
    double end_to_end = 1.0;
};

/// Multiply per-stage linear efficiencies in order; dB losses convert as
/// 10^(-dB/10).
inline LossBudgetReport loss_budget(const std::vector<LossStage> &stages) {
    LossBudgetReport report;
    double cumulative = 1.0;
    for (const auto &stage : stages) {
        cumulative *= stage.efficiency;
        report.stages.push_back({stage.label, stage.loss_db, stage.efficiency, cumulative});
    }
    report.end_to_end = cumulative;
    return report;
}

/// Expectation of the windowed HBT estimator for this source behind a 50:50
/// splitter with threshold detectors: zero-window coincidences over the mean
/// accidental (side-window) level. Includes the leakage of exponential
/// emission-time differences across the +-T/2 window edges, which feeds a
/// small accidental term into the zero-delay window.
inline double g2_expected(const SourceModel &model) {
    model.validate();
    const double p2 = model.multiphoton_prob;
    const double eta = model.efficiency;
    const double p_two = p2 * eta * eta;
    const double p_one = (1.0 - p2) * eta + p2 * 2.0 * eta * (1.0 - eta);
    const double p_click = p_one * 0.5 + p_two * 0.75;
    const double p_pair = p_two * 0.5;
    const double accidental = p_click * p_click;
    if (accidental <= 0.0) {
        throw invalid_input("g2_expected: no detectable photons");
    }
    const double window_leak = std::exp(-model.repetition_period_ps() / (2.0 * model.lifetime_ps));
    return (p_pair * (1.0 - window_leak) + accidental * window_leak) / accidental;
}

/// Brute-force sweep of the multiphoton probability so that the windowed HBT
/// estimator's expectation matches the target g2(0); coarse grid then
/// bisection on the monotone map.
inline double calibrate_multiphoton_prob(double target_g2, const SourceModel &reference) {
    if (target_g2 < 0.0) {
        throw invalid_input("calibrate_multiphoton_prob: target must be non-negative");
    }
    SourceModel probe = reference;
    auto value = [&](double p2) {
        probe.multiphoton_prob = p2;
        return g2_expected(probe);
    };
    double lo = 0.0;
    double hi = 1.0;
    const int grid = 1000;
    double best_lo = lo;
    for (int i = 0; i <= grid; ++i) {
        const double p2 = static_cast<double>(i) / grid;
        if (value(p2) <= target_g2) {
            best_lo = p2;
        } else {
            hi = p2;
            break;
        }
    }
    lo = best_lo;
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (value(mid) <= target_g2) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace qpicsim
