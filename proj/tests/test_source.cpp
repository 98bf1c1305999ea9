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

#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>

#include "qpicsim/rng.hpp"
#include "qpicsim/source.hpp"

using namespace qpicsim;

namespace {

SourceModel paper_like_source() {
    SourceModel m;
    m.lifetime_ps = 917.0;
    m.pure_dephasing_per_ns = 0.03;
    m.multiphoton_prob = 0.0;
    m.efficiency = 1.0;
    m.repetition_rate_mhz = 72.0;
    return m;
}

std::array<double, 3> photon_count_fractions(const std::vector<PulseRecord> &stream) {
    std::array<double, 3> f{};
    for (const auto &rec : stream) {
        f[static_cast<std::size_t>(std::min(rec.photon_count(), 2))] += 1.0;
    }
    for (auto &x : f) {
        x /= static_cast<double>(stream.size());
    }
    return f;
}

}  // namespace

TEST_CASE("dephasing-limited indistinguishability") {
    CHECK_THAT(indistinguishability_from_dephasing(917.0, 0.0), Catch::Matchers::WithinAbs(1.0, 1e-15));
    // 917 ps lifetime and 0.03 / ns dephasing sit within two points of the
    // measured 94.5% two-photon overlap.
    const double v = indistinguishability_from_dephasing(917.0, 0.03);
    CHECK_THAT(v, Catch::Matchers::WithinAbs(0.945, 0.02));
    CHECK(indistinguishability_from_dephasing(917.0, 1e9) < 1e-4);
    CHECK_THROWS_AS(indistinguishability_from_dephasing(0.0, 0.1), invalid_input);
    CHECK_THROWS_AS(indistinguishability_from_dephasing(917.0, -0.1), invalid_input);
}

TEST_CASE("indistinguishability is monotone in dephasing and lifetime") {
    double prev = 1.1;
    for (double gd : {0.0, 0.01, 0.1, 0.5, 2.0}) {
        const double v = indistinguishability_from_dephasing(917.0, gd);
        CHECK(v < prev);
        prev = v;
    }
    prev = -0.1;
    for (double tau : {100.0, 300.0, 917.0, 3000.0}) {
        // Shorter lifetimes beat a fixed dephasing rate.
        const double v = indistinguishability_from_dephasing(tau, 0.03);
        CHECK(v < 1.0);
        CHECK(v > 0.0);
        if (prev >= 0.0) {
            CHECK(v < prev);
        }
        prev = v;
    }
}

TEST_CASE("unit-efficiency single-photon stream is exactly one photon per pulse") {
    SourceModel m = paper_like_source();
    const auto stream = generate_pulse_stream(m, 5000, 1);
    REQUIRE(stream.size() == 5000);
    for (const auto &rec : stream) {
        CHECK(rec.photon_count() == 1);
        REQUIRE(rec.emission_times_ps.size() == 1);
        CHECK(rec.emission_times_ps[0] >= 0.0);
    }
}

TEST_CASE("multiphoton fraction follows the binomial rate") {
    SourceModel m = paper_like_source();
    m.multiphoton_prob = 0.01;
    const std::uint64_t n = 1000000;
    const auto stream = generate_pulse_stream(m, n, 2);
    const auto f = photon_count_fractions(stream);
    const double sigma = std::sqrt(0.01 * 0.99 / static_cast<double>(n));
    CHECK_THAT(f[2], Catch::Matchers::WithinAbs(0.01, 3.0 * sigma));
}

TEST_CASE("emission times average to the lifetime") {
    SourceModel m = paper_like_source();
    const std::uint64_t n = 200000;
    const auto stream = generate_pulse_stream(m, n, 3);
    double mean = 0.0;
    for (const auto &rec : stream) {
        mean += rec.emission_times_ps[0];
    }
    mean /= static_cast<double>(n);
    CHECK_THAT(mean, Catch::Matchers::WithinAbs(917.0, 3.0 * 917.0 / std::sqrt(static_cast<double>(n))));
}

TEST_CASE("streams are reproducible bit for bit") {
    SourceModel m = paper_like_source();
    m.multiphoton_prob = 0.05;
    m.efficiency = 0.4;
    const auto a = generate_pulse_stream(m, 20000, 77);
    const auto b = generate_pulse_stream(m, 20000, 77);
    CHECK(a == b);
    const auto c = generate_pulse_stream(m, 20000, 78);
    CHECK(a != c);
}

TEST_CASE("efficiency thinning composes") {
    SourceModel full = paper_like_source();
    full.multiphoton_prob = 0.05;
    full.efficiency = 0.3;
    const std::uint64_t n = 1000000;
    const auto direct = generate_pulse_stream(full, n, 5);

    SourceModel partial = full;
    partial.efficiency = 0.6;
    auto staged = generate_pulse_stream(partial, n, 6);
    Rng thin_rng(99);
    for (auto &rec : staged) {
        std::vector<double> kept;
        for (double t : rec.emission_times_ps) {
            if (thin_rng.bernoulli(0.5)) {
                kept.push_back(t);
            }
        }
        rec.emission_times_ps = std::move(kept);
    }

    const auto fa = photon_count_fractions(direct);
    const auto fb = photon_count_fractions(staged);
    // Chi-square homogeneity over the {0, 1, 2} photon-count categories;
    // critical value 9.21 at alpha = 0.01 with 2 degrees of freedom.
    double chi2 = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
        const double na = fa[k] * static_cast<double>(n);
        const double nb = fb[k] * static_cast<double>(n);
        const double expected = 0.5 * (na + nb);
        if (expected > 0.0) {
            chi2 += (na - expected) * (na - expected) / expected;
            chi2 += (nb - expected) * (nb - expected) / expected;
        }
    }
    CHECK(chi2 < 9.21);
}

TEST_CASE("perfect demultiplexing halves the rate") {
    SourceModel m = paper_like_source();
    const auto stream = generate_pulse_stream(m, 10000, 7);
    const auto pairs = demultiplex(stream, 1.0, 8);
    CHECK(pairs.size() == 5000);
    for (const auto &[a, b] : pairs) {
        CHECK(b.pulse_index == a.pulse_index + 1);
    }
}

TEST_CASE("switch losses thin pairs quadratically") {
    SourceModel m = paper_like_source();
    const std::uint64_t n = 200000;
    const auto stream = generate_pulse_stream(m, n, 9);
    const auto pairs = demultiplex(stream, 0.5, 10);
    const double expected = static_cast<double>(n) / 2.0 * 0.25;
    const double sigma = std::sqrt(expected);
    CHECK_THAT(static_cast<double>(pairs.size()), Catch::Matchers::WithinAbs(expected, 4.0 * sigma));
}

TEST_CASE("demultiplexer never pairs a pulse with itself") {
    SourceModel m = paper_like_source();
    m.multiphoton_prob = 0.1;
    m.efficiency = 0.5;
    const auto stream = generate_pulse_stream(m, 50000, 11);
    const auto pairs = demultiplex(stream, 0.8, 12);
    CHECK(!pairs.empty());
    for (const auto &[a, b] : pairs) {
        CHECK(a.pulse_index != b.pulse_index);
        CHECK(b.pulse_index == a.pulse_index + 1);
        CHECK(a.occupied());
        CHECK(b.occupied());
    }
}

TEST_CASE("empty or unoccupied streams demultiplex to nothing") {
    CHECK(demultiplex({}, 1.0, 1).empty());
    std::vector<PulseRecord> empties(10);
    for (std::uint64_t i = 0; i < empties.size(); ++i) {
        empties[i].pulse_index = i;
    }
    CHECK(demultiplex(empties, 1.0, 1).empty());
}

TEST_CASE("loss budget multiplies stages in order") {
    const auto half = loss_budget({LossStage::from_db("splitter", 3.01)});
    CHECK_THAT(half.end_to_end, Catch::Matchers::WithinAbs(0.5, 1e-3));

    const auto coupling = loss_budget({LossStage::from_db("coupling", 4.25)});
    CHECK_THAT(coupling.end_to_end, Catch::Matchers::WithinAbs(0.376, 5e-4));

    const auto waveguide = loss_budget({LossStage::from_db("waveguide 1 cm", 0.3)});
    CHECK_THAT(waveguide.end_to_end, Catch::Matchers::WithinAbs(0.933, 5e-4));

    const auto chain = loss_budget({LossStage::from_db("coupling", 4.25), LossStage::from_efficiency("etalon", 0.8),
                                    LossStage::from_db("waveguide", 0.3)});
    REQUIRE(chain.stages.size() == 3);
    CHECK(chain.stages[0].label == "coupling");
    CHECK(chain.stages[1].label == "etalon");
    CHECK(chain.stages[2].label == "waveguide");
    CHECK_THAT(chain.end_to_end,
               Catch::Matchers::WithinRel(chain.stages[0].efficiency * 0.8 * chain.stages[2].efficiency, 1e-12));
    CHECK_THAT(chain.stages[2].cumulative_efficiency, Catch::Matchers::WithinRel(chain.end_to_end, 1e-12));
}

TEST_CASE("loss stages reject unphysical parameters") {
    CHECK_THROWS_AS(LossStage::from_efficiency("bad", 1.2), invalid_input);
    CHECK_THROWS_AS(LossStage::from_efficiency("bad", -0.1), invalid_input);
    CHECK_THROWS_AS(LossStage::from_db("gain", -1.0), invalid_input);
}

TEST_CASE("detected rate reproduces the efficiency budget") {
    SourceModel m = paper_like_source();
    m.efficiency = 0.215;
    const std::uint64_t n = 1000000;
    const auto stream = generate_pulse_stream(m, n, 13);
    std::uint64_t detected = 0;
    for (const auto &rec : stream) {
        detected += static_cast<std::uint64_t>(rec.photon_count());
    }
    const double rate_mhz = static_cast<double>(detected) / static_cast<double>(n) * m.repetition_rate_mhz;
    CHECK_THAT(rate_mhz, Catch::Matchers::WithinAbs(15.5, 0.2));
}

TEST_CASE("expected g2 is monotone in the multiphoton probability") {
    SourceModel m = paper_like_source();
    m.efficiency = 0.215;
    double prev = -1.0;
    for (double p2 : {1e-4, 1e-3, 1e-2, 0.1}) {
        m.multiphoton_prob = p2;
        const double g2 = g2_expected(m);
        CHECK(g2 > prev);
        prev = g2;
    }
    // With a slow clock the window-leakage floor vanishes and the weak-pump
    // limit g2 -> 2 p2 is recovered.
    m.repetition_rate_mhz = 1.0;
    m.multiphoton_prob = 1e-3;
    CHECK_THAT(g2_expected(m), Catch::Matchers::WithinRel(2e-3, 0.05));
}

TEST_CASE("multiphoton calibration hits a target g2") {
    SourceModel m = paper_like_source();
    m.efficiency = 0.215;
    for (double target : {0.004, 0.008}) {
        const double p2 = calibrate_multiphoton_prob(target, m);
        m.multiphoton_prob = p2;
        CHECK_THAT(g2_expected(m), Catch::Matchers::WithinRel(target, 1e-6));
    }
}
