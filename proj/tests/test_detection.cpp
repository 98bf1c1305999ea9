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

#include <sstream>

#include "qpicsim/detection.hpp"
#include "qpicsim/source.hpp"
#include "test_util.hpp"

using namespace qpicsim;

namespace {

/// Photon arrivals behind a 50:50 splitter for a pulsed source.
std::pair<std::vector<TimeTag>, std::vector<TimeTag>> split_source_tags(const SourceModel &model,
                                                                        std::uint64_t pulses, std::uint64_t seed) {
    const double period = model.repetition_period_ps();
    Rng route(seed + 1);
    std::vector<TimeTag> a;
    std::vector<TimeTag> b;
    for (const auto &rec : generate_pulse_stream(model, pulses, seed)) {
        for (double t : rec.emission_times_ps) {
            const double abs_t = static_cast<double>(rec.pulse_index) * period + t;
            (route.bernoulli(0.5) ? a : b).push_back({0, abs_t});
        }
    }
    auto by_time = [](const TimeTag &x, const TimeTag &y) { return x.time_ps < y.time_ps; };
    std::sort(a.begin(), a.end(), by_time);
    std::sort(b.begin(), b.end(), by_time);
    return {a, b};
}

}  // namespace

TEST_CASE("ideal detector passes arrivals through") {
    std::vector<TimeTag> arrivals = {{0, 100.0}, {1, 200.0}, {0, 350.0}};
    const auto tags = simulate_clicks(arrivals, DetectorModel{}, 2, 1000.0, 5);
    CHECK(tags == arrivals);
}

TEST_CASE("dark counts are poissonian") {
    DetectorModel det;
    det.dark_count_rate_hz = 1000.0;
    const double one_second_ps = 1e12;
    const auto tags = simulate_clicks({}, det, 1, one_second_ps, 11);
    const double sigma = std::sqrt(1000.0);
    CHECK_THAT(static_cast<double>(tags.size()), Catch::Matchers::WithinAbs(1000.0, 3.0 * sigma));
    for (std::size_t i = 1; i < tags.size(); ++i) {
        CHECK(tags[i].time_ps >= tags[i - 1].time_ps);
    }
}

TEST_CASE("dead time swallows the trailing click") {
    DetectorModel det;
    det.dead_time_ps = 50000.0;
    std::vector<TimeTag> arrivals = {{0, 1000.0}, {0, 11000.0}};
    const auto tags = simulate_clicks(arrivals, det, 1, 1e6, 3);
    REQUIRE(tags.size() == 1);
    CHECK(tags[0].time_ps == 1000.0);

    arrivals = {{0, 1000.0}, {0, 61000.0}};
    CHECK(simulate_clicks(arrivals, det, 1, 1e6, 3).size() == 2);
}

TEST_CASE("jittered output stays sorted") {
    DetectorModel det;
    det.jitter_sigma_ps = 200.0;
    std::vector<TimeTag> arrivals;
    for (int i = 0; i < 500; ++i) {
        arrivals.push_back({i % 2, 1000.0 * i + 500.0});
    }
    const auto tags = simulate_clicks(arrivals, det, 2, 1e6, 17);
    for (std::size_t i = 1; i < tags.size(); ++i) {
        CHECK(tags[i].time_ps >= tags[i - 1].time_ps);
    }
    CHECK(tags.size() == arrivals.size());
}

TEST_CASE("simulate_clicks rejects unsorted input") {
    std::vector<TimeTag> arrivals = {{0, 200.0}, {0, 100.0}};
    CHECK_THROWS_AS(simulate_clicks(arrivals, DetectorModel{}, 1, 1000.0, 1), invalid_input);
}

TEST_CASE("single-photon stream has exactly zero g2") {
    SourceModel m;
    m.lifetime_ps = 917.0;
    m.multiphoton_prob = 0.0;
    m.efficiency = 1.0;
    m.repetition_rate_mhz = 72.0;
    const auto [a, b] = split_source_tags(m, 200000, 21);
    const auto est = g2_estimator(a, b, m.repetition_period_ps());
    CHECK(est.zero_window == 0);
    CHECK(est.g2 == 0.0);
    CHECK(est.stderr_ > 0.0);
}

TEST_CASE("poissonian light has unit g2") {
    const double period = 13888.9;
    Rng rng(23);
    std::vector<TimeTag> a;
    std::vector<TimeTag> b;
    for (std::uint64_t pulse = 0; pulse < 400000; ++pulse) {
        const auto n = rng.poisson(0.4);
        for (std::uint64_t k = 0; k < n; ++k) {
            const double t = static_cast<double>(pulse) * period + rng.exponential(900.0);
            (rng.bernoulli(0.5) ? a : b).push_back({0, t});
        }
    }
    auto by_time = [](const TimeTag &x, const TimeTag &y) { return x.time_ps < y.time_ps; };
    std::sort(a.begin(), a.end(), by_time);
    std::sort(b.begin(), b.end(), by_time);
    const auto est = g2_estimator(a, b, period);
    CHECK_THAT(est.g2, Catch::Matchers::WithinAbs(1.0, 2.0 * est.stderr_));
}

TEST_CASE("hbt estimator matches the source expectation") {
    SourceModel m;
    m.lifetime_ps = 917.0;
    m.multiphoton_prob = 0.01;
    m.efficiency = 0.5;
    m.repetition_rate_mhz = 72.0;
    const auto [a, b] = split_source_tags(m, 1000000, 29);
    const auto est = g2_estimator(a, b, m.repetition_period_ps());
    CHECK(est.zero_window > 500);
    CHECK_THAT(est.g2, Catch::Matchers::WithinAbs(g2_expected(m), 2.5 * est.stderr_));
}

TEST_CASE("g2 estimator guards") {
    CHECK_THROWS_AS(g2_estimator({}, {}, 0.0), invalid_input);
    CHECK_THROWS_AS(g2_estimator({{0, 1.0}}, {{1, 2.0}}, 100.0, 0), invalid_input);
    // No side-peak coincidences at all: normalization undefined.
    CHECK_THROWS_AS(g2_estimator({{0, 1.0}}, {}, 100.0), estimation_error);
}

TEST_CASE("g2 error bar shrinks as one over root n") {
    SourceModel m;
    m.lifetime_ps = 917.0;
    m.multiphoton_prob = 0.02;
    m.efficiency = 0.5;
    m.repetition_rate_mhz = 72.0;
    std::array<double, 3> se{};
    std::array<std::uint64_t, 3> sizes = {100000, 1000000, 10000000};
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        const auto [a, b] = split_source_tags(m, sizes[i], 31 + i);
        se[i] = g2_estimator(a, b, m.repetition_period_ps()).stderr_;
    }
    const double slope = std::log(se[0] / se[2]) / std::log(static_cast<double>(sizes[2]) / sizes[0]);
    CHECK_THAT(slope, Catch::Matchers::WithinAbs(0.5, 0.05));
}

TEST_CASE("coincidence histogram counts a single pair at zero delay") {
    std::vector<TimeTag> tags = {{0, 1000.0}, {1, 1000.4}};
    const auto hists = coincidence_histogram(tags, 2, 1.0, 100.0);
    const auto &h = hists.at({0, 1});
    REQUIRE(h.bins.size() == 1);
    CHECK(h.bins.begin()->first == 0);
    CHECK(h.bins.begin()->second == 1);
}

TEST_CASE("two-pointer histogram matches the quadratic oracle") {
    testutil::Rng rng(37);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<TimeTag> tags;
        const int n = 200 + static_cast<int>(rng.uniform01() * 800.0);
        for (int i = 0; i < n; ++i) {
            tags.push_back({rng.bernoulli(0.5) ? 1 : 0, rng.uniform(0.0, 50000.0)});
        }
        std::sort(tags.begin(), tags.end(),
                  [](const TimeTag &x, const TimeTag &y) { return x.time_ps < y.time_ps; });
        const double window = 5000.0;
        const auto hists = coincidence_histogram(tags, 2, 250.0, window);
        std::vector<double> a;
        std::vector<double> b;
        for (const auto &t : tags) {
            (t.channel == 0 ? a : b).push_back(t.time_ps);
        }
        const auto &h = hists.at({0, 1});
        std::uint64_t total = 0;
        for (const auto &[idx, count] : h.bins) {
            total += count;
        }
        std::uint64_t oracle_total = 0;
        for (double ta : a) {
            for (double tb : b) {
                if (std::abs(tb - ta) <= window) {
                    ++oracle_total;
                }
            }
        }
        CHECK(total == oracle_total);
        // Per-bin agreement against the oracle with explicit bin edges
        // (boundary bins clipped by the window are skipped).
        for (const auto &[idx, count] : h.bins) {
            const double center = static_cast<double>(idx) * h.bin_width_ps;
            if (std::abs(center) + h.bin_width_ps / 2.0 > window) {
                continue;
            }
            CHECK(count == testutil::pair_count_oracle(a, b, center, h.bin_width_ps / 2.0));
        }
    }
}

TEST_CASE("windowed pair counts match the oracle across offsets") {
    testutil::Rng rng(41);
    std::vector<double> a;
    std::vector<double> b;
    for (int i = 0; i < 500; ++i) {
        a.push_back(rng.uniform(0.0, 100000.0));
        b.push_back(rng.uniform(0.0, 100000.0));
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    for (double offset : {-20000.0, 0.0, 13888.9, 27777.8}) {
        CHECK(detail::count_pairs_in_window(a, b, offset, 6944.45) ==
              testutil::pair_count_oracle(a, b, offset, 6944.45));
    }
}

TEST_CASE("uncorrelated periodic streams produce flat side peaks") {
    SourceModel m;
    m.lifetime_ps = 500.0;
    m.efficiency = 0.5;
    m.repetition_rate_mhz = 72.0;
    const auto [a, b] = split_source_tags(m, 400000, 43);
    const double period = m.repetition_period_ps();
    std::vector<double> ta;
    std::vector<double> tb;
    for (const auto &t : a) {
        ta.push_back(t.time_ps);
    }
    for (const auto &t : b) {
        tb.push_back(t.time_ps);
    }
    std::vector<double> peaks;
    for (int k = 1; k <= 5; ++k) {
        peaks.push_back(static_cast<double>(detail::count_pairs_in_window(ta, tb, k * period, period / 2.0)));
    }
    const double mean = (peaks[0] + peaks[1] + peaks[2] + peaks[3] + peaks[4]) / 5.0;
    for (double p : peaks) {
        CHECK_THAT(p, Catch::Matchers::WithinAbs(mean, 3.5 * std::sqrt(mean)));
    }
}

TEST_CASE("twofold patterns count exclusive pairs per pulse") {
    const double period = 1000.0;
    std::vector<TimeTag> tags = {
        {0, 100.0}, {2, 150.0},            // pulse 0: channels 0 and 2
        {1, 1100.0}, {3, 1200.0},          // pulse 1: channels 1 and 3
        {0, 2100.0},                       // pulse 2: single click, ignored
        {0, 3100.0}, {1, 3150.0}, {2, 3200.0},  // pulse 3: three clicks, ignored
        {0, 4100.0}, {2, 4150.0},          // pulse 4: channels 0 and 2 again
    };
    const auto counts = twofold_pattern_counts(tags, 4, period);
    CHECK(counts.at({0, 2}) == 2);
    CHECK(counts.at({1, 3}) == 1);
    CHECK(counts.at({0, 1}) == 0);
    CHECK(counts.at({0, 3}) == 0);
    CHECK(counts.at({1, 2}) == 0);
    CHECK(counts.at({2, 3}) == 0);
}

TEST_CASE("lifetime fit recovers the decay constant") {
    Rng rng(47);
    const double tau = 917.0;
    std::vector<double> counts(1000, 0.0);
    std::vector<double> centers(1000);
    for (std::size_t i = 0; i < centers.size(); ++i) {
        centers[i] = 10.0 * static_cast<double>(i) + 5.0;
    }
    for (int i = 0; i < 1000000; ++i) {
        const double t = rng.exponential(tau);
        const auto bin = static_cast<std::size_t>(t / 10.0);
        if (bin < counts.size()) {
            counts[bin] += 1.0;
        }
    }
    const auto fit = fit_lifetime(centers, counts, 0.0);
    CHECK_THAT(fit.tau_ps, Catch::Matchers::WithinAbs(tau, 5.0));
}

TEST_CASE("lifetime fit handles a gaussian instrument response") {
    Rng rng(53);
    const double tau = 1000.0;
    const double sigma = 100.0;
    std::vector<double> counts(1100, 0.0);
    std::vector<double> centers(1100);
    for (std::size_t i = 0; i < centers.size(); ++i) {
        centers[i] = 10.0 * static_cast<double>(i) - 495.0;  // from -495 to 10495
    }
    for (int i = 0; i < 1000000; ++i) {
        const double t = rng.exponential(tau) + rng.gaussian(0.0, sigma);
        const double shifted = t + 500.0;
        if (shifted >= 0.0) {
            const auto bin = static_cast<std::size_t>(shifted / 10.0);
            if (bin < counts.size()) {
                counts[bin] += 1.0;
            }
        }
    }
    const auto fit = fit_lifetime(centers, counts, sigma);
    CHECK_THAT(fit.tau_ps, Catch::Matchers::WithinAbs(tau, 10.0));
}

TEST_CASE("lifetime fit rejects degenerate input") {
    CHECK_THROWS_AS(fit_lifetime({}, {}, 0.0), invalid_input);
    CHECK_THROWS_AS(fit_lifetime({1.0, 2.0}, {1.0}, 0.0), invalid_input);
    CHECK_THROWS_AS(fit_lifetime({1.0, 2.0}, {0.0, 0.0}, 0.0), fit_failure);
}

TEST_CASE("noiseless fringe fit recovers the visibility to machine precision") {
    std::vector<double> phases;
    std::vector<double> counts;
    for (int i = 0; i < 13; ++i) {
        const double theta = kPi * static_cast<double>(i) / 12.0;
        phases.push_back(theta);
        counts.push_back(1e4 * mzi_fringe(theta, 0.943));
    }
    const auto fit = fit_hom_fringe(phases, counts);
    CHECK_THAT(fit.visibility, Catch::Matchers::WithinAbs(0.943, 1e-6));

    std::vector<double> perfect;
    for (double theta : phases) {
        perfect.push_back(1e4 * mzi_fringe(theta, 1.0));
    }
    CHECK_THAT(fit_hom_fringe(phases, perfect).visibility, Catch::Matchers::WithinAbs(1.0, 1e-9));
}

TEST_CASE("poisson-noised fringe fit stays within the quoted uncertainty") {
    Rng rng(59);
    std::vector<double> phases;
    for (int i = 0; i < 13; ++i) {
        phases.push_back(kPi * static_cast<double>(i) / 12.0);
    }
    int covered = 0;
    for (int repeat = 0; repeat < 5; ++repeat) {
        std::vector<double> counts;
        for (double theta : phases) {
            counts.push_back(static_cast<double>(rng.poisson(1e4 * mzi_fringe(theta, 0.943))));
        }
        const auto fit = fit_hom_fringe(phases, counts);
        CHECK(fit.stderr_ <= 0.011);
        if (std::abs(fit.visibility - 0.943) <= 2.0 * fit.stderr_) {
            ++covered;
        }
    }
    CHECK(covered >= 4);
}

TEST_CASE("fringe fit error scales as one over root n") {
    Rng rng(61);
    std::vector<double> phases;
    for (int i = 0; i < 13; ++i) {
        phases.push_back(kPi * static_cast<double>(i) / 12.0);
    }
    std::array<double, 3> se{};
    const std::array<double, 3> amplitudes = {1e4, 1e5, 1e6};
    for (std::size_t k = 0; k < 3; ++k) {
        std::vector<double> counts;
        for (double theta : phases) {
            counts.push_back(static_cast<double>(rng.poisson(amplitudes[k] * mzi_fringe(theta, 0.9))));
        }
        se[k] = fit_hom_fringe(phases, counts).stderr_;
    }
    const double slope = std::log(se[0] / se[2]) / std::log(amplitudes[2] / amplitudes[0]);
    CHECK_THAT(slope, Catch::Matchers::WithinAbs(0.5, 0.05));
}

TEST_CASE("fringe fit input guards") {
    std::vector<double> phases = {0.0, 0.5, 1.0, 1.5, 2.0};
    std::vector<double> counts = {5.0, 4.0, 3.0, 2.0, 1.0};
    CHECK_THROWS_AS(fit_hom_fringe({0.0, 0.5, 1.0}, {1.0, 2.0, 3.0}), invalid_input);
    CHECK_THROWS_AS(fit_hom_fringe({1.0, 1.0, 1.0, 1.0, 1.0}, counts), fit_failure);
    CHECK_THROWS_AS(fit_hom_fringe({0.0, 0.1, 0.2, 0.3, 0.4}, counts), invalid_input);
    CHECK_THROWS_AS(fit_hom_fringe(phases, {1.0, 2.0}), invalid_input);
}

TEST_CASE("time tags round-trip through the text format") {
    std::vector<TimeTag> tags = {{0, 100.25}, {1, 200.5}, {0, 300.125}, {3, 300.125}};
    std::ostringstream out;
    write_time_tags(out, tags);
    std::istringstream in(out.str());
    const auto parsed = read_time_tags(in);
    REQUIRE(parsed.size() == tags.size());
    for (std::size_t i = 0; i < tags.size(); ++i) {
        CHECK(parsed[i].channel == tags[i].channel);
        CHECK_THAT(parsed[i].time_ps, Catch::Matchers::WithinAbs(tags[i].time_ps, 1e-6));
    }
}

TEST_CASE("time tag reader rejects bad input with line numbers") {
    std::istringstream unsorted("0\t100.0\n1\t50.0\n");
    try {
        read_time_tags(unsorted);
        FAIL("expected a throw");
    } catch (const invalid_input &err) {
        CHECK(std::string(err.what()).find("line 2") != std::string::npos);
    }
    std::istringstream malformed("0\t100.0\nnot a record\n");
    try {
        read_time_tags(malformed);
        FAIL("expected a throw");
    } catch (const invalid_input &err) {
        CHECK(std::string(err.what()).find("line 2") != std::string::npos);
    }
    std::vector<TimeTag> bad = {{0, 100.0}, {0, 50.0}};
    std::ostringstream sink;
    CHECK_THROWS_AS(write_time_tags(sink, bad), invalid_input);
}
