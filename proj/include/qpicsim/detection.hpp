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
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "interference.hpp"
#include "rng.hpp"

namespace qpicsim {

/// One detector click: channel index and timestamp in picoseconds.
struct TimeTag {
    int channel = 0;
    double time_ps = 0.0;

    bool operator==(const TimeTag &) const = default;
};

/// Threshold (non-number-resolving) detector with efficiency, Poisson dark
/// counts, Gaussian timing jitter, and a non-paralyzable dead time.
struct DetectorModel {
    double efficiency = 1.0;
    double dark_count_rate_hz = 0.0;
    double jitter_sigma_ps = 0.0;
    double dead_time_ps = 0.0;

    void validate() const {
        if (efficiency < 0.0 || efficiency > 1.0) {
            throw invalid_input("DetectorModel: efficiency must lie in [0, 1]");
        }
        if (dark_count_rate_hz < 0.0 || jitter_sigma_ps < 0.0 || dead_time_ps < 0.0) {
            throw invalid_input("DetectorModel: rates and times must be non-negative");
        }
    }
};

/// Symmetric delay histogram for one detector pair. Bin i covers
/// [i*w - w/2, i*w + w/2).
struct CoincidenceHistogram {
    double bin_width_ps = 0.0;
    double window_ps = 0.0;
    std::map<std::int64_t, std::uint64_t> bins;
};

namespace detail {

inline void require_time_sorted(const std::vector<TimeTag> &tags, const char *who) {
    for (std::size_t i = 1; i < tags.size(); ++i) {
        if (tags[i].time_ps < tags[i - 1].time_ps) {
            throw invalid_input(std::string(who) + ": time tags must be sorted by timestamp");
        }
    }
}

inline std::vector<std::vector<double>> split_channels(const std::vector<TimeTag> &tags, int num_channels) {
    std::vector<std::vector<double>> per(static_cast<std::size_t>(num_channels));
    for (const auto &tag : tags) {
        if (tag.channel < 0 || tag.channel >= num_channels) {
            throw invalid_input("time tags: channel index out of range");
        }
        per[static_cast<std::size_t>(tag.channel)].push_back(tag.time_ps);
    }
    return per;
}

/// Pairs (a, b) with b - a in [offset - half, offset + half), both sorted.
inline std::uint64_t count_pairs_in_window(const std::vector<double> &a, const std::vector<double> &b, double offset,
                                           double half) {
    std::uint64_t count = 0;
    std::size_t lo = 0;
    std::size_t hi = 0;
    for (double ta : a) {
        const double lo_edge = ta + offset - half;
        const double hi_edge = ta + offset + half;
        while (lo < b.size() && b[lo] < lo_edge) {
            ++lo;
        }
        if (hi < lo) {
            hi = lo;
        }
        while (hi < b.size() && b[hi] < hi_edge) {
            ++hi;
        }
        count += hi - lo;
    }
    return count;
}

}  // namespace detail

/// Detector response applied to photon arrivals on [0, duration]: efficiency
/// thinning, jitter, dark counts, then per-channel dead-time filtering.
/// Returns time-sorted tags.
inline std::vector<TimeTag> simulate_clicks(const std::vector<TimeTag> &arrivals, const DetectorModel &det,
                                            int num_channels, double duration_ps, std::uint64_t seed) {
    det.validate();
    if (num_channels < 1) {
        throw invalid_input("simulate_clicks: need at least one channel");
    }
    if (duration_ps < 0.0) {
        throw invalid_input("simulate_clicks: negative duration");
    }
    detail::require_time_sorted(arrivals, "simulate_clicks");
    Rng rng(seed);

    std::vector<std::vector<double>> per(static_cast<std::size_t>(num_channels));
    for (const auto &tag : arrivals) {
        if (tag.channel < 0 || tag.channel >= num_channels) {
            throw invalid_input("simulate_clicks: channel index out of range");
        }
        if (!rng.bernoulli(det.efficiency)) {
            continue;
        }
        double t = tag.time_ps;
        if (det.jitter_sigma_ps > 0.0) {
            t += rng.gaussian(0.0, det.jitter_sigma_ps);
        }
        per[static_cast<std::size_t>(tag.channel)].push_back(std::max(t, 0.0));
    }
    const double dark_mean = det.dark_count_rate_hz * duration_ps * 1e-12;
    for (int ch = 0; ch < num_channels; ++ch) {
        const std::uint64_t darks = rng.poisson(dark_mean);
        for (std::uint64_t k = 0; k < darks; ++k) {
            per[static_cast<std::size_t>(ch)].push_back(rng.uniform(0.0, duration_ps));
        }
    }

    std::vector<TimeTag> out;
    for (int ch = 0; ch < num_channels; ++ch) {
        auto &times = per[static_cast<std::size_t>(ch)];
        std::sort(times.begin(), times.end());
        double last_accept = -std::numeric_limits<double>::infinity();
        for (double t : times) {
            if (t - last_accept < det.dead_time_ps) {
                continue;
            }
            last_accept = t;
            out.push_back({ch, t});
        }
    }
    std::sort(out.begin(), out.end(), [](const TimeTag &x, const TimeTag &y) {
        return x.time_ps != y.time_ps ? x.time_ps < y.time_ps : x.channel < y.channel;
    });
    return out;
}

struct G2Estimate {
    double g2 = 0.0;
    double stderr_ = 0.0;
    std::uint64_t zero_window = 0;
    double side_mean = 0.0;
};

/// HBT estimator: coincidences in the zero-delay pulse window normalized by
/// the mean of the nearest +-num_side_peaks pulse windows. Error by Poisson
/// propagation (a floor of one count is used in the zero window so that
/// g2 = 0 still carries a finite error bar).
inline G2Estimate g2_estimator(const std::vector<TimeTag> &tags_a, const std::vector<TimeTag> &tags_b,
                               double rep_period_ps, int num_side_peaks = 5) {
    if (!(rep_period_ps > 0.0)) {
        throw invalid_input("g2_estimator: repetition period must be positive");
    }
    if (num_side_peaks < 1) {
        throw invalid_input("g2_estimator: need at least one side peak");
    }
    detail::require_time_sorted(tags_a, "g2_estimator");
    detail::require_time_sorted(tags_b, "g2_estimator");

    std::vector<double> a;
    a.reserve(tags_a.size());
    for (const auto &t : tags_a) {
        a.push_back(t.time_ps);
    }
    std::vector<double> b;
    b.reserve(tags_b.size());
    for (const auto &t : tags_b) {
        b.push_back(t.time_ps);
    }

    const double half = rep_period_ps / 2.0;
    const std::uint64_t n0 = detail::count_pairs_in_window(a, b, 0.0, half);
    std::uint64_t side_total = 0;
    for (int k = 1; k <= num_side_peaks; ++k) {
        side_total += detail::count_pairs_in_window(a, b, k * rep_period_ps, half);
        side_total += detail::count_pairs_in_window(a, b, -k * rep_period_ps, half);
    }
    if (side_total == 0) {
        throw estimation_error("g2_estimator: no side-peak coincidences, normalization undefined");
    }
    const double windows = 2.0 * num_side_peaks;
    const double side_mean = static_cast<double>(side_total) / windows;

    G2Estimate est;
    est.zero_window = n0;
    est.side_mean = side_mean;
    est.g2 = static_cast<double>(n0) / side_mean;
    const double s = static_cast<double>(side_total);
    const double var = (windows / s) * (windows / s) * std::max<double>(static_cast<double>(n0), 1.0) +
                       std::pow(windows * static_cast<double>(n0) / (s * s), 2) * s;
    est.stderr_ = std::sqrt(var);
    return est;
}

struct LifetimeFit {
    double tau_ps = 0.0;
    double amplitude = 0.0;
    double residual_rms = 0.0;
};

namespace detail {

/// Exponential decay convolved with a Gaussian response of width sigma
/// (unnormalized shape; the fit amplitude absorbs the scale).
inline double decay_shape(double t, double tau, double sigma) {
    if (sigma <= 0.0) {
        return t >= 0.0 ? std::exp(-t / tau) : 0.0;
    }
    const double a = sigma * sigma / (2.0 * tau * tau) - t / tau;
    const double b = (sigma / tau - t / sigma) / std::sqrt(2.0);
    return 0.5 * std::exp(a) * std::erfc(b);
}

}  // namespace detail

/// Least-squares lifetime fit of a delay histogram to an exponential decay
/// convolved with a Gaussian instrument response. The amplitude is solved
/// analytically per candidate lifetime; the lifetime by coarse log-grid scan
/// plus golden-section refinement.
inline LifetimeFit fit_lifetime(const std::vector<double> &bin_centers_ps, const std::vector<double> &counts,
                                double irf_sigma_ps) {
    if (bin_centers_ps.empty() || counts.empty()) {
        throw invalid_input("fit_lifetime: empty histogram");
    }
    if (bin_centers_ps.size() != counts.size()) {
        throw invalid_input("fit_lifetime: bin/count length mismatch");
    }
    if (irf_sigma_ps < 0.0) {
        throw invalid_input("fit_lifetime: negative IRF width");
    }
    double total = 0.0;
    double t_max = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] < 0.0 || !std::isfinite(counts[i]) || !std::isfinite(bin_centers_ps[i])) {
            throw invalid_input("fit_lifetime: invalid histogram values");
        }
        total += counts[i];
        t_max = std::max(t_max, std::abs(bin_centers_ps[i]));
    }
    if (total <= 0.0) {
        throw fit_failure("fit_lifetime: histogram has no counts");
    }

    auto sse_of = [&](double tau, double *amplitude_out) {
        double sfm = 0.0;
        double sff = 0.0;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            const double f = detail::decay_shape(bin_centers_ps[i], tau, irf_sigma_ps);
            sfm += f * counts[i];
            sff += f * f;
        }
        if (sff <= 0.0) {
            return std::numeric_limits<double>::infinity();
        }
        const double amp = sfm / sff;
        double sse = 0.0;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            const double r = counts[i] - amp * detail::decay_shape(bin_centers_ps[i], tau, irf_sigma_ps);
            sse += r * r;
        }
        if (amplitude_out != nullptr) {
            *amplitude_out = amp;
        }
        return sse;
    };

    const double tau_lo = std::max(t_max * 1e-4, 1e-3);
    const double tau_hi = std::max(t_max * 10.0, tau_lo * 10.0);
    const int grid = 120;
    double best_tau = tau_lo;
    double best_sse = std::numeric_limits<double>::infinity();
    int best_idx = 0;
    std::vector<double> taus(grid + 1);
    for (int i = 0; i <= grid; ++i) {
        const double tau = tau_lo * std::pow(tau_hi / tau_lo, static_cast<double>(i) / grid);
        taus[static_cast<std::size_t>(i)] = tau;
        const double sse = sse_of(tau, nullptr);
        if (sse < best_sse) {
            best_sse = sse;
            best_tau = tau;
            best_idx = i;
        }
    }
    double lo = taus[static_cast<std::size_t>(std::max(0, best_idx - 1))];
    double hi = taus[static_cast<std::size_t>(std::min(grid, best_idx + 1))];
    const double gr = 0.6180339887498949;
    double x1 = hi - gr * (hi - lo);
    double x2 = lo + gr * (hi - lo);
    double f1 = sse_of(x1, nullptr);
    double f2 = sse_of(x2, nullptr);
    int iterations = 0;
    const int max_iterations = 300;
    while (hi - lo > 1e-10 * best_tau && iterations < max_iterations) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = sse_of(x1, nullptr);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = sse_of(x2, nullptr);
        }
        ++iterations;
    }
    if (iterations >= max_iterations) {
        throw fit_failure("fit_lifetime: refinement did not converge; bracket [" + std::to_string(lo) + ", " +
                          std::to_string(hi) + "] ps after " + std::to_string(iterations) + " iterations");
    }

    LifetimeFit fit;
    fit.tau_ps = 0.5 * (lo + hi);
    const double sse = sse_of(fit.tau_ps, &fit.amplitude);
    fit.residual_rms = std::sqrt(sse / static_cast<double>(counts.size()));
    return fit;
}

struct HomFringeFit {
    double visibility = 0.0;
    double stderr_ = 0.0;
    double amplitude = 0.0;
    double chi2 = 0.0;
};

/// Weighted least-squares fit of coincidence counts against
/// A [V cos^2(theta) + (1 - V)(1 + cos^2(theta)) / 2], Poisson weights on the
/// coincidences. Optional singles normalize out per-setting rate drift. The
/// visibility error comes from the Gauss-Newton covariance (J^T W J)^{-1}.
inline HomFringeFit fit_hom_fringe(const std::vector<double> &phases, const std::vector<double> &coincidences,
                                   const std::vector<double> &singles_a = {},
                                   const std::vector<double> &singles_b = {}) {
    const std::size_t n = phases.size();
    if (coincidences.size() != n) {
        throw invalid_input("fit_hom_fringe: phase/count length mismatch");
    }
    if (!singles_a.empty() && (singles_a.size() != n || singles_b.size() != n)) {
        throw invalid_input("fit_hom_fringe: singles length mismatch");
    }
    if (n < 5) {
        throw invalid_input("fit_hom_fringe: need at least 5 phase settings");
    }
    const auto [mn, mx] = std::minmax_element(phases.begin(), phases.end());
    if (*mx - *mn <= 0.0) {
        throw fit_failure("fit_hom_fringe: degenerate design, all phases equal");
    }
    if (*mx - *mn < kPi / 2.0 - 1e-9) {
        throw invalid_input("fit_hom_fringe: phases must span at least half a fringe period");
    }

    std::vector<double> y(n);
    std::vector<double> w(n);
    double mean_prod = 1.0;
    if (!singles_a.empty()) {
        mean_prod = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (singles_a[i] <= 0.0 || singles_b[i] <= 0.0) {
                throw invalid_input("fit_hom_fringe: singles must be positive");
            }
            mean_prod += singles_a[i] * singles_b[i];
        }
        mean_prod /= static_cast<double>(n);
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (coincidences[i] < 0.0) {
            throw invalid_input("fit_hom_fringe: negative counts");
        }
        const double scale = singles_a.empty() ? 1.0 : mean_prod / (singles_a[i] * singles_b[i]);
        y[i] = coincidences[i] * scale;
        w[i] = 1.0 / (std::max(coincidences[i], 1.0) * scale * scale);
    }

    auto model_p = [](double theta, double v) {
        const double c2 = std::cos(theta) * std::cos(theta);
        return v * c2 + (1.0 - v) * 0.5 * (1.0 + c2);
    };
    auto chi2_of = [&](double v, double *amp_out) {
        double swyp = 0.0;
        double swpp = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double p = model_p(phases[i], v);
            swyp += w[i] * y[i] * p;
            swpp += w[i] * p * p;
        }
        const double amp = swpp > 0.0 ? swyp / swpp : 0.0;
        double chi2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = y[i] - amp * model_p(phases[i], v);
            chi2 += w[i] * r * r;
        }
        if (amp_out != nullptr) {
            *amp_out = amp;
        }
        return chi2;
    };

    double best_v = 0.0;
    double best_chi2 = std::numeric_limits<double>::infinity();
    const int grid = 500;
    for (int i = 0; i <= grid; ++i) {
        const double v = static_cast<double>(i) / grid;
        const double c = chi2_of(v, nullptr);
        if (c < best_chi2) {
            best_chi2 = c;
            best_v = v;
        }
    }
    double lo = std::max(0.0, best_v - 1.0 / grid);
    double hi = std::min(1.0, best_v + 1.0 / grid);
    const double gr = 0.6180339887498949;
    double x1 = hi - gr * (hi - lo);
    double x2 = lo + gr * (hi - lo);
    double f1 = chi2_of(x1, nullptr);
    double f2 = chi2_of(x2, nullptr);
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = chi2_of(x1, nullptr);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = chi2_of(x2, nullptr);
        }
    }

    HomFringeFit fit;
    fit.visibility = std::clamp(0.5 * (lo + hi), 0.0, 1.0);
    fit.chi2 = chi2_of(fit.visibility, &fit.amplitude);

    // Gauss-Newton covariance in (A, V).
    double haa = 0.0;
    double hav = 0.0;
    double hvv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = model_p(phases[i], fit.visibility);
        const double s2 = std::sin(phases[i]) * std::sin(phases[i]);
        const double dv = -fit.amplitude * s2 / 2.0;
        haa += w[i] * p * p;
        hav += w[i] * p * dv;
        hvv += w[i] * dv * dv;
    }
    const double det = haa * hvv - hav * hav;
    if (det <= 0.0) {
        throw fit_failure("fit_hom_fringe: singular design matrix");
    }
    fit.stderr_ = std::sqrt(haa / det);
    return fit;
}

/// Symmetric delay histograms for every channel pair via a sorted two-pointer
/// sweep.
inline std::map<std::pair<int, int>, CoincidenceHistogram> coincidence_histogram(const std::vector<TimeTag> &tags,
                                                                                 int num_channels, double bin_width_ps,
                                                                                 double window_ps) {
    if (!(bin_width_ps > 0.0) || !(window_ps > 0.0)) {
        throw invalid_input("coincidence_histogram: bin width and window must be positive");
    }
    detail::require_time_sorted(tags, "coincidence_histogram");
    const auto per = detail::split_channels(tags, num_channels);

    std::map<std::pair<int, int>, CoincidenceHistogram> out;
    for (int a = 0; a < num_channels; ++a) {
        for (int b = a + 1; b < num_channels; ++b) {
            CoincidenceHistogram hist;
            hist.bin_width_ps = bin_width_ps;
            hist.window_ps = window_ps;
            const auto &ta = per[static_cast<std::size_t>(a)];
            const auto &tb = per[static_cast<std::size_t>(b)];
            std::size_t lo = 0;
            for (double t : ta) {
                while (lo < tb.size() && tb[lo] < t - window_ps) {
                    ++lo;
                }
                for (std::size_t j = lo; j < tb.size() && tb[j] <= t + window_ps; ++j) {
                    const double delta = tb[j] - t;
                    const auto idx = static_cast<std::int64_t>(std::floor(delta / bin_width_ps + 0.5));
                    hist.bins[idx] += 1;
                }
            }
            out[{a, b}] = std::move(hist);
        }
    }
    return out;
}

/// Per-pulse two-click patterns for the four-detector experiment: counts
/// pulses in which exactly the channel pair (a, b) clicked. Pulse windows are
/// [k*T, (k+1)*T).
inline std::map<std::pair<int, int>, std::uint64_t> twofold_pattern_counts(const std::vector<TimeTag> &tags,
                                                                           int num_channels, double rep_period_ps) {
    if (!(rep_period_ps > 0.0)) {
        throw invalid_input("twofold_pattern_counts: repetition period must be positive");
    }
    detail::require_time_sorted(tags, "twofold_pattern_counts");
    std::map<std::pair<int, int>, std::uint64_t> counts;
    for (int a = 0; a < num_channels; ++a) {
        for (int b = a + 1; b < num_channels; ++b) {
            counts[{a, b}] = 0;
        }
    }
    std::map<std::int64_t, unsigned> masks;
    for (const auto &tag : tags) {
        if (tag.channel < 0 || tag.channel >= num_channels) {
            throw invalid_input("twofold_pattern_counts: channel index out of range");
        }
        const auto pulse = static_cast<std::int64_t>(std::floor(tag.time_ps / rep_period_ps));
        masks[pulse] |= 1u << tag.channel;
    }
    for (const auto &[pulse, mask] : masks) {
        if (std::popcount(mask) != 2) {
            continue;
        }
        int first = std::countr_zero(mask);
        int second = std::countr_zero(mask & (mask - 1));
        counts[{first, second}] += 1;
    }
    return counts;
}

inline std::string histogram_to_csv(const CoincidenceHistogram &hist) {
    std::ostringstream oss;
    oss << "delay_ps,count\n";
    oss.precision(17);
    for (const auto &[idx, count] : hist.bins) {
        oss << static_cast<double>(idx) * hist.bin_width_ps << "," << count << "\n";
    }
    return oss.str();
}

/// Writer for the tab-separated time-tag format "channel<TAB>timestamp_ps";
/// enforces sorted timestamps.
inline void write_time_tags(std::ostream &os, const std::vector<TimeTag> &tags) {
    detail::require_time_sorted(tags, "write_time_tags");
    os.precision(6);
    os << std::fixed;
    for (const auto &tag : tags) {
        os << tag.channel << '\t' << tag.time_ps << '\n';
    }
}

inline void write_time_tags(const std::string &path, const std::vector<TimeTag> &tags) {
    std::ofstream out(path);
    if (!out) {
        throw invalid_input("write_time_tags: cannot open " + path);
    }
    write_time_tags(out, tags);
}

/// Reader for the time-tag format; rejects malformed or unsorted input with
/// the offending line number.
inline std::vector<TimeTag> read_time_tags(std::istream &is) {
    std::vector<TimeTag> tags;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::istringstream ls(line);
        TimeTag tag;
        if (!(ls >> tag.channel >> tag.time_ps)) {
            throw invalid_input("read_time_tags: line " + std::to_string(line_no) + ": malformed record");
        }
        if (tag.time_ps < 0.0) {
            throw invalid_input("read_time_tags: line " + std::to_string(line_no) + ": negative timestamp");
        }
        if (!tags.empty() && tag.time_ps < tags.back().time_ps) {
            throw invalid_input("read_time_tags: line " + std::to_string(line_no) + ": timestamps not sorted");
        }
        tags.push_back(tag);
    }
    return tags;
}

inline std::vector<TimeTag> read_time_tags(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw invalid_input("read_time_tags: cannot open " + path);
    }
    return read_time_tags(in);
}

}  // namespace qpicsim
