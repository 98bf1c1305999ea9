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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "detection.hpp"
#include "errors.hpp"
#include "interference.hpp"
#include "mesh.hpp"
#include "mesh_io.hpp"
#include "source.hpp"
#include "tomography.hpp"
#include "version.hpp"

namespace qpicsim {

enum class Scenario { hbt, hom_scan, suppression_law, bell_tomography, loss_budget };

inline std::string scenario_name(Scenario s) {
    switch (s) {
        case Scenario::hbt:
            return "hbt";
        case Scenario::hom_scan:
            return "hom-scan";
        case Scenario::suppression_law:
            return "suppression-law";
        case Scenario::bell_tomography:
            return "bell-tomography";
        default:
            return "loss-budget";
    }
}

struct HbtParams {
    std::uint64_t pulses = 1000000;
    int num_side_peaks = 5;
    double histogram_bin_ps = 100.0;
    double histogram_window_ps = 80000.0;
    bool write_tags = false;
};

struct HomScanParams {
    std::vector<double> phases;
    std::uint64_t pairs_per_setting = 10000;
    double switch_efficiency = 1.0;
    std::optional<double> visibility_override;
};

struct SuppressionParams {
    std::uint64_t pulses_per_input = 0;
    bool antibunched_only = true;
};

struct BellTomographyParams {
    std::uint64_t shots_per_setting = 1000;
};

struct LossBudgetParams {
    std::vector<LossStage> stages;
};

struct ExperimentConfig {
    Scenario scenario = Scenario::hbt;
    std::uint64_t seed = 0;
    std::string output_dir;
    std::optional<SourceModel> source;
    DetectorModel detector;
    std::optional<MeshConfig> circuit_mesh;
    std::string circuit_target;  // "dft4" or "bell" when no mesh file is given

    HbtParams hbt;
    HomScanParams hom;
    SuppressionParams suppression;
    BellTomographyParams bell;
    LossBudgetParams loss;

    nlohmann::json raw;
};

namespace cfgdetail {

inline void check_keys(const nlohmann::json &j, const std::set<std::string> &allowed, const std::string &path) {
    for (const auto &item : j.items()) {
        if (allowed.find(item.key()) == allowed.end()) {
            throw invalid_config("config error at " + path + ": unknown key '" + item.key() + "'");
        }
    }
}

inline const nlohmann::json &require_key(const nlohmann::json &j, const std::string &key, const std::string &path) {
    if (!j.contains(key)) {
        throw invalid_config("config error at " + path + ": missing required key '" + key + "'");
    }
    return j.at(key);
}

inline double get_double(const nlohmann::json &j, const std::string &key, const std::string &path) {
    const auto &v = require_key(j, key, path);
    if (!v.is_number()) {
        throw invalid_config("config error at " + path + "." + key + ": expected a number");
    }
    return v.get<double>();
}

inline double get_double_or(const nlohmann::json &j, const std::string &key, const std::string &path, double dflt) {
    if (!j.contains(key)) {
        return dflt;
    }
    if (!j.at(key).is_number()) {
        throw invalid_config("config error at " + path + "." + key + ": expected a number");
    }
    return j.at(key).get<double>();
}

inline std::uint64_t get_count(const nlohmann::json &j, const std::string &key, const std::string &path) {
    const auto &v = require_key(j, key, path);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        throw invalid_config("config error at " + path + "." + key + ": expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

inline std::uint64_t get_count_or(const nlohmann::json &j, const std::string &key, const std::string &path,
                                  std::uint64_t dflt) {
    return j.contains(key) ? get_count(j, key, path) : dflt;
}

inline bool get_bool_or(const nlohmann::json &j, const std::string &key, const std::string &path, bool dflt) {
    if (!j.contains(key)) {
        return dflt;
    }
    if (!j.at(key).is_boolean()) {
        throw invalid_config("config error at " + path + "." + key + ": expected a boolean");
    }
    return j.at(key).get<bool>();
}

inline SourceModel parse_source(const nlohmann::json &j, const std::string &path) {
    if (!j.is_object()) {
        throw invalid_config("config error at " + path + ": expected an object");
    }
    check_keys(j,
               {"lifetime_ps", "pure_dephasing_per_ns", "multiphoton_prob", "efficiency", "repetition_rate_mhz"},
               path);
    SourceModel m;
    m.lifetime_ps = get_double(j, "lifetime_ps", path);
    m.pure_dephasing_per_ns = get_double_or(j, "pure_dephasing_per_ns", path, 0.0);
    m.multiphoton_prob = get_double_or(j, "multiphoton_prob", path, 0.0);
    m.efficiency = get_double_or(j, "efficiency", path, 1.0);
    m.repetition_rate_mhz = get_double(j, "repetition_rate_mhz", path);
    try {
        m.validate();
    } catch (const invalid_input &err) {
        throw invalid_config("config error at " + path + ": " + err.what());
    }
    return m;
}

inline DetectorModel parse_detector(const nlohmann::json &j, const std::string &path) {
    if (!j.is_object()) {
        throw invalid_config("config error at " + path + ": expected an object");
    }
    check_keys(j, {"efficiency", "dark_count_rate_hz", "jitter_sigma_ps", "dead_time_ps"}, path);
    DetectorModel d;
    d.efficiency = get_double_or(j, "efficiency", path, 1.0);
    d.dark_count_rate_hz = get_double_or(j, "dark_count_rate_hz", path, 0.0);
    d.jitter_sigma_ps = get_double_or(j, "jitter_sigma_ps", path, 0.0);
    d.dead_time_ps = get_double_or(j, "dead_time_ps", path, 0.0);
    try {
        d.validate();
    } catch (const invalid_input &err) {
        throw invalid_config("config error at " + path + ": " + err.what());
    }
    return d;
}

inline std::uint64_t fnv1a64(const std::string &data) {
    std::uint64_t hash = 1469598103934665603ull;
    for (unsigned char c : data) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return hash;
}

inline std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 on (seed, stream) so scenario stages draw from independent
    // deterministic streams.
    std::uint64_t z = seed + stream * 0x9e3779b97f4a7c15ull + 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace cfgdetail

/// Parse and validate an experiment configuration document. The schema is
/// strict: unknown keys anywhere are errors, and only the parameter block
/// matching the selected scenario may be present. Referenced files are
/// resolved against base_dir and must exist.
inline ExperimentConfig parse_experiment_config_json(const nlohmann::json &j, const std::string &base_dir) {
    using namespace cfgdetail;
    if (!j.is_object()) {
        throw invalid_config("config error at <root>: expected an object");
    }
    const auto &scenario_j = require_key(j, "scenario", "<root>");
    if (!scenario_j.is_string()) {
        throw invalid_config("config error at scenario: expected a string");
    }
    const std::string sname = scenario_j.get<std::string>();
    ExperimentConfig cfg;
    if (sname == "hbt") {
        cfg.scenario = Scenario::hbt;
    } else if (sname == "hom-scan") {
        cfg.scenario = Scenario::hom_scan;
    } else if (sname == "suppression-law") {
        cfg.scenario = Scenario::suppression_law;
    } else if (sname == "bell-tomography") {
        cfg.scenario = Scenario::bell_tomography;
    } else if (sname == "loss-budget") {
        cfg.scenario = Scenario::loss_budget;
    } else {
        throw invalid_config("config error at scenario: unknown scenario '" + sname + "'");
    }

    std::set<std::string> allowed = {"scenario", "seed", "output_dir"};
    const std::string block_key = sname == "hom-scan"          ? "hom_scan"
                                  : sname == "suppression-law" ? "suppression_law"
                                  : sname == "bell-tomography" ? "bell_tomography"
                                  : sname == "loss-budget"     ? "loss_budget"
                                                               : "hbt";
    allowed.insert(block_key);
    const bool needs_source = cfg.scenario != Scenario::loss_budget;
    if (needs_source) {
        allowed.insert("source");
    }
    if (cfg.scenario == Scenario::hbt) {
        allowed.insert("detector");
    }
    if (cfg.scenario == Scenario::suppression_law || cfg.scenario == Scenario::bell_tomography) {
        allowed.insert("circuit");
    }
    check_keys(j, allowed, "<root>");

    cfg.seed = get_count_or(j, "seed", "<root>", 0);
    cfg.output_dir = require_key(j, "output_dir", "<root>").is_string()
                         ? j.at("output_dir").get<std::string>()
                         : throw invalid_config("config error at output_dir: expected a string");

    if (needs_source) {
        cfg.source = parse_source(require_key(j, "source", "<root>"), "source");
    }
    if (j.contains("detector")) {
        cfg.detector = parse_detector(j.at("detector"), "detector");
    }

    if (j.contains("circuit")) {
        const auto &cj = j.at("circuit");
        if (!cj.is_object()) {
            throw invalid_config("config error at circuit: expected an object");
        }
        check_keys(cj, {"target", "mesh_file"}, "circuit");
        if (cj.contains("target") == cj.contains("mesh_file")) {
            throw invalid_config("config error at circuit: provide exactly one of 'target' and 'mesh_file'");
        }
        if (cj.contains("target")) {
            cfg.circuit_target = cj.at("target").get<std::string>();
            if (cfg.circuit_target != "dft4" && cfg.circuit_target != "bell") {
                throw invalid_config("config error at circuit.target: unknown target '" + cfg.circuit_target + "'");
            }
        } else {
            const std::string rel = cj.at("mesh_file").get<std::string>();
            const std::filesystem::path p = std::filesystem::path(base_dir) / rel;
            if (!std::filesystem::exists(p)) {
                throw invalid_config("config error at circuit.mesh_file: file does not exist: " + p.string());
            }
            cfg.circuit_mesh = load_mesh(p.string());
        }
    }

    const nlohmann::json empty = nlohmann::json::object();
    const nlohmann::json &block = j.contains(block_key) ? j.at(block_key) : empty;
    if (!block.is_object()) {
        throw invalid_config("config error at " + block_key + ": expected an object");
    }
    switch (cfg.scenario) {
        case Scenario::hbt: {
            check_keys(block, {"pulses", "num_side_peaks", "histogram_bin_ps", "histogram_window_ps", "write_tags"},
                       block_key);
            cfg.hbt.pulses = get_count_or(block, "pulses", block_key, cfg.hbt.pulses);
            cfg.hbt.num_side_peaks =
                static_cast<int>(get_count_or(block, "num_side_peaks", block_key,
                                              static_cast<std::uint64_t>(cfg.hbt.num_side_peaks)));
            cfg.hbt.histogram_bin_ps = get_double_or(block, "histogram_bin_ps", block_key, cfg.hbt.histogram_bin_ps);
            cfg.hbt.histogram_window_ps =
                get_double_or(block, "histogram_window_ps", block_key, cfg.hbt.histogram_window_ps);
            cfg.hbt.write_tags = get_bool_or(block, "write_tags", block_key, false);
            if (cfg.hbt.pulses < 1) {
                throw invalid_config("config error at hbt.pulses: must be >= 1");
            }
            break;
        }
        case Scenario::hom_scan: {
            check_keys(block, {"phases", "phase_grid", "pairs_per_setting", "switch_efficiency", "visibility"},
                       block_key);
            if (block.contains("phases") && block.contains("phase_grid")) {
                throw invalid_config("config error at hom_scan: provide only one of 'phases' and 'phase_grid'");
            }
            if (block.contains("phases")) {
                if (!block.at("phases").is_array()) {
                    throw invalid_config("config error at hom_scan.phases: expected an array");
                }
                for (const auto &p : block.at("phases")) {
                    cfg.hom.phases.push_back(p.get<double>());
                }
            } else {
                const nlohmann::json &grid = block.contains("phase_grid") ? block.at("phase_grid") : empty;
                std::uint64_t count = 13;
                double lo = 0.0;
                double hi = kPi;
                if (!grid.empty()) {
                    check_keys(grid, {"count", "min", "max"}, "hom_scan.phase_grid");
                    count = get_count_or(grid, "count", "hom_scan.phase_grid", count);
                    lo = get_double_or(grid, "min", "hom_scan.phase_grid", lo);
                    hi = get_double_or(grid, "max", "hom_scan.phase_grid", hi);
                }
                if (count < 2) {
                    throw invalid_config("config error at hom_scan.phase_grid.count: must be >= 2");
                }
                for (std::uint64_t i = 0; i < count; ++i) {
                    cfg.hom.phases.push_back(lo + (hi - lo) * static_cast<double>(i) /
                                                     static_cast<double>(count - 1));
                }
            }
            cfg.hom.pairs_per_setting = get_count_or(block, "pairs_per_setting", block_key, cfg.hom.pairs_per_setting);
            cfg.hom.switch_efficiency = get_double_or(block, "switch_efficiency", block_key, 1.0);
            if (block.contains("visibility")) {
                cfg.hom.visibility_override = get_double(block, "visibility", block_key);
            }
            if (cfg.hom.pairs_per_setting < 1) {
                throw invalid_config("config error at hom_scan.pairs_per_setting: must be >= 1");
            }
            break;
        }
        case Scenario::suppression_law: {
            check_keys(block, {"pulses_per_input", "antibunched_only"}, block_key);
            cfg.suppression.pulses_per_input = get_count_or(block, "pulses_per_input", block_key, 0);
            cfg.suppression.antibunched_only = get_bool_or(block, "antibunched_only", block_key, true);
            break;
        }
        case Scenario::bell_tomography: {
            check_keys(block, {"shots_per_setting"}, block_key);
            cfg.bell.shots_per_setting = get_count_or(block, "shots_per_setting", block_key, cfg.bell.shots_per_setting);
            if (cfg.bell.shots_per_setting < 1) {
                throw invalid_config("config error at bell_tomography.shots_per_setting: must be >= 1");
            }
            break;
        }
        case Scenario::loss_budget: {
            check_keys(block, {"stages"}, block_key);
            const auto &stages = require_key(block, "stages", block_key);
            if (!stages.is_array() || stages.empty()) {
                throw invalid_config("config error at loss_budget.stages: expected a non-empty array");
            }
            for (std::size_t i = 0; i < stages.size(); ++i) {
                const auto &sj = stages[i];
                const std::string path = "loss_budget.stages[" + std::to_string(i) + "]";
                if (!sj.is_object()) {
                    throw invalid_config("config error at " + path + ": expected an object");
                }
                check_keys(sj, {"label", "loss_db", "efficiency"}, path);
                const std::string label = require_key(sj, "label", path).get<std::string>();
                if (sj.contains("loss_db") == sj.contains("efficiency")) {
                    throw invalid_config("config error at " + path +
                                         ": provide exactly one of 'loss_db' and 'efficiency'");
                }
                try {
                    if (sj.contains("loss_db")) {
                        cfg.loss.stages.push_back(LossStage::from_db(label, sj.at("loss_db").get<double>()));
                    } else {
                        cfg.loss.stages.push_back(
                            LossStage::from_efficiency(label, sj.at("efficiency").get<double>()));
                    }
                } catch (const invalid_input &err) {
                    throw invalid_config("config error at " + path + ": " + err.what());
                }
            }
            break;
        }
    }

    cfg.raw = j;
    return cfg;
}

inline ExperimentConfig parse_experiment_config(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw invalid_config("config error: cannot open " + path);
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error &err) {
        throw invalid_config("config error in " + path + ": " + err.what());
    }
    return parse_experiment_config_json(j, std::filesystem::path(path).parent_path().string());
}

struct ScenarioResult {
    nlohmann::json summary;
    std::vector<std::string> output_files;  // paths relative to output_dir
};

namespace rundetail {

inline void write_text_file(const std::filesystem::path &path, const std::string &content) {
    std::ofstream out(path);
    if (!out) {
        throw invalid_config("cannot open output file " + path.string());
    }
    out << content;
}

inline std::string format_double(double v) {
    std::ostringstream oss;
    oss.precision(17);
    oss << v;
    return oss.str();
}

inline UnitaryMatrix circuit_for(const ExperimentConfig &cfg, const std::string &default_target) {
    if (cfg.circuit_mesh.has_value()) {
        return mesh_to_unitary(*cfg.circuit_mesh);
    }
    const std::string target = cfg.circuit_target.empty() ? default_target : cfg.circuit_target;
    if (target == "dft4") {
        return dft_unitary(4);
    }
    return mesh_to_unitary(bell_settings());
}

inline double source_visibility(const ExperimentConfig &cfg) {
    if (cfg.scenario == Scenario::hom_scan && cfg.hom.visibility_override.has_value()) {
        return *cfg.hom.visibility_override;
    }
    const SourceModel &m = *cfg.source;
    return indistinguishability_from_dephasing(m.lifetime_ps, m.pure_dephasing_per_ns);
}

inline ScenarioResult run_hbt(const ExperimentConfig &cfg, const std::filesystem::path &out_dir) {
    const SourceModel &model = *cfg.source;
    const double period = model.repetition_period_ps();
    const std::uint64_t pulses = cfg.hbt.pulses;

    // Stream arrivals pulse by pulse (same draw sequence as
    // generate_pulse_stream) and split 50:50; for threshold detection the
    // split statistics match the quantum beam-splitter result exactly.
    Rng source_rng(cfg.seed);
    Rng route_rng(cfgdetail::sub_seed(cfg.seed, 1));
    std::vector<TimeTag> arrivals;
    arrivals.reserve(static_cast<std::size_t>(static_cast<double>(pulses) * model.efficiency *
                                              (1.0 + model.multiphoton_prob) * 1.1) +
                     16);
    for (std::uint64_t i = 0; i < pulses; ++i) {
        const int emitted = 1 + (source_rng.bernoulli(model.multiphoton_prob) ? 1 : 0);
        for (int k = 0; k < emitted; ++k) {
            if (source_rng.bernoulli(model.efficiency)) {
                const double t = static_cast<double>(i) * period + source_rng.exponential(model.lifetime_ps);
                arrivals.push_back({route_rng.bernoulli(0.5) ? 0 : 1, t});
            }
        }
    }
    std::sort(arrivals.begin(), arrivals.end(),
              [](const TimeTag &a, const TimeTag &b) { return a.time_ps < b.time_ps; });

    const double duration = static_cast<double>(pulses) * period;
    const std::vector<TimeTag> tags =
        simulate_clicks(arrivals, cfg.detector, 2, duration, cfgdetail::sub_seed(cfg.seed, 2));
    std::vector<TimeTag> tags_a;
    std::vector<TimeTag> tags_b;
    for (const auto &tag : tags) {
        (tag.channel == 0 ? tags_a : tags_b).push_back(tag);
    }

    const G2Estimate est = g2_estimator(tags_a, tags_b, period, cfg.hbt.num_side_peaks);
    const auto hists = coincidence_histogram(tags, 2, cfg.hbt.histogram_bin_ps, cfg.hbt.histogram_window_ps);

    ScenarioResult result;
    write_text_file(out_dir / "histogram.csv", histogram_to_csv(hists.at({0, 1})));
    result.output_files.push_back("histogram.csv");
    if (cfg.hbt.write_tags) {
        write_time_tags((out_dir / "tags.txt").string(), tags);
        result.output_files.push_back("tags.txt");
    }

    result.summary = {{"scenario", "hbt"},
                      {"g2", est.g2},
                      {"g2_stderr", est.stderr_},
                      {"zero_window_counts", est.zero_window},
                      {"side_window_mean", est.side_mean},
                      {"g2_expected_ideal_detector", g2_expected(model)},
                      {"pulses", pulses}};
    return result;
}

inline ScenarioResult run_hom_scan(const ExperimentConfig &cfg, const std::filesystem::path &out_dir) {
    const SourceModel &model = *cfg.source;
    const double v_true = source_visibility(cfg);
    const GramMatrix s = GramMatrix::pair_overlap(v_true);
    const std::vector<double> &phases = cfg.hom.phases;
    const std::uint64_t pairs_needed = cfg.hom.pairs_per_setting * phases.size();

    // Demultiplex a long enough stream; extend deterministically in chunks if
    // switch losses starve the pair budget. Two consecutive barren chunks
    // abort the scan.
    std::vector<std::pair<PulseRecord, PulseRecord>> pairs;
    const double occ = model.efficiency * (1.0 + model.multiphoton_prob);
    const double pair_rate = std::max(0.5 * occ * occ * cfg.hom.switch_efficiency * cfg.hom.switch_efficiency, 1e-6);
    const std::uint64_t chunk_pulses = std::clamp<std::uint64_t>(
        static_cast<std::uint64_t>(static_cast<double>(pairs_needed) / pair_rate * 1.2) + 64, 1024, 4000000);
    int barren = 0;
    for (int chunk = 0; chunk < 64 && pairs.size() < pairs_needed && barren < 2; ++chunk) {
        const auto stream =
            generate_pulse_stream(model, chunk_pulses, cfgdetail::sub_seed(cfg.seed, 10 + 2ull * chunk));
        const auto chunk_pairs =
            demultiplex(stream, cfg.hom.switch_efficiency, cfgdetail::sub_seed(cfg.seed, 11 + 2ull * chunk));
        barren = chunk_pairs.empty() ? barren + 1 : 0;
        pairs.insert(pairs.end(), chunk_pairs.begin(), chunk_pairs.end());
    }
    if (pairs.size() < pairs_needed) {
        throw estimation_error("hom-scan: demultiplexer starved, could not assemble enough photon pairs");
    }

    Rng outcome_rng(cfgdetail::sub_seed(cfg.seed, 3));
    const PhotonConfig both_inputs({1, 1});
    std::vector<double> coincidences(phases.size());
    std::vector<double> singles_a(phases.size());
    std::vector<double> singles_b(phases.size());
    std::size_t pair_cursor = 0;
    for (std::size_t i = 0; i < phases.size(); ++i) {
        const MeshConfig mzi(2, {{0, 0, phases[i], 0.0}}, {0.0, 0.0});
        const UnitaryMatrix u = mesh_to_unitary(mzi);
        const double p11 = output_probability(u, both_inputs, PhotonConfig({1, 1}), s);
        const double p20 = output_probability(u, both_inputs, PhotonConfig({2, 0}), s);
        const double p02 = output_probability(u, both_inputs, PhotonConfig({0, 2}), s);
        const std::vector<double> weights = {p20, p11, p02};
        std::uint64_t c = 0;
        std::uint64_t sa = 0;
        std::uint64_t sb = 0;
        for (std::uint64_t k = 0; k < cfg.hom.pairs_per_setting; ++k, ++pair_cursor) {
            switch (outcome_rng.categorical(weights)) {
                case 0:
                    ++sa;
                    break;
                case 1:
                    ++c;
                    ++sa;
                    ++sb;
                    break;
                default:
                    ++sb;
                    break;
            }
        }
        coincidences[i] = static_cast<double>(c);
        singles_a[i] = static_cast<double>(sa);
        singles_b[i] = static_cast<double>(sb);
    }

    const HomFringeFit fit = fit_hom_fringe(phases, coincidences, singles_a, singles_b);

    std::ostringstream csv;
    csv << "phase_rad,pairs,coincidences,singles_a,singles_b\n";
    for (std::size_t i = 0; i < phases.size(); ++i) {
        csv << format_double(phases[i]) << "," << cfg.hom.pairs_per_setting << "," << coincidences[i] << ","
            << singles_a[i] << "," << singles_b[i] << "\n";
    }
    ScenarioResult result;
    write_text_file(out_dir / "fringe.csv", csv.str());
    result.output_files.push_back("fringe.csv");
    result.summary = {{"scenario", "hom-scan"},
                      {"visibility_fit", fit.visibility},
                      {"visibility_stderr", fit.stderr_},
                      {"visibility_true", v_true},
                      {"amplitude", fit.amplitude},
                      {"chi2", fit.chi2},
                      {"pairs_per_setting", cfg.hom.pairs_per_setting},
                      {"settings", phases.size()}};
    return result;
}

inline std::string verdict_name(SuppressionVerdict v) {
    switch (v) {
        case SuppressionVerdict::suppressed:
            return "suppressed";
        case SuppressionVerdict::allowed:
            return "allowed";
        default:
            return "not-applicable";
    }
}

inline ScenarioResult run_suppression_law(const ExperimentConfig &cfg, const std::filesystem::path &out_dir) {
    const UnitaryMatrix u = circuit_for(cfg, "dft4");
    if (u.dim() != 4) {
        throw invalid_config("suppression-law: circuit must have 4 modes");
    }
    const double v = source_visibility(cfg);
    const GramMatrix s = GramMatrix::pair_overlap(v);

    ScenarioResult result;
    std::ostringstream verdicts;
    verdicts << "input_config,output_config,verdict,probability\n";
    double max_suppressed = 0.0;
    Rng sample_rng(cfgdetail::sub_seed(cfg.seed, 4));

    for (int a = 1; a <= 4; ++a) {
        for (int b = a + 1; b <= 4; ++b) {
            const PhotonConfig input = PhotonConfig::from_modes({a, b}, 4);
            const auto dist = full_distribution(u, input, s, cfg.suppression.antibunched_only);
            const std::string file_name = "distribution_" + std::to_string(a) + std::to_string(b) + ".csv";
            std::ostringstream csv;
            csv << "output_config,probability\n";
            std::vector<double> weights;
            std::vector<const PhotonConfig *> outputs;
            for (const auto &[out_cfg, p] : dist) {
                csv << "\"" << out_cfg.to_mode_string() << "\"," << format_double(p) << "\n";
                weights.push_back(p);
                outputs.push_back(&out_cfg);
                const auto verdict = suppression_predicate(input, out_cfg, 4);
                verdicts << "\"" << input.to_mode_string() << "\",\"" << out_cfg.to_mode_string() << "\","
                         << verdict_name(verdict) << "," << format_double(p) << "\n";
                if (verdict == SuppressionVerdict::suppressed) {
                    max_suppressed = std::max(max_suppressed, p);
                }
            }
            write_text_file(out_dir / file_name, csv.str());
            result.output_files.push_back(file_name);

            if (cfg.suppression.pulses_per_input > 0) {
                std::map<std::string, std::uint64_t> counts;
                for (const auto *out_cfg : outputs) {
                    counts[out_cfg->to_mode_string()] = 0;
                }
                for (std::uint64_t k = 0; k < cfg.suppression.pulses_per_input; ++k) {
                    counts[outputs[sample_rng.categorical(weights)]->to_mode_string()] += 1;
                }
                std::ostringstream ccsv;
                ccsv << "output_config,count\n";
                for (const auto &[name, count] : counts) {
                    ccsv << "\"" << name << "\"," << count << "\n";
                }
                const std::string cfile = "counts_" + std::to_string(a) + std::to_string(b) + ".csv";
                write_text_file(out_dir / cfile, ccsv.str());
                result.output_files.push_back(cfile);
            }
        }
    }
    write_text_file(out_dir / "verdicts.csv", verdicts.str());
    result.output_files.push_back("verdicts.csv");

    result.summary = {{"scenario", "suppression-law"},
                      {"visibility", v},
                      {"max_suppressed_probability", max_suppressed},
                      {"antibunched_only", cfg.suppression.antibunched_only}};
    return result;
}

inline ScenarioResult run_bell_tomography(const ExperimentConfig &cfg, const std::filesystem::path &out_dir) {
    const MeshConfig mesh = cfg.circuit_mesh.has_value()
                                ? *cfg.circuit_mesh
                                : (cfg.circuit_target == "dft4" ? compile_unitary(dft_unitary(4)) : bell_settings());
    const double v = source_visibility(cfg);
    const GramMatrix s = GramMatrix::pair_overlap(v);

    const auto counts = simulate_tomography_counts(mesh, s, cfg.bell.shots_per_setting,
                                                   cfgdetail::sub_seed(cfg.seed, 5));
    const MleResult mle = mle_reconstruct(counts);
    const auto [ideal_state, success] =
        postselect_two_qubit(mesh_to_unitary(mesh), PhotonConfig({1, 0, 1, 0}), s);

    std::ostringstream counts_csv;
    counts_csv << "setting,outcome,count\n";
    const std::array<const char *, 4> outcome_names = {"00", "01", "10", "11"};
    for (const auto &[setting, arr] : counts) {
        for (std::size_t o = 0; o < 4; ++o) {
            counts_csv << setting << "," << outcome_names[o] << "," << arr[o] << "\n";
        }
    }
    std::ostringstream rho_csv;
    rho_csv << "row,col,real,imag\n";
    for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t c = 0; c < 4; ++c) {
            rho_csv << r << "," << c << "," << format_double(mle.state(r, c).real()) << ","
                    << format_double(mle.state(r, c).imag()) << "\n";
        }
    }

    ScenarioResult result;
    write_text_file(out_dir / "counts.csv", counts_csv.str());
    write_text_file(out_dir / "rho.csv", rho_csv.str());
    result.output_files = {"counts.csv", "rho.csv"};
    result.summary = {{"scenario", "bell-tomography"},
                      {"fidelity_psi_plus", fidelity(mle.state, bell_psi_plus())},
                      {"fidelity_ideal_model", fidelity(ideal_state, bell_psi_plus())},
                      {"success_probability", success},
                      {"log_likelihood", mle.log_likelihood},
                      {"mle_iterations", mle.iterations},
                      {"visibility", v},
                      {"shots_per_setting", cfg.bell.shots_per_setting}};
    return result;
}

inline ScenarioResult run_loss_budget(const ExperimentConfig &cfg, const std::filesystem::path &out_dir) {
    const LossBudgetReport report = loss_budget(cfg.loss.stages);
    std::ostringstream csv;
    csv << "label,loss_db,efficiency,cumulative_efficiency\n";
    for (const auto &stage : report.stages) {
        csv << "\"" << stage.label << "\"," << format_double(stage.loss_db) << ","
            << format_double(stage.efficiency) << "," << format_double(stage.cumulative_efficiency) << "\n";
    }
    ScenarioResult result;
    write_text_file(out_dir / "stages.csv", csv.str());
    result.output_files.push_back("stages.csv");
    result.summary = {{"scenario", "loss-budget"}, {"end_to_end_efficiency", report.end_to_end}};
    if (cfg.source.has_value()) {
        result.summary["projected_rate_mhz"] = cfg.source->repetition_rate_mhz * report.end_to_end;
    }
    return result;
}

}  // namespace rundetail

/// Execute one scenario: write its result files and manifest under
/// cfg.output_dir and return the summary record. Outputs are deterministic in
/// (config, seed); the manifest additionally records wall time.
inline ScenarioResult run_scenario(const ExperimentConfig &cfg) {
    const auto start = std::chrono::steady_clock::now();
    const std::filesystem::path out_dir(cfg.output_dir);
    std::filesystem::create_directories(out_dir);

    ScenarioResult result;
    nlohmann::json manifest = {{"config", cfg.raw},
                               {"config_hash", cfgdetail::fnv1a64(cfg.raw.dump())},
                               {"seed", cfg.seed},
                               {"version", kVersion},
                               {"status", "OK"}};
    try {
        switch (cfg.scenario) {
            case Scenario::hbt:
                result = rundetail::run_hbt(cfg, out_dir);
                break;
            case Scenario::hom_scan:
                result = rundetail::run_hom_scan(cfg, out_dir);
                break;
            case Scenario::suppression_law:
                result = rundetail::run_suppression_law(cfg, out_dir);
                break;
            case Scenario::bell_tomography:
                result = rundetail::run_bell_tomography(cfg, out_dir);
                break;
            case Scenario::loss_budget:
                result = rundetail::run_loss_budget(cfg, out_dir);
                break;
        }
    } catch (const std::exception &err) {
        manifest["status"] = "FAILED";
        manifest["error"] = err.what();
        manifest["wall_time_ms"] =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
        rundetail::write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
        throw;
    }

    rundetail::write_text_file(out_dir / "summary.json", result.summary.dump(2) + "\n");
    result.output_files.push_back("summary.json");

    manifest["outputs"] = result.output_files;
    manifest["wall_time_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    rundetail::write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
    return result;
}

}  // namespace qpicsim
