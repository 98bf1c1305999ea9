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

#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "errors.hpp"
#include "mesh.hpp"

namespace qpicsim {

/// Mesh document schema (all keys required):
///   num_modes     circuit width
///   cells         array of {layer, top_mode, theta, phi}; layer and top_mode
///                 are 1-based in the document
///   output_phases array of num_modes radians
/// Values round-trip losslessly (shortest-round-trip double printing).
inline nlohmann::json mesh_to_json(const MeshConfig &cfg) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto &cell : cfg.cells()) {
        cells.push_back({{"layer", cell.layer + 1},
                         {"top_mode", cell.top_mode + 1},
                         {"theta", cell.theta},
                         {"phi", cell.phi}});
    }
    return nlohmann::json{
        {"num_modes", cfg.num_modes()}, {"cells", cells}, {"output_phases", cfg.output_phases()}};
}

inline MeshConfig mesh_from_json(const nlohmann::json &j) {
    if (!j.is_object()) {
        throw invalid_config("mesh document: expected an object");
    }
    const std::set<std::string> allowed = {"num_modes", "cells", "output_phases"};
    for (const auto &item : j.items()) {
        if (allowed.find(item.key()) == allowed.end()) {
            throw invalid_config("mesh document: unknown key '" + item.key() + "'");
        }
    }
    for (const auto &key : allowed) {
        if (!j.contains(key)) {
            throw invalid_config("mesh document: missing key '" + key + "'");
        }
    }
    if (!j["num_modes"].is_number_integer()) {
        throw invalid_config("mesh document: num_modes must be an integer");
    }
    const int num_modes = j["num_modes"].get<int>();
    if (!j["cells"].is_array() || !j["output_phases"].is_array()) {
        throw invalid_config("mesh document: cells and output_phases must be arrays");
    }

    std::vector<MziCell> cells;
    const std::set<std::string> cell_keys = {"layer", "top_mode", "theta", "phi"};
    for (const auto &cj : j["cells"]) {
        if (!cj.is_object()) {
            throw invalid_config("mesh document: each cell must be an object");
        }
        for (const auto &item : cj.items()) {
            if (cell_keys.find(item.key()) == cell_keys.end()) {
                throw invalid_config("mesh document: unknown cell key '" + item.key() + "'");
            }
        }
        for (const auto &key : cell_keys) {
            if (!cj.contains(key)) {
                throw invalid_config("mesh document: cell missing key '" + key + "'");
            }
        }
        if (!cj["layer"].is_number_integer() || !cj["top_mode"].is_number_integer()) {
            throw invalid_config("mesh document: cell layer and top_mode must be integers");
        }
        MziCell cell;
        cell.layer = cj["layer"].get<int>() - 1;
        cell.top_mode = cj["top_mode"].get<int>() - 1;
        if (cell.layer < 0 || cell.top_mode < 0) {
            throw invalid_config("mesh document: layer and top_mode are 1-based and must be >= 1");
        }
        cell.theta = cj["theta"].get<double>();
        cell.phi = cj["phi"].get<double>();
        cells.push_back(cell);
    }

    std::vector<double> phases;
    for (const auto &p : j["output_phases"]) {
        phases.push_back(p.get<double>());
    }
    try {
        return MeshConfig(num_modes, std::move(cells), std::move(phases));
    } catch (const invalid_input &err) {
        throw invalid_config(std::string("mesh document: ") + err.what());
    }
}

inline void save_mesh(const std::string &path, const MeshConfig &cfg) {
    std::ofstream out(path);
    if (!out) {
        throw invalid_config("save_mesh: cannot open " + path);
    }
    out << mesh_to_json(cfg).dump(2) << "\n";
}

inline MeshConfig load_mesh(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw invalid_config("load_mesh: cannot open " + path);
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error &err) {
        throw invalid_config("load_mesh: " + path + ": " + err.what());
    }
    return mesh_from_json(j);
}

}  // namespace qpicsim
