#pragma once

#include <gwgen/error.hpp>
#include <gwgen/material.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace gwgen {

inline nlohmann::json to_json(const Material& m) {
    return nlohmann::json{{"name", m.name}, {"rho", m.rho},   {"e1", m.e1},    {"e2", m.e2},
                          {"g12", m.g12},   {"nu12", m.nu12}, {"nu23", m.nu23}};
}

inline Material material_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw FormatError("material entry must be a JSON object");
    Material m;
    try {
        m.name = j.value("name", std::string{});
        m.rho = j.at("rho").get<double>();
        m.e1 = j.at("e1").get<double>();
        m.e2 = j.at("e2").get<double>();
        m.g12 = j.at("g12").get<double>();
        m.nu12 = j.at("nu12").get<double>();
        m.nu23 = j.at("nu23").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("material '" + m.name + "': " + e.what());
    }
    return m;
}

/// Accepts either a single material object or an array of them.
inline std::vector<Material> materials_from_json(const nlohmann::json& j) {
    std::vector<Material> out;
    if (j.is_array()) {
        for (const auto& e : j) out.push_back(material_from_json(e));
    } else {
        out.push_back(material_from_json(j));
    }
    return out;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

inline std::vector<Material> load_materials(const std::filesystem::path& path) {
    return materials_from_json(read_json_file(path));
}

/// Loads one material; `name` selects from a multi-material file.
inline Material load_material(const std::filesystem::path& path, const std::optional<std::string>& name = {}) {
    const auto all = load_materials(path);
    if (name) {
        for (const auto& m : all)
            if (m.name == *name) return m;
        throw InvalidInput("material '" + *name + "' not found in " + path.string());
    }
    if (all.size() != 1) {
        throw InvalidInput(path.string() + " holds " + std::to_string(all.size()) +
                           " materials; select one by name");
    }
    return all.front();
}

} // namespace gwgen
