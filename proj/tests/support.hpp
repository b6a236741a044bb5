#pragma once

#include <gwgen/material.hpp>
#include <gwgen/material_io.hpp>

#include <filesystem>
#include <random>
#include <string>

namespace testing_support {

inline std::filesystem::path data_dir() { return GWGEN_DATA_DIR; }

inline gwgen::Material aluminium() { return gwgen::isotropic_material(70e9, 0.33, 2700.0, "aluminium"); }

inline gwgen::Material as4() { return gwgen::load_material(data_dir() / "materials" / "AS4M3502.json"); }

// Fresh empty directory under the system temp dir, unique per test name.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("gwgen-test-" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace testing_support
