#pragma once

// Material-space sampling and dataset synthesis: every (material, layup,
// frequency) tuple yields one polar profile and raster per mode, bound
// together by a JSON Lines manifest.

#include <gwgen/error.hpp>
#include <gwgen/material.hpp>
#include <gwgen/material_io.hpp>
#include <gwgen/polar.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace gwgen {

struct Range {
    double lo = 0.0, hi = 0.0;
};

/// Uniform sampling box over the six ply properties, SI units.
struct MaterialBounds {
    Range rho{1304.0, 1760.0};
    Range e1{115e9, 184e9};
    Range e2{6e9, 14e9};
    Range g12{3e9, 9e9};
    Range nu12{0.2, 0.52};
    Range nu23{0.23, 0.59};

    void validate() const {
        const std::pair<const char*, Range> all[] = {{"rho", rho},   {"e1", e1},     {"e2", e2},
                                                     {"g12", g12},   {"nu12", nu12}, {"nu23", nu23}};
        for (const auto& [name, r] : all) {
            if (!(r.lo < r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi)) {
                throw InvalidInput(std::string("bounds for ") + name + " need lower < upper");
            }
        }
    }

    bool contains(const Material& m) const {
        auto in = [](const Range& r, double v) { return v >= r.lo && v <= r.hi; };
        return in(rho, m.rho) && in(e1, m.e1) && in(e2, m.e2) && in(g12, m.g12) && in(nu12, m.nu12) &&
               in(nu23, m.nu23);
    }
};

struct SampledMaterials {
    std::vector<Material> materials;
    std::size_t rejections = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Uniform in [0, 1) from the top 53 bits; identical on every standard library.
inline double unit_uniform(std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

inline double draw(std::mt19937_64& g, const Range& r) { return r.lo + (r.hi - r.lo) * unit_uniform(g); }

} // namespace detail

/// n uniform draws; material i comes from its own stream seeded by
/// (seed, i), so any subset can be regenerated independently. Draws that
/// are not positive definite are redrawn from the same stream.
inline SampledMaterials sample_materials(const MaterialBounds& bounds, std::size_t n, std::uint64_t seed) {
    bounds.validate();
    SampledMaterials out;
    out.materials.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::mt19937_64 g(detail::splitmix64(seed ^ detail::splitmix64(i + 1)));
        for (int attempt = 0;; ++attempt) {
            Material m;
            std::ostringstream name;
            name << "sample-" << std::setw(4) << std::setfill('0') << i;
            m.name = name.str();
            m.rho = detail::draw(g, bounds.rho);
            m.e1 = detail::draw(g, bounds.e1);
            m.e2 = detail::draw(g, bounds.e2);
            m.g12 = detail::draw(g, bounds.g12);
            m.nu12 = detail::draw(g, bounds.nu12);
            m.nu23 = detail::draw(g, bounds.nu23);
            if (is_admissible(m)) {
                out.materials.push_back(std::move(m));
                break;
            }
            ++out.rejections;
            const std::size_t draws = out.rejections + out.materials.size() + 1;
            if (attempt >= 100 || (draws >= 20 && 2 * out.rejections > draws)) {
                std::ostringstream os;
                os << "material sampling aborted: " << out.rejections << " of " << draws
                   << " draws violate positive definiteness; the bounds are inconsistent";
                throw InvalidInput(os.str());
            }
        }
    }
    return out;
}

struct DatasetConfig {
    std::vector<Material> materials;
    std::vector<double> frequencies{20e3, 40e3, 60e3, 80e3, 100e3, 120e3, 140e3, 160e3, 180e3, 200e3};
    std::vector<LayupKind> layups{LayupKind::unidirectional};
    std::vector<ModeLabel> modes{ModeLabel::A0, ModeLabel::S0};
    std::filesystem::path output_dir = "out";
    int plies = 16;
    double thickness = 2e-3;
    int raster_size = 64;
    std::map<ModeLabel, double> scales{{ModeLabel::A0, 3000.0}, {ModeLabel::S0, 12000.0}};
    PolarConfig polar;

    void validate() const {
        if (frequencies.empty() || layups.empty() || modes.empty()) {
            throw InvalidInput("dataset config needs nonempty frequencies, layups and modes");
        }
        for (double f : frequencies)
            if (!(f > 0.0)) throw InvalidInput("dataset frequencies must be positive");
        for (auto m : modes) {
            if (m != ModeLabel::A0 && m != ModeLabel::S0) throw InvalidInput("dataset modes must be A0 or S0");
            if (!scales.count(m)) throw InvalidInput("no raster scale for " + std::string(to_string(m)));
        }
        if (raster_size <= 0 || raster_size % 2) throw InvalidInput("raster_size must be positive and even");
        std::set<std::string> names;
        for (const auto& m : materials) {
            if (!names.insert(m.name).second) throw InvalidInput("duplicate material name '" + m.name + "'");
        }
        for (auto k : layups) (void)build_layup(k, plies, thickness);
    }
};

inline std::string layup_tag(LayupKind k) {
    switch (k) {
    case LayupKind::unidirectional: return "ud";
    case LayupKind::cross_ply: return "cp";
    case LayupKind::quasi_isotropic: return "qi";
    }
    return "xx";
}

/// Config file layout:
///   {"materials": [..] | {"file": "table.json"} | {"sample": {"count", "seed", "bounds"?}},
///    "frequencies": [Hz..], "layups": [..], "modes": [..], "output_dir": "..",
///    "plies", "thickness", "raster_size", "scales": {"A0", "S0"}}
/// A relative material file resolves against `base`; output_dir is taken as given.
inline DatasetConfig dataset_config_from_json(const nlohmann::json& j, const std::filesystem::path& base = {}) {
    DatasetConfig cfg;
    try {
        const auto& mj = j.at("materials");
        if (mj.is_array()) {
            cfg.materials = materials_from_json(mj);
        } else if (mj.contains("file")) {
            auto p = std::filesystem::path(mj.at("file").get<std::string>());
            if (p.is_relative()) p = base / p;
            cfg.materials = load_materials(p);
            if (mj.contains("names")) {
                const auto names = mj.at("names").get<std::vector<std::string>>();
                std::vector<Material> pick;
                for (const auto& n : names) {
                    auto it = std::find_if(cfg.materials.begin(), cfg.materials.end(),
                                           [&](const Material& m) { return m.name == n; });
                    if (it == cfg.materials.end()) throw InvalidInput("material '" + n + "' not in " + p.string());
                    pick.push_back(*it);
                }
                cfg.materials = std::move(pick);
            }
        } else if (mj.contains("sample")) {
            const auto& s = mj.at("sample");
            MaterialBounds b;
            if (s.contains("bounds")) {
                const auto& bj = s.at("bounds");
                auto rd = [&](const char* key, Range& r, double unit) {
                    if (bj.contains(key)) {
                        const auto v = bj.at(key).get<std::vector<double>>();
                        if (v.size() != 2) throw FormatError(std::string("bounds.") + key + " needs [lower, upper]");
                        r = {v[0] * unit, v[1] * unit};
                    }
                };
                // Moduli in GPa, density in kg/m^3.
                rd("rho", b.rho, 1.0);
                rd("e1", b.e1, 1e9);
                rd("e2", b.e2, 1e9);
                rd("g12", b.g12, 1e9);
                rd("nu12", b.nu12, 1.0);
                rd("nu23", b.nu23, 1.0);
            }
            cfg.materials = sample_materials(b, s.at("count").get<std::size_t>(), s.at("seed").get<std::uint64_t>()).materials;
        } else {
            throw FormatError("materials must be a list, {\"file\": ..} or {\"sample\": ..}");
        }
        if (j.contains("frequencies")) cfg.frequencies = j.at("frequencies").get<std::vector<double>>();
        if (j.contains("layups")) {
            cfg.layups.clear();
            for (const auto& s : j.at("layups")) cfg.layups.push_back(parse_layup_kind(s.get<std::string>()));
        }
        if (j.contains("modes")) {
            cfg.modes.clear();
            for (const auto& s : j.at("modes")) cfg.modes.push_back(parse_mode(s.get<std::string>()));
        }
        if (j.contains("output_dir")) {
            cfg.output_dir = j.at("output_dir").get<std::string>();
        }
        cfg.plies = j.value("plies", cfg.plies);
        cfg.thickness = j.value("thickness", cfg.thickness);
        cfg.raster_size = j.value("raster_size", cfg.raster_size);
        if (j.contains("scales")) {
            for (const auto& [k, v] : j.at("scales").items()) cfg.scales[parse_mode(k)] = v.get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("dataset config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

inline DatasetConfig load_dataset_config(const std::filesystem::path& path) {
    return dataset_config_from_json(read_json_file(path), path.parent_path());
}

/// One planned output: a (material, layup, frequency, mode) tuple.
struct PlannedRecord {
    std::string id; // shared by all modes of one (material, layup, frequency)
    std::size_t material = 0;
    LayupKind layup = LayupKind::unidirectional;
    double f = 0.0;
    ModeLabel mode = ModeLabel::A0;
};

inline std::string record_id(std::size_t material, LayupKind layup, double f) {
    std::ostringstream os;
    os << 'm' << std::setw(4) << std::setfill('0') << material << '-' << layup_tag(layup) << "-f" << std::setw(6)
       << std::setfill('0') << std::llround(f);
    return os.str();
}

inline std::vector<PlannedRecord> plan_records(const DatasetConfig& cfg) {
    std::vector<PlannedRecord> out;
    out.reserve(cfg.materials.size() * cfg.layups.size() * cfg.frequencies.size() * cfg.modes.size());
    for (std::size_t i = 0; i < cfg.materials.size(); ++i)
        for (auto k : cfg.layups)
            for (double f : cfg.frequencies)
                for (auto md : cfg.modes) out.push_back({record_id(i, k, f), i, k, f, md});
    return out;
}

struct ManifestRecord {
    std::string id;
    Material material;
    LayupKind layup = LayupKind::unidirectional;
    double f = 0.0;
    ModeLabel mode = ModeLabel::A0;
    std::string raster;  // relative to the manifest directory; empty when failed
    std::string profile; // likewise
    double symmetry_score = 0.0;
    int interpolated = 0;
    bool failed = false;
    std::string error;

    auto key() const { return std::pair{id, std::string(to_string(mode))}; }
    bool operator==(const ManifestRecord&) const = default;
};

inline nlohmann::json to_json(const ManifestRecord& r) {
    nlohmann::json j{{"id", r.id},
                     {"material", to_json(r.material)},
                     {"layup", std::string(to_string(r.layup))},
                     {"frequency_hz", r.f},
                     {"mode", std::string(to_string(r.mode))},
                     {"raster", r.raster},
                     {"profile", r.profile},
                     {"symmetry_score", r.symmetry_score},
                     {"interpolated_angles", r.interpolated},
                     {"status", r.failed ? "failed" : "ok"}};
    if (r.failed) j["error"] = r.error;
    return j;
}

inline ManifestRecord manifest_record_from_json(const nlohmann::json& j) {
    ManifestRecord r;
    r.id = j.at("id").get<std::string>();
    r.material = material_from_json(j.at("material"));
    r.layup = parse_layup_kind(j.at("layup").get<std::string>());
    r.f = j.at("frequency_hz").get<double>();
    r.mode = parse_mode(j.at("mode").get<std::string>());
    r.raster = j.at("raster").get<std::string>();
    r.profile = j.at("profile").get<std::string>();
    r.symmetry_score = j.at("symmetry_score").get<double>();
    r.interpolated = j.value("interpolated_angles", 0);
    const auto status = j.at("status").get<std::string>();
    if (status != "ok" && status != "failed") throw FormatError("unknown status '" + status + "'");
    r.failed = status == "failed";
    r.error = j.value("error", std::string{});
    return r;
}

inline std::string manifest_line(const ManifestRecord& r) { return to_json(r).dump(); }

inline void sort_records(std::vector<ManifestRecord>& v) {
    std::sort(v.begin(), v.end(), [](const ManifestRecord& a, const ManifestRecord& b) { return a.key() < b.key(); });
}

namespace detail {

// Parses JSON Lines. With `lenient`, an unparseable final line (an
// interrupted append) is dropped instead of reported.
inline std::vector<ManifestRecord> parse_manifest(const std::filesystem::path& path, bool lenient) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    std::vector<ManifestRecord> out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        try {
            out.push_back(manifest_record_from_json(nlohmann::json::parse(lines[i])));
        } catch (const std::exception& e) {
            if (lenient && i + 1 == lines.size()) break;
            throw FormatError(path.string() + ": line " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

} // namespace detail

/// Reads a manifest, checks that every referenced file exists and returns
/// the records ordered by (id, mode).
inline std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path, bool check_files = true) {
    auto records = detail::parse_manifest(path, false);
    if (check_files) {
        const auto dir = path.parent_path();
        std::vector<std::string> dangling;
        for (const auto& r : records) {
            if (r.failed) continue;
            if (!std::filesystem::exists(dir / r.raster) || !std::filesystem::exists(dir / r.profile)) {
                dangling.push_back(r.id + "_" + std::string(to_string(r.mode)));
            }
        }
        if (!dangling.empty()) {
            std::string msg = path.string() + ": " + std::to_string(dangling.size()) + " records reference missing files:";
            for (const auto& d : dangling) msg += " " + d;
            throw ValidationError(msg);
        }
    }
    sort_records(records);
    return records;
}

inline void write_manifest(const std::vector<ManifestRecord>& records, const std::filesystem::path& path) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        for (const auto& r : records) out << manifest_line(r) << '\n';
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

struct GenerateOptions {
    int jobs = 1;
    bool overwrite = false;
    std::function<void(const std::string&)> log; // progress lines, may be empty
};

struct DatasetSummary {
    std::size_t planned = 0;
    std::size_t generated = 0;
    std::size_t skipped = 0;
    std::size_t failed = 0;
    std::vector<ManifestRecord> records;
};

/// JSON record of a run's inputs. A rerun into the same directory must match it.
inline nlohmann::json run_description(const DatasetConfig& cfg) {
    nlohmann::json mats = nlohmann::json::array();
    for (const auto& m : cfg.materials) mats.push_back(to_json(m));
    nlohmann::json layups = nlohmann::json::array(), modes = nlohmann::json::array(), scales;
    for (auto k : cfg.layups) layups.push_back(std::string(to_string(k)));
    for (auto m : cfg.modes) modes.push_back(std::string(to_string(m)));
    for (const auto& [m, s] : cfg.scales) scales[std::string(to_string(m))] = s;
    return {{"materials", mats},
            {"frequencies", cfg.frequencies},
            {"layups", layups},
            {"modes", modes},
            {"plies", cfg.plies},
            {"thickness", cfg.thickness},
            {"raster_size", cfg.raster_size},
            {"scales", scales}};
}

/// Solves, rasterizes and writes every planned record. Records already in the
/// directory's manifest are kept; solver failures become flagged records.
inline DatasetSummary generate_dataset(const DatasetConfig& cfg, const GenerateOptions& opt = {}) {
    namespace fs = std::filesystem;
    cfg.validate();
    const fs::path dir = cfg.output_dir;
    const fs::path manifest = dir / "manifest.jsonl";
    const fs::path run_file = dir / "dataset.json";
    try {
        fs::create_directories(dir / "rasters");
        fs::create_directories(dir / "profiles");
    } catch (const fs::filesystem_error& e) {
        throw IoError(e.what());
    }

    const auto desc = run_description(cfg);
    std::map<std::pair<std::string, std::string>, ManifestRecord> kept;
    if (!opt.overwrite && fs::exists(manifest)) {
        if (!fs::exists(run_file) || read_json_file(run_file) != desc) {
            throw InvalidInput(dir.string() + " holds a dataset generated from a different configuration; use --overwrite");
        }
        for (auto& r : detail::parse_manifest(manifest, true)) {
            if (r.failed) continue;
            if (fs::exists(dir / r.raster) && fs::exists(dir / r.profile)) kept[r.key()] = r;
        }
    }
    {
        std::ofstream out(run_file, std::ios::trunc);
        if (!out) throw IoError("cannot write " + run_file.string());
        out << desc.dump(2) << '\n';
    }

    const auto plan = plan_records(cfg);
    DatasetSummary sum;
    sum.planned = plan.size();

    // Group the plan into solve tuples; one angle sweep covers all modes.
    struct Task {
        std::string id;
        std::size_t material;
        LayupKind layup;
        double f;
        std::vector<ModeLabel> modes;
    };
    std::vector<Task> tasks;
    for (const auto& p : plan) {
        if (kept.count({p.id, std::string(to_string(p.mode))})) continue;
        if (tasks.empty() || tasks.back().id != p.id) tasks.push_back({p.id, p.material, p.layup, p.f, {}});
        tasks.back().modes.push_back(p.mode);
    }
    sum.skipped = kept.size();

    std::vector<ManifestRecord> fresh;
    std::mutex mu;
    // The manifest is rewritten to the kept records, then appended to as
    // tuples finish, so an aborted run leaves a readable partial manifest.
    {
        std::vector<ManifestRecord> base;
        for (const auto& [k, r] : kept) base.push_back(r);
        write_manifest(base, manifest);
    }
    std::ofstream append(manifest, std::ios::binary | std::ios::app);
    if (!append) throw IoError("cannot write " + manifest.string());
    std::size_t done = 0;

    PolarConfig pcfg = cfg.polar;
    pcfg.jobs = 1;
    detail::parallel_for(static_cast<int>(tasks.size()), opt.jobs, [&](int ti) {
        const Task& t = tasks[static_cast<std::size_t>(ti)];
        const Material& mat = cfg.materials[t.material];
        std::vector<ManifestRecord> recs;
        for (auto md : t.modes) {
            ManifestRecord r;
            r.id = t.id;
            r.material = mat;
            r.layup = t.layup;
            r.f = t.f;
            r.mode = md;
            recs.push_back(r);
        }
        try {
            const auto layup = build_layup(t.layup, cfg.plies, cfg.thickness);
            const auto profiles = polar_profiles(mat, layup, t.f, t.modes, pcfg);
            for (std::size_t k = 0; k < recs.size(); ++k) {
                auto& r = recs[k];
                const std::string stem = t.id + "_" + std::string(to_string(r.mode));
                r.raster = "rasters/" + stem + ".pgm";
                r.profile = "profiles/" + stem + ".csv";
                const auto img = rasterize(profiles[k], cfg.scales.at(r.mode), cfg.raster_size);
                r.symmetry_score = symmetry_score(img).value;
                r.interpolated = profiles[k].interpolated_count();
                write_pgm(img, dir / r.raster);
                write_profile_csv(profiles[k], dir / r.profile);
            }
        } catch (const IoError&) {
            throw;
        } catch (const Error& e) {
            for (auto& r : recs) {
                r.failed = true;
                r.error = e.what();
                r.raster.clear();
                r.profile.clear();
                r.symmetry_score = 0.0;
                r.interpolated = 0;
            }
        }
        std::lock_guard lock(mu);
        for (const auto& r : recs) append << manifest_line(r) << '\n';
        append.flush();
        if (!append) throw IoError("write failed: " + manifest.string());
        fresh.insert(fresh.end(), recs.begin(), recs.end());
        ++done;
        if (opt.log) {
            std::ostringstream os;
            os << "[" << done << "/" << tasks.size() << "] " << t.id << " " << mat.name << " "
               << to_string(t.layup) << " " << t.f << " Hz" << (recs.front().failed ? " FAILED: " + recs.front().error : "");
            opt.log(os.str());
        }
    });
    append.close();

    std::vector<ManifestRecord> all;
    for (auto& [k, r] : kept) all.push_back(r);
    for (auto& r : fresh) {
        all.push_back(r);
        ++sum.generated;
        if (r.failed) ++sum.failed;
    }
    sort_records(all);
    write_manifest(all, manifest);
    sum.records = std::move(all);
    return sum;
}

} // namespace gwgen
