#pragma once

// Latent-space samplers, the z1..zL CSV interchange and decoding of sampled
// points into binary polar rasters.

#include <gwgen/dataset.hpp>
#include <gwgen/error.hpp>
#include <gwgen/nn.hpp>
#include <gwgen/polar.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iomanip>
#include <istream>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace gwgen {

using LatentPoint = std::vector<double>;

inline constexpr int kLatentDim = 5;

/// n i.i.d. points, uniform on [lo, hi]^dim.
inline std::vector<LatentPoint> sample_monte_carlo(std::size_t n, std::uint64_t seed, double lo = -2.0, double hi = 2.0,
                                                   int dim = kLatentDim) {
    if (!(lo < hi)) throw InvalidInput("sampler bounds need lower < upper");
    if (dim <= 0) throw InvalidInput("latent dimension must be positive");
    std::mt19937_64 g(detail::splitmix64(seed));
    std::vector<LatentPoint> out(n, LatentPoint(static_cast<std::size_t>(dim)));
    for (auto& z : out)
        for (auto& v : z) v = std::min(lo + (hi - lo) * detail::unit_uniform(g), hi);
    return out;
}

/// `steps` equally spaced values from lo to hi on coordinate `axis`
/// (1-based), every other coordinate 0. One step gives the midpoint.
inline std::vector<LatentPoint> sample_directional(int axis, int steps, double lo = -2.0, double hi = 2.0,
                                                   int dim = kLatentDim) {
    if (axis < 1 || axis > dim) {
        throw InvalidInput("axis " + std::to_string(axis) + " outside 1.." + std::to_string(dim));
    }
    if (steps < 1) throw InvalidInput("directional sampling needs at least one step");
    if (!(lo < hi)) throw InvalidInput("sampler bounds need lower < upper");
    std::vector<LatentPoint> out;
    for (int k = 0; k < steps; ++k) {
        LatentPoint z(static_cast<std::size_t>(dim), 0.0);
        z[static_cast<std::size_t>(axis - 1)] = steps == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * k / (steps - 1);
        out.push_back(std::move(z));
    }
    return out;
}

inline void write_latents_csv(const std::vector<LatentPoint>& pts, std::ostream& out, int dim = kLatentDim) {
    if (!pts.empty()) dim = static_cast<int>(pts.front().size());
    for (int i = 1; i <= dim; ++i) out << (i > 1 ? "," : "") << 'z' << i;
    out << '\n' << std::setprecision(17);
    for (const auto& z : pts) {
        if (static_cast<int>(z.size()) != dim) throw InvalidInput("latent points of mixed dimension");
        for (std::size_t i = 0; i < z.size(); ++i) out << (i ? "," : "") << z[i];
        out << '\n';
    }
}

/// Reads a z1..zL CSV; the header fixes the dimension.
inline std::vector<LatentPoint> read_latents_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError("latent CSV is empty (expected a z1..zL header)");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    int dim = 0;
    {
        std::istringstream hs(line);
        for (std::string col; std::getline(hs, col, ',');) {
            if (col != "z" + std::to_string(dim + 1)) throw FormatError("latent CSV header must be z1..zL, got '" + line + "'");
            ++dim;
        }
    }
    if (dim == 0) throw FormatError("latent CSV header names no coordinates");
    std::vector<LatentPoint> out;
    for (int lineno = 2; std::getline(in, line); ++lineno) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        LatentPoint z;
        for (std::string cell; std::getline(ls, cell, ',');) {
            try {
                std::size_t used = 0;
                z.push_back(std::stod(cell, &used));
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw FormatError("latent CSV line " + std::to_string(lineno) + ": bad number '" + cell + "'");
            }
        }
        if (static_cast<int>(z.size()) != dim) {
            throw FormatError("latent CSV line " + std::to_string(lineno) + ": expected " + std::to_string(dim) + " values");
        }
        out.push_back(std::move(z));
    }
    return out;
}

/// Channel `c` of a decoded pair, binarized: value >= threshold -> 1.
inline BinaryImage binarize(const nn::ImagePair& img, int c, double threshold = 0.5) {
    const int h = img.shape[1], w = img.shape[2];
    BinaryImage out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(y, x) = img.at(c, y, x) >= threshold ? 1 : 0;
    return out;
}

struct GeneratedRecord {
    std::string id;
    LatentPoint z;
    std::string raster_a0, raster_s0; // relative to the output directory
    double score_a0 = 0.0, score_s0 = 0.0;
    bool failed = false;
    std::string error;
};

inline nlohmann::json to_json(const GeneratedRecord& r) {
    nlohmann::json j{{"id", r.id},
                     {"z", r.z},
                     {"rasters", {{"A0", r.raster_a0}, {"S0", r.raster_s0}}},
                     {"symmetry_score", {{"A0", r.score_a0}, {"S0", r.score_s0}}},
                     {"status", r.failed ? "failed" : "ok"}};
    if (r.failed) j["error"] = r.error;
    return j;
}

struct GenerateConfig {
    double threshold = 0.5;
    int jobs = 1;
    bool overwrite = false;
};

/// Decodes each point, writes rasters/g<index>_{A0,S0}.pgm and a
/// manifest.jsonl with the latent coordinates and symmetry scores.
inline std::vector<GeneratedRecord> generate(const std::vector<LatentPoint>& points, const nn::NetworkWeights& w,
                                             const std::filesystem::path& out_dir, const GenerateConfig& cfg = {}) {
    namespace fs = std::filesystem;
    const fs::path manifest = out_dir / "manifest.jsonl";
    if (fs::exists(manifest) && !cfg.overwrite) {
        throw IoError(manifest.string() + " exists; pass --overwrite to replace it");
    }
    try {
        fs::create_directories(out_dir);
        if (!points.empty()) fs::create_directories(out_dir / "rasters");
    } catch (const fs::filesystem_error& e) {
        throw IoError(e.what());
    }
    const int width = static_cast<int>(std::to_string(std::max<std::size_t>(points.size(), 1) - 1).size());
    const int digits = std::max(4, width);
    std::vector<GeneratedRecord> recs(points.size());
    detail::parallel_for(static_cast<int>(points.size()), cfg.jobs, [&](int i) {
        auto& r = recs[static_cast<std::size_t>(i)];
        std::ostringstream id;
        id << 'g' << std::setw(digits) << std::setfill('0') << i;
        r.id = id.str();
        r.z = points[static_cast<std::size_t>(i)];
        try {
            const auto img = nn::decode(r.z, w);
            const auto a0 = binarize(img, 0, cfg.threshold), s0 = binarize(img, 1, cfg.threshold);
            r.score_a0 = symmetry_score(a0).value;
            r.score_s0 = symmetry_score(s0).value;
            r.raster_a0 = "rasters/" + r.id + "_A0.pgm";
            r.raster_s0 = "rasters/" + r.id + "_S0.pgm";
            write_pgm(a0, out_dir / r.raster_a0);
            write_pgm(s0, out_dir / r.raster_s0);
        } catch (const NumericError& e) {
            r.failed = true;
            r.error = e.what();
        } catch (const InvalidInput& e) {
            r.failed = true;
            r.error = e.what();
        }
    });
    std::ofstream out(manifest, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + manifest.string());
    for (const auto& r : recs) out << to_json(r).dump() << '\n';
    if (!out) throw IoError("write failed: " + manifest.string());
    return recs;
}

} // namespace gwgen
