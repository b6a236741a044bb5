#pragma once

// Polar group-velocity profiles over propagation angle and their binary
// raster form.

#include <gwgen/dispersion.hpp>
#include <gwgen/error.hpp>
#include <gwgen/material.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace gwgen {

inline constexpr int kPolarSamples = 361; // 0..360 deg inclusive

struct PolarProfile {
    ModeLabel mode = ModeLabel::A0;
    double f = 0.0;
    std::vector<double> angles;     // deg
    std::vector<double> cg;         // m/s
    std::vector<bool> interpolated; // filled from neighbours

    int interpolated_count() const { return static_cast<int>(std::count(interpolated.begin(), interpolated.end(), true)); }
    double max_cg() const { return cg.empty() ? 0.0 : *std::max_element(cg.begin(), cg.end()); }
    double min_cg() const { return cg.empty() ? 0.0 : *std::min_element(cg.begin(), cg.end()); }
};

struct PolarConfig {
    SweepConfig sweep;
    bool use_symmetry = true; // solve 0..90 and mirror where the layup allows it
    int max_gap = 3;          // longest run of unresolved angles that may be interpolated
    int jobs = 1;
};

/// True when flipping every ply angle (theta -> -theta, mod 180) leaves the
/// stack unchanged, so cg(phi) = cg(-phi).
inline bool mirror_invariant(const Layup& layup) {
    auto norm = [](double a) {
        double r = std::fmod(a, 180.0);
        if (r < 0) r += 180.0;
        return r;
    };
    for (double a : layup.ply_angles) {
        const double d = std::abs(norm(a) - norm(-a));
        if (std::min(d, 180.0 - d) > 1e-9) return false;
    }
    return true;
}

namespace detail {

template <class Fn>
void parallel_for(int n, int jobs, const Fn& fn) {
    jobs = std::clamp(jobs, 1, std::max(1, n));
    if (jobs == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) {
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

// cg of the requested labels at one angle; NaN where unresolved.
inline std::vector<double> cg_at_angle(const Material& m, const Layup& layup, double f, double deg,
                                       const std::vector<ModeLabel>& modes, const SweepConfig& cfg) {
    const PlateAtAngle plate(m, layup, deg2rad(deg));
    auto sol = find_modal_velocities(plate, f, cfg);
    sol.points = classify_modes(std::move(sol.points));
    std::vector<double> out(modes.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 0; k < modes.size(); ++k) {
        const ModePoint* p = find_label(sol, modes[k]);
        if (!p) continue;
        const auto g = group_velocity(plate, *p, cfg);
        if (!g.failed) out[k] = g.cg;
    }
    return out;
}

// Fills NaN entries of a closed 0..360 profile by linear interpolation
// around the circle. Runs longer than max_gap are rejected.
inline void fill_gaps(PolarProfile& p, int max_gap) {
    const int n = kPolarSamples - 1; // distinct angles, cg[360] mirrors cg[0]
    std::vector<int> bad;
    for (int i = 0; i < n; ++i)
        if (!std::isfinite(p.cg[i])) bad.push_back(i);
    if (bad.empty()) return;
    if (static_cast<int>(bad.size()) == n) {
        throw NumericError(std::string(to_string(p.mode)) + " unresolved at every angle");
    }
    int start = 0;
    while (!std::isfinite(p.cg[start]) || std::isfinite(p.cg[(start + 1) % n])) start = (start + 1) % n;
    // start is resolved and is followed by a gap
    for (int visited = 0; visited < n;) {
        int i = start, len = 0;
        while (!std::isfinite(p.cg[(i + 1) % n])) {
            i = (i + 1) % n;
            ++len;
        }
        if (len > 0) {
            if (len > max_gap) {
                std::ostringstream os;
                os << to_string(p.mode) << " at f = " << p.f << " Hz unresolved over " << len
                   << " consecutive angles starting at " << (start + 1) % n << " deg";
                throw NumericError(os.str());
            }
            const int end = (i + 1) % n;
            for (int k = 1; k <= len; ++k) {
                const int j = (start + k) % n;
                const double t = static_cast<double>(k) / (len + 1);
                p.cg[j] = (1 - t) * p.cg[start] + t * p.cg[end];
                p.interpolated[j] = true;
            }
            visited += len + 1;
            start = end;
        } else {
            start = (start + 1) % n;
            ++visited;
        }
    }
}

} // namespace detail

/// A0 and S0 (or any requested labels) profiles from one angle sweep.
inline std::vector<PolarProfile> polar_profiles(const Material& m, const Layup& layup, double f,
                                                const std::vector<ModeLabel>& modes, const PolarConfig& cfg = {}) {
    for (auto md : modes) {
        if (md != ModeLabel::A0 && md != ModeLabel::S0) throw InvalidInput("polar profiles are defined for A0 and S0 only");
    }
    if (!(f > 0.0)) throw InvalidInput("frequency must be positive");
    cfg.sweep.validate();

    // Without a mirror the profile still has period 180: k and -k share cg.
    const bool mirror = cfg.use_symmetry && mirror_invariant(layup);
    const int solved = !cfg.use_symmetry ? 360 : (mirror ? 91 : 180);

    std::vector<std::vector<double>> at(static_cast<std::size_t>(solved));
    detail::parallel_for(solved, cfg.jobs, [&](int i) {
        at[static_cast<std::size_t>(i)] = detail::cg_at_angle(m, layup, f, static_cast<double>(i), modes, cfg.sweep);
    });

    std::vector<PolarProfile> out;
    for (std::size_t k = 0; k < modes.size(); ++k) {
        PolarProfile p;
        p.mode = modes[k];
        p.f = f;
        p.angles.resize(kPolarSamples);
        p.cg.assign(kPolarSamples, std::numeric_limits<double>::quiet_NaN());
        p.interpolated.assign(kPolarSamples, false);
        for (int d = 0; d < 360; ++d) {
            int src = d;
            if (cfg.use_symmetry) {
                src = d % 180;
                if (mirror && src > 90) src = 180 - src;
            }
            p.cg[d] = at[static_cast<std::size_t>(src)][k];
        }
        for (int d = 0; d < kPolarSamples; ++d) p.angles[d] = d;
        detail::fill_gaps(p, cfg.max_gap);
        p.cg[360] = p.cg[0];
        p.interpolated[360] = p.interpolated[0];
        out.push_back(std::move(p));
    }
    return out;
}

inline PolarProfile polar_profile(const Material& m, const Layup& layup, double f, ModeLabel mode,
                                  const PolarConfig& cfg = {}) {
    return polar_profiles(m, layup, f, {mode}, cfg).front();
}

/// Largest relative difference between cg(phi) and cg(360 - phi).
inline double symmetry_defect(const PolarProfile& p) {
    double worst = 0.0;
    for (int d = 0; d <= 360; ++d) worst = std::max(worst, std::abs(p.cg[d] - p.cg[360 - d]));
    const double mx = p.max_cg();
    return mx > 0 ? worst / mx : 0.0;
}

/// Linear interpolation of cg at an arbitrary angle in degrees.
inline double profile_at(const PolarProfile& p, double deg) {
    deg = std::fmod(deg, 360.0);
    if (deg < 0) deg += 360.0;
    const int i = std::min(static_cast<int>(deg), 359);
    const double t = deg - i;
    return (1 - t) * p.cg[i] + t * p.cg[i + 1];
}

struct BinaryImage {
    int width = 0, height = 0;
    double scale = 0.0;           // m/s at half width
    std::vector<std::uint8_t> px; // row-major from top-left, values 0/1

    BinaryImage() = default;
    BinaryImage(int w, int h, double s = 0.0) : width(w), height(h), scale(s), px(static_cast<std::size_t>(w) * h, 0) {}

    std::uint8_t& at(int row, int col) { return px[static_cast<std::size_t>(row) * width + col]; }
    std::uint8_t at(int row, int col) const { return px[static_cast<std::size_t>(row) * width + col]; }
    std::size_t count() const { return static_cast<std::size_t>(std::count(px.begin(), px.end(), 1)); }
    bool operator==(const BinaryImage& o) const { return width == o.width && height == o.height && px == o.px; }
};

/// Filled polar region: a pixel is set when its centre lies within the
/// profile radius at its angle, with `scale` m/s mapped to size/2 pixels. The
/// four pixels meeting at the origin are always set.
inline BinaryImage rasterize(const PolarProfile& p, double scale, int size = 64) {
    if (size <= 0 || size % 2 != 0) throw InvalidInput("raster size must be a positive even number");
    if (static_cast<int>(p.cg.size()) != kPolarSamples) throw InvalidInput("profile must hold 361 samples");
    if (!(scale > 0.0)) throw InvalidInput("raster scale must be positive");
    if (p.max_cg() > scale) {
        std::ostringstream os;
        os << "raster scale " << scale << " m/s is below the profile maximum " << p.max_cg() << " m/s";
        throw InvalidInput(os.str());
    }
    BinaryImage img(size, size, scale);
    const double half = size / 2.0;
    const double px_per_mps = half / scale;
    for (int row = 0; row < size; ++row) {
        const double y = half - (row + 0.5);
        for (int col = 0; col < size; ++col) {
            const double x = (col + 0.5) - half;
            const double r = std::hypot(x, y);
            const double deg = std::atan2(y, x) * 180.0 / std::numbers::pi;
            const double radius = profile_at(p, deg) * px_per_mps;
            if (r <= radius * (1 + 1e-12)) img.at(row, col) = 1;
        }
    }
    const int c = size / 2;
    img.at(c - 1, c - 1) = img.at(c - 1, c) = img.at(c, c - 1) = img.at(c, c) = 1;
    return img;
}

struct SymmetryScore {
    double value = 0.0;
    bool empty = false;
};

/// Intersection over union of the image with its left-right and up-down
/// reflections; 1 means two-axis symmetric.
inline SymmetryScore symmetry_score(const BinaryImage& img) {
    std::size_t inter = 0, uni = 0;
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            const bool a = img.at(r, c), b = img.at(r, img.width - 1 - c), d = img.at(img.height - 1 - r, c);
            inter += a && b && d;
            uni += a || b || d;
        }
    }
    if (uni == 0) return {0.0, true};
    return {static_cast<double>(inter) / static_cast<double>(uni), false};
}

inline double default_scale(ModeLabel mode) {
    switch (mode) {
    case ModeLabel::A0: return 3000.0;
    case ModeLabel::S0: return 12000.0;
    default: throw InvalidInput("no raster scale for mode " + std::string(to_string(mode)));
    }
}

inline void write_pgm(const BinaryImage& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    std::vector<char> bytes(img.px.size());
    std::transform(img.px.begin(), img.px.end(), bytes.begin(), [](std::uint8_t v) { return v ? char(255) : char(0); });
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

/// Reads a binary PGM; any nonzero sample becomes 1.
inline BinaryImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (magic != "P5" || !in || w <= 0 || h <= 0 || maxval != 255) throw FormatError(path.string() + ": not an 8-bit P5 image");
    in.get();
    BinaryImage img(w, h);
    std::vector<char> bytes(img.px.size());
    in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size())) throw LengthError(path.string() + ": truncated pixel data");
    std::transform(bytes.begin(), bytes.end(), img.px.begin(), [](char v) { return v != 0 ? 1 : 0; });
    return img;
}

inline void write_profile_csv(const PolarProfile& p, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "angle_deg,cg_mps\n" << std::setprecision(10);
    for (std::size_t i = 0; i < p.cg.size(); ++i) out << p.angles[i] << ',' << p.cg[i] << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

inline PolarProfile read_profile_csv(const std::filesystem::path& path, ModeLabel mode = ModeLabel::A0, double f = 0.0) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "angle_deg,cg_mps") throw FormatError(path.string() + ": missing header");
    PolarProfile p;
    p.mode = mode;
    p.f = f;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        double a, c;
        char comma;
        if (!(ls >> a >> comma >> c) || comma != ',') {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": malformed row");
        }
        p.angles.push_back(a);
        p.cg.push_back(c);
    }
    p.interpolated.assign(p.cg.size(), false);
    return p;
}

} // namespace gwgen
