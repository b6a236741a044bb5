#pragma once

// Modal solutions of a free laminate at one (frequency, propagation angle):
// phase-velocity roots of the SMM characteristic function, A0/S0/SH0 labels
// from mode shapes, and group velocity as a central difference of omega(k).

#include <gwgen/error.hpp>
#include <gwgen/material.hpp>
#include <gwgen/smm.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gwgen {

struct SweepConfig {
    double cp_min = 50.0;              // m/s
    double cp_max = 12000.0;           // m/s
    double coarse_step = 10.0;         // m/s
    double bisection_tol = 0.01;       // m/s
    double group_velocity_df = 0.005;  // relative frequency step

    void validate() const {
        if (!(cp_min > 0.0) || !(cp_max > cp_min)) throw InvalidInput("sweep needs 0 < cp_min < cp_max");
        if (!(coarse_step > 0.0)) throw InvalidInput("sweep coarse_step must be positive");
        if (!(bisection_tol > 0.0)) throw InvalidInput("sweep bisection_tol must be positive");
        if (!(group_velocity_df > 0.0) || !(group_velocity_df < 0.5)) {
            throw InvalidInput("group_velocity_df must lie in (0, 0.5)");
        }
    }
};

enum class ModeLabel { A0, S0, SH0, unknown };

inline std::string_view to_string(ModeLabel m) {
    switch (m) {
    case ModeLabel::A0: return "A0";
    case ModeLabel::S0: return "S0";
    case ModeLabel::SH0: return "SH0";
    case ModeLabel::unknown: return "unknown";
    }
    return "unknown";
}

inline ModeLabel parse_mode(std::string_view s) {
    if (s == "A0" || s == "a0") return ModeLabel::A0;
    if (s == "S0" || s == "s0") return ModeLabel::S0;
    if (s == "SH0" || s == "sh0") return ModeLabel::SH0;
    throw InvalidInput("unknown mode '" + std::string(s) + "'");
}

/// Polarization summary of a solved mode.
struct ModeShape {
    std::array<double, 3> top{};  // |u1|, |u2|, |u3| on the top face, unit norm
    double u3_parity = 0.0;       // +1: u3 equal on both faces, -1: opposite
    double antisymmetric = 0.0;   // share of the field matching the A-family pattern, in [0, 1]
};

struct ModePoint {
    double f = 0.0;
    double prop_angle = 0.0; // rad
    double cp = 0.0;
    double cg = std::numeric_limits<double>::quiet_NaN();
    ModeLabel label = ModeLabel::unknown;
    ModeShape shape;
    double residual = 0.0;   // |characteristic| at cp relative to the coarse-grid maximum
    bool ambiguous = false;  // label came from the cp-order fallback
    bool cg_one_sided = false;
    bool cg_clamped = false;
};

struct ModalSolution {
    std::vector<ModePoint> points; // ascending cp
    std::vector<std::string> warnings;
    bool partial = false;          // fewer than the three fundamental roots
    int rejected_poles = 0;
};

/// A laminate evaluated at one propagation angle. Plies are rotated once; only
/// the distinct orientations are solved per phase velocity.
class PlateAtAngle {
public:
    PlateAtAngle(const Material& m, const Layup& layup, double prop_angle)
        : rho_(m.rho), thickness_(layup.ply_thickness), angle_(prop_angle), plan_(distinct_ids(layup)) {
        if (layup.ply_angles.empty()) throw InvalidInput("layup has no plies");
        if (!(layup.ply_thickness > 0.0)) throw InvalidInput("ply thickness must be positive");
        const auto c = stiffness_from_engineering(m);
        scale_ = c.c(0, 0);
        bulk_bound_ = max_bulk_velocity(c, rho_);
        for (double a : distinct_angles_) plies_.push_back(rotate_stiffness(c, deg2rad(a) - prop_angle));
    }

    double prop_angle() const { return angle_; }
    double rho() const { return rho_; }
    double total_thickness() const { return thickness_ * static_cast<double>(n_plies_); }

    /// Fastest quasi-longitudinal bulk speed of the ply material over all
    /// in-plane directions; every ply shares the material, so this bounds the laminate.
    double bulk_velocity_bound() const { return bulk_bound_; }

    static double max_bulk_velocity(const StiffnessMatrix& c, double rho) {
        double best = 0.0;
        for (int deg = 0; deg < 180; ++deg) {
            const auto rc = rotate_stiffness(c, deg2rad(deg));
            const Matrix3c g = christoffel_matrix(rc, rho, 0.0, 0.0);
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(g.real());
            best = std::max(best, std::sqrt(es.eigenvalues().maxCoeff() / rho));
        }
        return best;
    }

    GlobalStiffness global(double f, double cp) const {
        const auto st = WaveState::make(f, cp, angle_);
        std::vector<LayerStiffness> layers;
        layers.reserve(plies_.size());
        for (const auto& rc : plies_) layers.push_back(layer_stiffness(partial_waves(rc, rho_, cp), st, thickness_));
        return plan_.evaluate(layers);
    }

    /// NaN when the evaluation hits a pole or a non-finite intermediate.
    double characteristic(double f, double cp) const {
        const auto g = global(f, cp);
        if (g.pole) return std::numeric_limits<double>::quiet_NaN();
        return gwgen::characteristic(g, scale_);
    }

    ModeShape shape(double f, double cp) const {
        const auto u = null_displacement(global(f, cp));
        ModeShape s;
        double top = 0.0;
        for (int i = 0; i < 3; ++i) top += std::norm(u(i));
        top = std::sqrt(top);
        for (int i = 0; i < 3; ++i) s.top[static_cast<std::size_t>(i)] = top > 0 ? std::abs(u(i)) / top : 0.0;
        const double mag3 = std::abs(u(2)) * std::abs(u(5));
        s.u3_parity = mag3 > 1e-12 ? (u(2) * std::conj(u(5))).real() / mag3 : 0.0;
        const double mis_s = std::norm(u(0) - u(3)) + std::norm(u(1) - u(4)) + std::norm(u(2) + u(5));
        const double mis_a = std::norm(u(0) + u(3)) + std::norm(u(1) + u(4)) + std::norm(u(2) - u(5));
        s.antisymmetric = (mis_s + mis_a) > 0 ? mis_s / (mis_s + mis_a) : 0.5;
        return s;
    }

private:
    std::vector<int> distinct_ids(const Layup& layup) {
        std::vector<int> ids;
        for (double a : layup.ply_angles) {
            auto it = std::find(distinct_angles_.begin(), distinct_angles_.end(), a);
            if (it == distinct_angles_.end()) {
                distinct_angles_.push_back(a);
                it = distinct_angles_.end() - 1;
            }
            ids.push_back(static_cast<int>(it - distinct_angles_.begin()));
        }
        n_plies_ = layup.ply_angles.size();
        return ids;
    }

    double rho_;
    double thickness_;
    double angle_;
    std::size_t n_plies_ = 0;
    std::vector<double> distinct_angles_;
    AssemblyPlan plan_;
    std::vector<RotatedStiffness> plies_;
    double scale_ = 1.0;
    double bulk_bound_ = 0.0;
};

namespace detail {

struct Refined {
    double cp;
    double value;
};

// Bisection down to `tol`, then Illinois regula falsi inside the bracket
// until the root is resolved to ~1e-10 relative. Returns the sample with the
// smallest |f|. Isolated non-finite samples (a partial wave with alpha
// exactly 0) are stepped around.
template <class Fn>
Refined refine_root(const Fn& fn, double a, double fa, double b, double fb, double tol) {
    auto sample = [&](double x, double lo, double hi, double& fx) {
        fx = fn(x);
        for (int k = 1; k <= 3 && !std::isfinite(fx); ++k) {
            x = x + (hi - lo) * 1e-3 * k;
            fx = fn(x);
        }
        return x;
    };
    Refined best{a, fa};
    auto keep = [&](double x, double fx) {
        if (std::isfinite(fx) && (!std::isfinite(best.value) || std::abs(fx) < std::abs(best.value))) best = {x, fx};
    };
    keep(b, fb);
    while (b - a > tol) {
        double fm;
        const double m = sample(0.5 * (a + b), a, b, fm);
        if (!std::isfinite(fm)) break;
        keep(m, fm);
        if (fm == 0.0) return best;
        if ((fm < 0) == (fa < 0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
    }
    // Illinois: the retained endpoint's weight is halved on repeated sides.
    double wa = fa, wb = fb;
    int side = 0;
    for (int it = 0; it < 40 && b - a > 1e-10 * b; ++it) {
        double x = (a * wb - b * wa) / (wb - wa);
        if (!(x > a && x < b)) x = 0.5 * (a + b);
        double fx = fn(x);
        if (!std::isfinite(fx)) x = sample(0.5 * (a + b), a, b, fx);
        if (!std::isfinite(fx)) break;
        keep(x, fx);
        if (fx == 0.0) break;
        if ((fx < 0) == (fa < 0)) {
            a = x;
            fa = wa = fx;
            if (side == -1) wb *= 0.5;
            side = -1;
        } else {
            b = x;
            fb = wb = fx;
            if (side == 1) wa *= 0.5;
            side = 1;
        }
    }
    return best;
}

// SH0 and S0 share the symmetric family and hybridize off-axis, so tracking
// only re-checks the family.
inline bool same_family(ModeLabel a, ModeLabel b) { return (a == ModeLabel::A0) == (b == ModeLabel::A0); }

inline ModeLabel label_from_shape(const ModeShape& s, bool& determinate) {
    const double parity_margin = std::abs(s.antisymmetric - 0.5);
    const double dominant = std::max({s.top[0], s.top[1], s.top[2]});
    determinate = parity_margin > 0.1 && dominant * dominant > 0.5;
    if (s.antisymmetric > 0.5) return ModeLabel::A0;
    return s.top[1] > s.top[0] ? ModeLabel::SH0 : ModeLabel::S0;
}

} // namespace detail

/// Coarse scan of the characteristic function, bracket refinement and pole
/// rejection. Returns the lowest three accepted roots with mode shapes;
/// labels are not assigned here.
inline ModalSolution find_modal_velocities(const PlateAtAngle& plate, double f, const SweepConfig& cfg) {
    cfg.validate();
    if (!(f > 0.0) || !std::isfinite(f)) throw InvalidInput("frequency must be positive");
    auto fn = [&](double cp) { return plate.characteristic(f, cp); };

    ModalSolution out;
    const int n = static_cast<int>(std::floor((cfg.cp_max - cfg.cp_min) / cfg.coarse_step + 1e-9)) + 1;
    double prev_cp = cfg.cp_min;
    double prev = fn(prev_cp);
    double coarse_max = std::isfinite(prev) ? std::abs(prev) : 0.0;
    std::vector<std::array<double, 4>> brackets; // a, fa, b, fb
    for (int i = 1; i < n && brackets.size() < 8; ++i) {
        const double cp = cfg.cp_min + i * cfg.coarse_step;
        const double v = fn(cp);
        if (std::isfinite(v)) coarse_max = std::max(coarse_max, std::abs(v));
        if (std::isfinite(prev) && std::isfinite(v) && (prev < 0) != (v < 0)) {
            // Refine eagerly so the scan can stop after three accepted roots.
            const auto r = detail::refine_root(fn, prev_cp, prev, cp, v, cfg.bisection_tol);
            const double ends = std::max(std::abs(prev), std::abs(v));
            if (std::isfinite(r.value) && std::abs(r.value) < 1e-4 * ends) {
                ModePoint p;
                p.f = f;
                p.prop_angle = plate.prop_angle();
                p.cp = r.cp;
                p.residual = std::abs(r.value);
                out.points.push_back(p);
                if (out.points.size() == 3) break;
            } else {
                ++out.rejected_poles;
            }
        }
        prev = v;
        prev_cp = cp;
    }
    for (auto& p : out.points) {
        p.residual = coarse_max > 0 ? p.residual / coarse_max : 0.0;
        p.shape = plate.shape(f, p.cp);
    }
    if (out.points.size() < 3) {
        out.partial = true;
        out.warnings.push_back("found " + std::to_string(out.points.size()) +
                               " of 3 fundamental roots in [" + std::to_string(cfg.cp_min) + ", " +
                               std::to_string(cfg.cp_max) + "] m/s");
    }
    return out;
}

inline ModalSolution find_modal_velocities(const Material& m, const Layup& layup, double f, double prop_angle,
                                           const SweepConfig& cfg = {}) {
    return find_modal_velocities(PlateAtAngle(m, layup, prop_angle), f, cfg);
}

/// Labels by mode shape. The antisymmetric family (u3 equal on both faces)
/// is A0. Within the symmetric family the faster root is S0 and the slower
/// SH0; a lone symmetric root is SH0 when its transverse in-plane motion
/// dominates. Indeterminate shapes and label collisions fall back to cp order
/// (A0 slowest, S0 fastest) and are flagged.
inline std::vector<ModePoint> classify_modes(std::vector<ModePoint> points) {
    if (points.size() > 3) throw InvalidInput("classify_modes expects at most three fundamental points");
    std::sort(points.begin(), points.end(), [](const ModePoint& a, const ModePoint& b) { return a.cp < b.cp; });

    auto by_order = [&](std::size_t i) {
        if (points.size() == 3) return std::array{ModeLabel::A0, ModeLabel::SH0, ModeLabel::S0}[i];
        if (points.size() == 2) return std::array{ModeLabel::A0, ModeLabel::S0}[i];
        return ModeLabel::A0;
    };

    std::vector<std::size_t> symmetric;
    for (std::size_t i = 0; i < points.size(); ++i) {
        bool determinate = false;
        points[i].label = detail::label_from_shape(points[i].shape, determinate);
        points[i].ambiguous = !determinate;
        if (points[i].label != ModeLabel::A0) symmetric.push_back(i);
    }
    if (symmetric.size() == 2) {
        auto& slow = points[symmetric[0]];
        auto& fast = points[symmetric[1]];
        if (slow.label != ModeLabel::SH0 || fast.label != ModeLabel::S0) {
            slow.ambiguous = fast.ambiguous = true;
        }
        slow.label = ModeLabel::SH0;
        fast.label = ModeLabel::S0;
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].ambiguous && (symmetric.size() != 2 || points[i].label == ModeLabel::A0)) points[i].label = by_order(i);
    }
    bool collision = false;
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j)
            if (points[i].label == points[j].label) collision = true;
    if (collision) {
        for (std::size_t i = 0; i < points.size(); ++i) {
            points[i].label = by_order(i);
            points[i].ambiguous = true;
        }
    }
    return points;
}

struct GroupVelocityResult {
    double cg = std::numeric_limits<double>::quiet_NaN();
    bool one_sided = false;
    bool clamped = false;
    bool failed = false;
};

namespace detail {

// Root of the same mode at frequency f nearest to cp0, or nullopt if the
// nearest root is a pole or carries a different label. Samples sit at
// cp0 +/- (j - 1/2) h so a root lying exactly at cp0 is still bracketed.
inline std::optional<double> track_mode(const PlateAtAngle& plate, double f, double cp0, ModeLabel label,
                                        const SweepConfig& cfg) {
    auto fn = [&](double cp) { return plate.characteristic(f, cp); };
    const double h = std::max(2e-3 * cp0, 10.0 * cfg.bisection_tol);
    const int max_steps = 100;

    auto accept = [&](double a, double fa, double b, double fb) -> std::optional<double> {
        const auto r = refine_root(fn, a, fa, b, fb, cfg.bisection_tol);
        if (!(std::abs(r.value) < 1e-4 * std::max(std::abs(fa), std::abs(fb)))) return std::nullopt;
        bool determinate = false;
        const auto found = label_from_shape(plate.shape(f, r.cp), determinate);
        if (label != ModeLabel::unknown && determinate && !same_family(found, label)) return std::nullopt;
        return r.cp;
    };

    double lo = cp0 - 0.5 * h, hi = cp0 + 0.5 * h;
    double flo = fn(lo), fhi = fn(hi);
    if (std::isfinite(flo) && std::isfinite(fhi) && (flo < 0) != (fhi < 0)) return accept(lo, flo, hi, fhi);
    for (int j = 1; j <= max_steps; ++j) {
        const double nhi = hi + h;
        const double fnhi = fn(nhi);
        if (std::isfinite(fhi) && std::isfinite(fnhi) && (fhi < 0) != (fnhi < 0)) return accept(hi, fhi, nhi, fnhi);
        hi = nhi;
        fhi = fnhi;
        const double nlo = lo - h;
        if (nlo <= 0.0) continue;
        const double fnlo = fn(nlo);
        if (std::isfinite(flo) && std::isfinite(fnlo) && (flo < 0) != (fnlo < 0)) return accept(nlo, fnlo, lo, flo);
        lo = nlo;
        flo = fnlo;
    }
    return std::nullopt;
}

} // namespace detail

/// cg = d(omega)/dk along the fixed wave-vector direction, by central
/// difference over f(1 +/- df) with the mode re-tracked at each frequency.
inline GroupVelocityResult group_velocity(const PlateAtAngle& plate, const ModePoint& point, const SweepConfig& cfg) {
    cfg.validate();
    GroupVelocityResult res;
    const double df = cfg.group_velocity_df;
    const double w = 2.0 * std::numbers::pi * point.f;
    const auto up = detail::track_mode(plate, point.f * (1.0 + df), point.cp, point.label, cfg);
    const auto dn = detail::track_mode(plate, point.f * (1.0 - df), point.cp, point.label, cfg);
    const double wu = w * (1.0 + df), wd = w * (1.0 - df);
    if (up && dn) {
        res.cg = (wu - wd) / (wu / *up - wd / *dn);
    } else if (up) {
        res.cg = (wu - w) / (wu / *up - w / point.cp);
        res.one_sided = true;
    } else if (dn) {
        res.cg = (w - wd) / (w / point.cp - wd / *dn);
        res.one_sided = true;
    } else {
        res.failed = true;
        return res;
    }
    if (!(res.cg > 0.0) || !std::isfinite(res.cg)) {
        res.failed = true;
        return res;
    }
    const double bound = 1.01 * plate.bulk_velocity_bound();
    if (res.cg > bound) {
        res.cg = bound;
        res.clamped = true;
    }
    return res;
}

inline GroupVelocityResult group_velocity(const Material& m, const Layup& layup, const ModePoint& point,
                                          const SweepConfig& cfg = {}) {
    return group_velocity(PlateAtAngle(m, layup, point.prop_angle), point, cfg);
}

/// Full solve at one (f, angle): roots, labels and group velocities.
inline ModalSolution solve_modes(const PlateAtAngle& plate, double f, const SweepConfig& cfg = {}) {
    auto sol = find_modal_velocities(plate, f, cfg);
    sol.points = classify_modes(std::move(sol.points));
    for (auto& p : sol.points) {
        const auto g = group_velocity(plate, p, cfg);
        p.cg = g.cg;
        p.cg_one_sided = g.one_sided;
        p.cg_clamped = g.clamped;
        if (g.failed) {
            sol.warnings.push_back(std::string(to_string(p.label)) + ": group velocity unresolved");
        }
    }
    return sol;
}

inline const ModePoint* find_label(const ModalSolution& sol, ModeLabel label) {
    for (const auto& p : sol.points)
        if (p.label == label) return &p;
    return nullptr;
}

} // namespace gwgen
