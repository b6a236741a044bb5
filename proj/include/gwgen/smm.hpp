#pragma once

// Partial-wave solution of the Christoffel equation in a monoclinic layer and
// the stiffness-matrix-method (SMM) layer/laminate assembly.
//
// Field convention: u = U exp(i xi (x1 + alpha x3 - cp t)), x3 measured from
// the top face of a layer downwards. Stresses are carried without the common
// i*xi factor; every layer shares xi, so the factor cancels in the assembly
// and in the zero set of the global determinant.
//
// Stiffness matrices map [u_top; u_bottom] to the outward face tractions, with
// the normal components (u3, t3) carried multiplied by i. In that frame a
// lossless layer gives a complex-symmetric K.

#include <gwgen/error.hpp>
#include <gwgen/material.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

namespace gwgen {

using cdouble = std::complex<double>;
using Vector3c = Eigen::Matrix<cdouble, 3, 1>;
using Matrix3c = Eigen::Matrix<cdouble, 3, 3>;
using Matrix6c = Eigen::Matrix<cdouble, 6, 6>;

struct WaveState {
    double f = 0.0;          // Hz
    double omega = 0.0;      // rad/s
    double cp = 0.0;         // m/s
    double xi = 0.0;         // rad/m
    double prop_angle = 0.0; // rad

    static WaveState make(double f, double cp, double prop_angle = 0.0) {
        if (!(f > 0.0) || !(cp > 0.0)) throw InvalidInput("wave state needs f > 0 and cp > 0");
        const double omega = 2.0 * std::numbers::pi * f;
        return {f, omega, cp, omega / cp, prop_angle};
    }
};

/// Coefficients of det(Gamma) as a cubic in s = alpha^2, ascending order.
using CubicInAlphaSquared = std::array<double, 4>;

/// The Christoffel matrix for the wave-vector direction (1, 0, alpha).
inline Matrix3c christoffel_matrix(const RotatedStiffness& rc, double rho, double cp, cdouble alpha) {
    const auto& c = rc.c;
    const double rv2 = rho * cp * cp;
    const cdouble a2 = alpha * alpha;
    Matrix3c g;
    g(0, 0) = c(0, 0) - rv2 + c(4, 4) * a2;
    g(0, 1) = c(0, 5) + c(3, 4) * a2;
    g(0, 2) = (c(0, 2) + c(4, 4)) * alpha;
    g(1, 1) = c(5, 5) - rv2 + c(3, 3) * a2;
    g(1, 2) = (c(2, 5) + c(3, 4)) * alpha;
    g(2, 2) = c(4, 4) - rv2 + c(2, 2) * a2;
    g(1, 0) = g(0, 1);
    g(2, 0) = g(0, 2);
    g(2, 1) = g(1, 2);
    return g;
}

inline CubicInAlphaSquared christoffel_polynomial(const RotatedStiffness& rc, double rho, double cp) {
    if (!(cp > 0.0)) throw InvalidInput("phase velocity must be positive");
    const auto& c = rc.c;
    const double rv2 = rho * cp * cp;
    // Diagonal and 1-2 entries are linear in s; the 1-3 and 2-3 entries are
    // b * alpha, so their products contribute b*b' * s.
    using Lin = std::array<double, 2>;
    const Lin g11{c(0, 0) - rv2, c(4, 4)};
    const Lin g12{c(0, 5), c(3, 4)};
    const Lin g22{c(5, 5) - rv2, c(3, 3)};
    const Lin g33{c(4, 4) - rv2, c(2, 2)};
    const double b13 = c(0, 2) + c(4, 4);
    const double b23 = c(2, 5) + c(3, 4);

    CubicInAlphaSquared p{};
    auto add = [&](std::span<const double> q, double scale, int shift) {
        for (std::size_t i = 0; i < q.size(); ++i) p[i + static_cast<std::size_t>(shift)] += scale * q[i];
    };
    auto mul = [](const Lin& a, const Lin& b) { return std::array<double, 3>{a[0] * b[0], a[0] * b[1] + a[1] * b[0], a[1] * b[1]}; };
    auto mul3 = [](const std::array<double, 3>& a, const Lin& b) {
        return std::array<double, 4>{a[0] * b[0], a[0] * b[1] + a[1] * b[0], a[1] * b[1] + a[2] * b[0], a[2] * b[1]};
    };

    add(mul3(mul(g11, g22), g33), 1.0, 0);
    add(g12, 2.0 * b13 * b23, 1);
    add(g11, -b23 * b23, 1);
    add(g22, -b13 * b13, 1);
    add(mul3(mul(g12, g12), g33), -1.0, 0);
    return p;
}

/// The same determinant as a degree-6 polynomial in alpha, ascending order.
/// Odd coefficients are identically zero.
inline std::array<double, 7> christoffel_alpha_polynomial(const RotatedStiffness& rc, double rho, double cp) {
    const auto cubic = christoffel_polynomial(rc, rho, cp);
    std::array<double, 7> out{};
    for (std::size_t i = 0; i < 4; ++i) out[2 * i] = cubic[i];
    return out;
}

/// Complex roots of a real cubic (ascending coefficients), polished by Newton.
inline std::array<cdouble, 3> cubic_roots(const CubicInAlphaSquared& p) {
    if (p[3] == 0.0) throw NumericError("degenerate Christoffel cubic: zero leading coefficient");
    const double a0 = p[0] / p[3], a1 = p[1] / p[3], a2 = p[2] / p[3];
    Eigen::Matrix3d comp;
    comp << 0.0, 0.0, -a0, 1.0, 0.0, -a1, 0.0, 1.0, -a2;
    Eigen::EigenSolver<Eigen::Matrix3d> es(comp, false);
    std::array<cdouble, 3> r;
    for (int i = 0; i < 3; ++i) r[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
    auto eval = [&](cdouble s, cdouble& d) {
        d = (3.0 * s + 2.0 * a2) * s + a1;
        return ((s + a2) * s + a1) * s + a0;
    };
    for (auto& s : r) {
        const bool real = s.imag() == 0.0;
        for (int it = 0; it < 3; ++it) {
            cdouble d;
            const cdouble v = eval(s, d);
            if (std::abs(d) < 1e-300) break;
            cdouble step = v / d;
            if (real) step = step.real();
            const cdouble next = s - step;
            cdouble dn;
            if (std::abs(eval(next, dn)) >= std::abs(v)) break;
            s = next;
        }
    }
    return r;
}

struct PartialWave {
    cdouble alpha;        // zeta3 / xi
    Vector3c polarization; // largest-magnitude component scaled to 1
    Vector3c stress;       // (s13, s23, s33) per unit amplitude, i*xi factor removed
};

struct PartialWaveSet {
    // Three (+alpha, -alpha) pairs: waves[2q] carries +alpha, waves[2q+1] -alpha.
    std::array<PartialWave, 6> waves;
    std::array<cdouble, 3> alpha_squared{};
    bool degenerate = false;
};

namespace detail {

inline Vector3c normalize_largest(Vector3c v) {
    Eigen::Index idx = 0;
    v.cwiseAbs().maxCoeff(&idx);
    const cdouble pivot = v(idx);
    if (std::abs(pivot) == 0.0) return v;
    return v / pivot;
}

// Null vector of a rank-2 complex symmetric 3x3: the best-conditioned cross
// product of two rows (bilinear, not Hermitian).
inline Vector3c null_vector_rank2(const Matrix3c& g) {
    Vector3c best = Vector3c::Zero();
    double best_norm = -1.0;
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
            const Vector3c a = g.row(i).transpose();
            const Vector3c b = g.row(j).transpose();
            Vector3c v;
            v << a(1) * b(2) - a(2) * b(1), a(2) * b(0) - a(0) * b(2), a(0) * b(1) - a(1) * b(0);
            const double n = v.norm();
            if (n > best_norm) {
                best_norm = n;
                best = v;
            }
        }
    return best;
}

// Basis for an (approximately) two-dimensional null space, split into a
// component without u1 (shear-horizontal-like) and one without u2 (in the
// sagittal plane).
inline std::array<Vector3c, 2> null_pair(const Matrix3c& g) {
    Eigen::JacobiSVD<Matrix3c> svd(g, Eigen::ComputeFullV);
    const Vector3c v1 = svd.matrixV().col(1);
    const Vector3c v2 = svd.matrixV().col(2);
    Vector3c sh = v1 * v2(0) - v2 * v1(0);
    Vector3c sag = v1 * v2(1) - v2 * v1(1);
    const double tiny = 1e-8;
    if (sh.norm() < tiny || sag.norm() < tiny || std::abs(sh.dot(sag)) > (1.0 - 1e-6) * sh.norm() * sag.norm()) {
        return {v1, v2};
    }
    return {sh, sag};
}

inline Vector3c stress_vector(const Matrix6& c, cdouble alpha, const Vector3c& u) {
    Vector3c s;
    const cdouble g13 = alpha * u(0) + u(2); // engineering gamma13 / (i xi)
    const cdouble g23 = alpha * u(1);        // engineering gamma23 / (i xi)
    s(0) = c(4, 4) * g13 + c(3, 4) * g23;
    s(1) = c(3, 4) * g13 + c(3, 3) * g23;
    s(2) = c(0, 2) * u(0) + c(2, 5) * u(1) + c(2, 2) * alpha * u(2);
    return s;
}

inline cdouble plus_branch(cdouble s) {
    cdouble a = std::sqrt(s);
    if (a.imag() < 0.0 || (a.imag() == 0.0 && a.real() < 0.0)) a = -a;
    return a;
}

} // namespace detail

/// Six partial waves at (c, rho, cp). Roots of the alpha^2 cubic are sorted by
/// imaginary part descending, then real part ascending; each root contributes
/// (+alpha, -alpha) with +alpha in the upper half plane (or positive real).
inline PartialWaveSet partial_waves(const RotatedStiffness& rc, double rho, double cp, double degenerate_tol = 1e-6) {
    const auto poly = christoffel_polynomial(rc, rho, cp);
    auto roots = cubic_roots(poly);

    PartialWaveSet out;
    double scale = 1.0;
    for (const auto& r : roots) scale = std::max(scale, std::abs(r));

    // Collapse a near-coincident pair onto its mean when the Christoffel
    // matrix there has a two-dimensional null space (the isotropic shear
    // double root). Rounding splits such roots by ~sqrt(eps), so proximity
    // alone is not a reliable test.
    std::size_t dup_a = 3, dup_b = 3;
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = i + 1; j < 3; ++j)
            if (const double d = std::abs(roots[i] - roots[j]); d < gap) {
                gap = d;
                dup_a = i;
                dup_b = j;
            }
    if (gap < 1e-3 * scale) {
        cdouble mean = 0.5 * (roots[dup_a] + roots[dup_b]);
        if (std::abs(roots[dup_a].imag() + roots[dup_b].imag()) <= 1e-12 * scale) mean = mean.real();
        // Near a branch point two roots also coalesce, but the null space
        // stays one-dimensional there and the pair must not be merged.
        const Matrix3c g = christoffel_matrix(rc, rho, cp, detail::plus_branch(mean));
        Eigen::JacobiSVD<Matrix3c> svd(g);
        const auto& sv = svd.singularValues();
        const double rank_tol = gap < degenerate_tol * scale ? 1e-4 : 1e-5;
        if (sv(0) > 0.0 && sv(1) < rank_tol * sv(0)) {
            roots[dup_a] = roots[dup_b] = mean;
            out.degenerate = true;
        }
    }

    std::sort(roots.begin(), roots.end(), [](cdouble a, cdouble b) {
        if (a.imag() != b.imag()) return a.imag() > b.imag();
        return a.real() < b.real();
    });
    out.alpha_squared = roots;

    std::array<bool, 3> done{};
    for (std::size_t q = 0; q < 3; ++q) {
        if (done[q]) continue;
        const cdouble ap = detail::plus_branch(roots[q]);
        std::size_t partner = q;
        if (out.degenerate) {
            for (std::size_t r = q + 1; r < 3; ++r)
                if (roots[r] == roots[q]) partner = r;
        }
        if (partner != q) {
            for (int sign = 0; sign < 2; ++sign) {
                const cdouble a = sign == 0 ? ap : -ap;
                const auto basis = detail::null_pair(christoffel_matrix(rc, rho, cp, a));
                for (int k = 0; k < 2; ++k) {
                    const std::size_t slot = (k == 0 ? q : partner);
                    auto& w = out.waves[2 * slot + static_cast<std::size_t>(sign)];
                    w.alpha = a;
                    w.polarization = detail::normalize_largest(basis[static_cast<std::size_t>(k)]);
                    w.stress = detail::stress_vector(rc.c, a, w.polarization);
                }
            }
            done[q] = done[partner] = true;
        } else {
            for (int sign = 0; sign < 2; ++sign) {
                const cdouble a = sign == 0 ? ap : -ap;
                auto& w = out.waves[2 * q + static_cast<std::size_t>(sign)];
                w.alpha = a;
                w.polarization = detail::normalize_largest(detail::null_vector_rank2(christoffel_matrix(rc, rho, cp, a)));
                w.stress = detail::stress_vector(rc.c, a, w.polarization);
            }
            done[q] = true;
        }
    }
    return out;
}

struct LayerStiffness {
    Matrix6c k = Matrix6c::Zero(); // [t_top; t_bottom] = k [u_top; u_bottom], outward tractions
    double thickness = 0.0;
    bool pole = false;             // displacement matrix (near) singular
    double condition = 1.0;        // estimated condition number of the displacement matrix
};

struct GlobalStiffness {
    Matrix6c k = Matrix6c::Zero();
    bool pole = false;
};

inline constexpr double kPoleCondition = 1e12;

/// Layer matrix from the six partial waves. "+" waves are phase-referenced at
/// the top face and "-" waves at the bottom face, so every exponential that
/// appears has modulus <= 1.
inline LayerStiffness layer_stiffness(const PartialWaveSet& pw, const WaveState& state, double thickness) {
    if (!(thickness > 0.0)) throw InvalidInput("layer thickness must be positive");
    Matrix6c disp, trac;
    for (std::size_t q = 0; q < 3; ++q) {
        const auto& wp = pw.waves[2 * q];
        const auto& wm = pw.waves[2 * q + 1];
        const cdouble h = std::exp(cdouble(0.0, 1.0) * state.xi * wp.alpha * thickness);
        const auto cp_ = static_cast<Eigen::Index>(q);
        const auto cm_ = static_cast<Eigen::Index>(q + 3);
        disp.block<3, 1>(0, cp_) = wp.polarization;
        disp.block<3, 1>(3, cp_) = wp.polarization * h;
        disp.block<3, 1>(0, cm_) = wm.polarization * h;
        disp.block<3, 1>(3, cm_) = wm.polarization;
        trac.block<3, 1>(0, cp_) = wp.stress;
        trac.block<3, 1>(3, cp_) = wp.stress * h;
        trac.block<3, 1>(0, cm_) = wm.stress * h;
        trac.block<3, 1>(3, cm_) = wm.stress;
    }
    LayerStiffness out;
    out.thickness = thickness;
    const Eigen::PartialPivLU<Matrix6c> lu(disp);
    const double rc = lu.rcond();
    out.condition = rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
    // Raw map sends displacements to sigma_3j at each face. Flip the top face
    // to outward tractions and rotate the normal component by i.
    Matrix6c raw = trac * lu.inverse();
    const cdouble i(0.0, 1.0);
    raw.topRows<3>() *= -1.0;
    for (Eigen::Index r : {2, 5}) {
        raw.row(r) *= i;
        raw.col(r) /= i;
    }
    out.k = raw;
    out.pole = !(out.condition < kPoleCondition) || !out.k.allFinite();
    return out;
}

/// Recursive two-stack combination: `a` on top of `b`. The outward tractions
/// of the two sides balance at the interface, whose displacement is eliminated.
inline GlobalStiffness combine(const GlobalStiffness& a, const GlobalStiffness& b) {
    const Matrix3c a11 = a.k.topLeftCorner<3, 3>(), a12 = a.k.topRightCorner<3, 3>();
    const Matrix3c a21 = a.k.bottomLeftCorner<3, 3>(), a22 = a.k.bottomRightCorner<3, 3>();
    const Matrix3c b11 = b.k.topLeftCorner<3, 3>(), b12 = b.k.topRightCorner<3, 3>();
    const Matrix3c b21 = b.k.bottomLeftCorner<3, 3>(), b22 = b.k.bottomRightCorner<3, 3>();
    const Eigen::PartialPivLU<Matrix3c> lu(a22 + b11);
    GlobalStiffness out;
    out.pole = a.pole || b.pole || !(lu.rcond() > 1.0 / kPoleCondition);
    const Matrix3c m_a21 = lu.solve(a21);
    const Matrix3c m_b12 = lu.solve(b12);
    out.k.topLeftCorner<3, 3>() = a11 - a12 * m_a21;
    out.k.topRightCorner<3, 3>() = -a12 * m_b12;
    out.k.bottomLeftCorner<3, 3>() = -b21 * m_a21;
    out.k.bottomRightCorner<3, 3>() = b22 - b21 * m_b12;
    if (!out.k.allFinite()) out.pole = true;
    return out;
}

inline GlobalStiffness as_global(const LayerStiffness& l) { return {l.k, l.pole}; }

/// Left fold of `combine` over the layers, top to bottom.
inline GlobalStiffness assemble_global(std::span<const LayerStiffness> layers) {
    if (layers.empty()) throw InvalidInput("laminate needs at least one layer");
    GlobalStiffness acc = as_global(layers.front());
    for (std::size_t i = 1; i < layers.size(); ++i) acc = combine(acc, as_global(layers[i]));
    return acc;
}

/// Balanced combination tree over a ply sequence in which identical
/// sub-stacks are evaluated once. Built once per layup and reused for every
/// phase velocity of a sweep; by associativity the result equals the left fold.
class AssemblyPlan {
public:
    /// `layer_ids[i]` names the distinct layer matrix used by ply i.
    explicit AssemblyPlan(std::vector<int> layer_ids) {
        if (layer_ids.empty()) throw InvalidInput("laminate needs at least one layer");
        for (int id : layer_ids) {
            if (id < 0) throw InvalidInput("negative layer id");
            n_layers_ = std::max(n_layers_, static_cast<std::size_t>(id) + 1);
        }
        root_ = build(layer_ids);
    }

    std::size_t layer_count() const { return n_layers_; }
    std::size_t combine_count() const { return nodes_.size(); }

    GlobalStiffness evaluate(std::span<const LayerStiffness> distinct) const {
        if (distinct.size() < n_layers_) throw InvalidInput("assembly plan: too few distinct layers");
        std::vector<GlobalStiffness> vals(nodes_.size());
        auto get = [&](int ref) -> GlobalStiffness {
            return ref < 0 ? as_global(distinct[static_cast<std::size_t>(-ref - 1)]) : vals[static_cast<std::size_t>(ref)];
        };
        for (std::size_t i = 0; i < nodes_.size(); ++i) vals[i] = combine(get(nodes_[i].top), get(nodes_[i].bottom));
        return get(root_);
    }

private:
    struct Node {
        int top, bottom; // >= 0: node index, < 0: -(layer id) - 1
        std::vector<int> seq;
    };

    int build(const std::vector<int>& seq) {
        if (seq.size() == 1) return -seq.front() - 1;
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (nodes_[i].seq == seq) return static_cast<int>(i);
        const auto mid = seq.begin() + static_cast<std::ptrdiff_t>(seq.size() / 2);
        const int top = build(std::vector<int>(seq.begin(), mid));
        const int bottom = build(std::vector<int>(mid, seq.end()));
        nodes_.push_back({top, bottom, seq});
        return static_cast<int>(nodes_.size() - 1);
    }

    std::vector<Node> nodes_;
    std::size_t n_layers_ = 0;
    int root_ = 0;
};

/// Free-plate dispersion function: Re det(K / scale). In exact arithmetic the
/// determinant of a lossless laminate is real, so the real part carries every
/// sign change. `scale` is held fixed across a sweep so magnitudes compare.
inline double characteristic(const GlobalStiffness& g, double scale = 1.0) {
    const Matrix6c k = g.k / scale;
    return k.partialPivLu().determinant().real();
}

/// Displacement vector [u_top; u_bottom] (normal components times i) spanning
/// the (near) null space of K.
inline Eigen::Matrix<cdouble, 6, 1> null_displacement(const GlobalStiffness& g) {
    Eigen::JacobiSVD<Matrix6c> svd(g.k, Eigen::ComputeFullV);
    return svd.matrixV().col(5);
}

} // namespace gwgen
