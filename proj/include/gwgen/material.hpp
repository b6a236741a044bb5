#pragma once

#include <gwgen/error.hpp>

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace gwgen {

using Matrix6 = Eigen::Matrix<double, 6, 6>;

/// Transversely isotropic ply, fibre along x1. SI units throughout.
struct Material {
    std::string name;
    double rho = 0.0;  // kg/m^3
    double e1 = 0.0;   // Pa
    double e2 = 0.0;   // Pa, also E3
    double g12 = 0.0;  // Pa, also G13
    double nu12 = 0.0; // also nu13
    double nu23 = 0.0;

    double g23() const { return e2 / (2.0 * (1.0 + nu23)); }

    bool operator==(const Material&) const = default;
};

/// 6x6 stiffness in Voigt order (11, 22, 33, 23, 13, 12), engineering shear strains.
struct StiffnessMatrix {
    Matrix6 c = Matrix6::Zero();
};

/// Stiffness expressed in a frame rotated about the plate normal (x3).
struct RotatedStiffness {
    Matrix6 c = Matrix6::Zero();
    double angle = 0.0; // radians
};

inline double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

namespace detail {

inline void check_basic(const Material& m) {
    auto positive = [&](double v, const char* field) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            std::ostringstream os;
            os << "material '" << m.name << "': " << field << " must be positive and finite, got " << v;
            throw InvalidInput(os.str());
        }
    };
    positive(m.rho, "rho");
    positive(m.e1, "e1");
    positive(m.e2, "e2");
    positive(m.g12, "g12");
    if (!std::isfinite(m.nu12) || !std::isfinite(m.nu23)) {
        throw InvalidInput("material '" + m.name + "': Poisson ratios must be finite");
    }
    if (!(m.nu23 > -1.0)) {
        throw InvalidInput("material '" + m.name + "': nu23 must exceed -1 so that G23 > 0");
    }
}

// Voigt index of the symmetric tensor index pair (i, j).
constexpr int voigt(int i, int j) {
    constexpr int map[3][3] = {{0, 5, 4}, {5, 1, 3}, {4, 3, 2}};
    return map[i][j];
}

} // namespace detail

/// Compliance assembled from engineering constants with the transverse-isotropy
/// closure (E3 = E2, G13 = G12, nu13 = nu12, G23 = E2 / 2(1 + nu23)).
inline Matrix6 compliance_from_engineering(const Material& m) {
    detail::check_basic(m);
    Matrix6 s = Matrix6::Zero();
    s(0, 0) = 1.0 / m.e1;
    s(1, 1) = 1.0 / m.e2;
    s(2, 2) = 1.0 / m.e2;
    s(0, 1) = s(1, 0) = -m.nu12 / m.e1;
    s(0, 2) = s(2, 0) = -m.nu12 / m.e1;
    s(1, 2) = s(2, 1) = -m.nu23 / m.e2;
    s(3, 3) = 1.0 / m.g23();
    s(4, 4) = 1.0 / m.g12;
    s(5, 5) = 1.0 / m.g12;
    return s;
}

/// Stiffness by dense inversion of the compliance. Throws InvalidInput naming
/// the offending eigenvalue when the result is not positive definite.
inline StiffnessMatrix stiffness_from_engineering(const Material& m) {
    const Matrix6 s = compliance_from_engineering(m);
    Eigen::SelfAdjointEigenSolver<Matrix6> es_s(s);
    for (int k = 0; k < 6; ++k) {
        if (!(es_s.eigenvalues()(k) > 0.0)) {
            std::ostringstream os;
            os << "material '" << m.name << "' is not thermodynamically admissible: compliance eigenvalue #" << k
               << " = " << es_s.eigenvalues()(k) << " is not positive";
            throw InvalidInput(os.str());
        }
    }
    Matrix6 c = s.inverse();
    // Inversion leaves asymmetry at the ulp level; symmetrize exactly.
    c = (0.5 * (c + c.transpose())).eval();
    Eigen::SelfAdjointEigenSolver<Matrix6> es(c);
    for (int k = 0; k < 6; ++k) {
        if (!(es.eigenvalues()(k) > 0.0)) {
            std::ostringstream os;
            os << "material '" << m.name << "' is not thermodynamically admissible: stiffness eigenvalue #" << k
               << " = " << es.eigenvalues()(k) << " Pa is not positive";
            throw InvalidInput(os.str());
        }
    }
    return {c};
}

inline bool is_admissible(const Material& m) {
    try {
        (void)stiffness_from_engineering(m);
        return true;
    } catch (const InvalidInput&) {
        return false;
    }
}

using Tensor4 = std::array<std::array<std::array<std::array<double, 3>, 3>, 3>, 3>;

inline Tensor4 voigt_to_tensor(const Matrix6& c) {
    Tensor4 t{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) t[i][j][k][l] = c(detail::voigt(i, j), detail::voigt(k, l));
    return t;
}

inline Matrix6 tensor_to_voigt(const Tensor4& t) {
    constexpr int pairs[6][2] = {{0, 0}, {1, 1}, {2, 2}, {1, 2}, {0, 2}, {0, 1}};
    Matrix6 c;
    for (int a = 0; a < 6; ++a)
        for (int b = 0; b < 6; ++b) c(a, b) = t[pairs[a][0]][pairs[a][1]][pairs[b][0]][pairs[b][1]];
    return c;
}

/// Rotates the material by `angle` about x3 (active rotation): a fibre lying
/// along x1 ends up at `angle` from x1. Done on the full fourth-order tensor.
inline RotatedStiffness rotate_stiffness(const StiffnessMatrix& in, double angle) {
    if (!std::isfinite(angle)) throw InvalidInput("rotation angle must be finite");
    const double cs = std::cos(angle);
    const double sn = std::sin(angle);
    const double r[3][3] = {{cs, -sn, 0.0}, {sn, cs, 0.0}, {0.0, 0.0, 1.0}};
    const Tensor4 t = voigt_to_tensor(in.c);

    // Contract one index at a time: O(4 * 3^5) instead of O(3^8).
    Tensor4 a{}, b{};
    for (int i = 0; i < 3; ++i)
        for (int q = 0; q < 3; ++q)
            for (int rr = 0; rr < 3; ++rr)
                for (int s = 0; s < 3; ++s) {
                    double acc = 0.0;
                    for (int p = 0; p < 3; ++p) acc += r[i][p] * t[p][q][rr][s];
                    a[i][q][rr][s] = acc;
                }
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int rr = 0; rr < 3; ++rr)
                for (int s = 0; s < 3; ++s) {
                    double acc = 0.0;
                    for (int q = 0; q < 3; ++q) acc += r[j][q] * a[i][q][rr][s];
                    b[i][j][rr][s] = acc;
                }
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int s = 0; s < 3; ++s) {
                    double acc = 0.0;
                    for (int rr = 0; rr < 3; ++rr) acc += r[k][rr] * b[i][j][rr][s];
                    a[i][j][k][s] = acc;
                }
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) {
                    double acc = 0.0;
                    for (int s = 0; s < 3; ++s) acc += r[l][s] * a[i][j][k][s];
                    b[i][j][k][l] = acc;
                }

    Matrix6 c = tensor_to_voigt(b);
    if (!c.allFinite()) throw InvalidInput("stiffness rotation overflowed");
    if (angle == 0.0) c = in.c;
    c = (0.5 * (c + c.transpose())).eval();
    return {c, angle};
}

enum class LayupKind { unidirectional, cross_ply, quasi_isotropic };

inline std::string_view to_string(LayupKind k) {
    switch (k) {
    case LayupKind::unidirectional: return "unidirectional";
    case LayupKind::cross_ply: return "cross-ply";
    case LayupKind::quasi_isotropic: return "quasi-isotropic";
    }
    return "?";
}

inline LayupKind parse_layup_kind(std::string_view s) {
    if (s == "unidirectional" || s == "ud") return LayupKind::unidirectional;
    if (s == "cross-ply" || s == "cross_ply" || s == "cp") return LayupKind::cross_ply;
    if (s == "quasi-isotropic" || s == "quasi_isotropic" || s == "qi") return LayupKind::quasi_isotropic;
    throw InvalidInput("unknown layup kind '" + std::string(s) + "'");
}

struct Layup {
    std::vector<double> ply_angles; // degrees, top to bottom
    double ply_thickness = 0.0;     // m
    LayupKind kind = LayupKind::unidirectional;

    std::size_t size() const { return ply_angles.size(); }
    double total_thickness() const { return ply_thickness * static_cast<double>(ply_angles.size()); }
};

inline std::vector<double> layup_pattern(LayupKind kind) {
    switch (kind) {
    case LayupKind::unidirectional: return {0.0};
    case LayupKind::cross_ply: return {0.0, 90.0};
    case LayupKind::quasi_isotropic: return {0.0, 45.0, -45.0, 90.0};
    }
    return {};
}

/// Symmetric laminate: the base pattern is repeated to fill the upper half and
/// mirrored about the midplane.
inline Layup build_layup(LayupKind kind, int n_plies, double total_thickness) {
    if (n_plies <= 0 || n_plies % 2 != 0) {
        throw InvalidInput("symmetric laminate needs a positive even ply count, got " + std::to_string(n_plies));
    }
    if (!(total_thickness > 0.0) || !std::isfinite(total_thickness)) {
        throw InvalidInput("laminate thickness must be positive");
    }
    const auto pattern = layup_pattern(kind);
    const int half = n_plies / 2;
    if (half % static_cast<int>(pattern.size()) != 0) {
        std::ostringstream os;
        os << to_string(kind) << " layup: " << n_plies << " plies is not a symmetric repetition of a "
           << pattern.size() << "-ply pattern";
        throw InvalidInput(os.str());
    }
    Layup out;
    out.kind = kind;
    out.ply_thickness = total_thickness / n_plies;
    out.ply_angles.reserve(static_cast<std::size_t>(n_plies));
    for (int i = 0; i < half; ++i) out.ply_angles.push_back(pattern[static_cast<std::size_t>(i) % pattern.size()]);
    for (int i = half - 1; i >= 0; --i) out.ply_angles.push_back(out.ply_angles[static_cast<std::size_t>(i)]);
    return out;
}

/// The 16-ply, 2 mm laminate used for every dataset sample.
inline Layup standard_layup(LayupKind kind) { return build_layup(kind, 16, 2e-3); }

/// Isotropic material expressed through the transversely isotropic parameters.
inline Material isotropic_material(double young, double poisson, double rho, std::string name = "isotropic") {
    return Material{std::move(name), rho, young, young, young / (2.0 * (1.0 + poisson)), poisson, poisson};
}

} // namespace gwgen
