// Acceptance suite: one PASS/FAIL line per criterion P1..P8.
//
//   acceptance [--only P1,P4] [--expect-red P3,P5]
//
// Exit status is 1 when a criterion outside the expected-red list fails.

#include "oracles/rayleigh_lamb.hpp"
#include "support.hpp"
#include "toy_networks.hpp"

#include <gwgen/dataset.hpp>
#include <gwgen/dispersion.hpp>
#include <gwgen/latent.hpp>
#include <gwgen/nn.hpp>
#include <gwgen/polar.hpp>

#include <boost/math/special_functions/gamma.hpp>

#include <chrono>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

using namespace gwgen;
using testing_support::aluminium;
using testing_support::as4;
using testing_support::data_dir;
using testing_support::scratch_dir;

namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Collects the worst case of each check into a short detail line.
class Report {
public:
    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass_ = false;
            if (failures_++ < 4) fail_ << (fail_.tellp() > 0 ? "; " : "") << what;
        }
    }
    void note(const std::string& s) { notes_ << (notes_.tellp() > 0 ? "; " : "") << s; }
    Outcome done() const {
        std::string d = notes_.str();
        if (!pass_) {
            d += (d.empty() ? "" : " | ") + std::string("failed: ") + fail_.str();
            if (failures_ > 4) d += " (+" + std::to_string(failures_ - 4) + " more)";
        }
        return {pass_, d};
    }

private:
    bool pass_ = true;
    int failures_ = 0;
    std::ostringstream fail_, notes_;
};

std::string fmt(double v, int prec = 4) {
    std::ostringstream s;
    s.precision(prec);
    s << v;
    return s.str();
}

std::string pct(double v) { return fmt(100.0 * v, 3) + "%"; }

std::vector<double> grid() {
    std::vector<double> f;
    for (int k = 1; k <= 10; ++k) f.push_back(20e3 * k);
    return f;
}

const oracle::Isotropic kAl{70e9, 0.33, 2700};
const std::vector<LayupKind> kLayups{LayupKind::unidirectional, LayupKind::cross_ply, LayupKind::quasi_isotropic};

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

Outcome p1() {
    Report r;
    const auto layup = standard_layup(LayupKind::unidirectional);
    const PlateAtAngle plate(aluminium(), layup, 0.0);
    double worst = 0;
    for (double f : grid()) {
        const auto want = oracle::fundamental(kAl, 2e-3, f);
        const auto sol = solve_modes(plate, f);
        for (auto [label, ref] : {std::pair{ModeLabel::A0, want.a0}, std::pair{ModeLabel::S0, want.s0}}) {
            const auto* p = find_label(sol, label);
            if (!p) {
                r.check(false, std::string(to_string(label)) + " missing at " + fmt(f));
                continue;
            }
            const double e = rel(p->cp, ref);
            worst = std::max(worst, e);
            r.check(e < 1e-3, std::string(to_string(label)) + " at " + fmt(f) + " Hz off by " + pct(e));
        }
    }
    r.note("worst cp deviation " + pct(worst) + " over 10 frequencies");
    return r.done();
}

Outcome p2() {
    Report r;
    PolarConfig cfg;
    cfg.use_symmetry = false;
    const auto layup = standard_layup(LayupKind::unidirectional);
    double worst = 0;
    for (double f : {20e3, 100e3, 200e3}) {
        for (const auto& p : polar_profiles(aluminium(), layup, f, {ModeLabel::A0, ModeLabel::S0}, cfg)) {
            const double v = (p.max_cg() - p.min_cg()) / p.min_cg();
            worst = std::max(worst, v);
            r.check(v < 5e-3, std::string(to_string(p.mode)) + " at " + fmt(f) + " Hz varies " + pct(v));
            r.check(p.interpolated_count() == 0, "interpolated angles at " + fmt(f));
        }
    }
    r.note("worst variation " + pct(worst) + " (20, 100, 200 kHz, 360 solved angles)");
    return r.done();
}

Outcome p3() {
    Report r;
    const double f = 20e3;
    const auto sol = solve_modes(PlateAtAngle(aluminium(), standard_layup(LayupKind::unidirectional), 0.0), f);
    const auto *a0 = find_label(sol, ModeLabel::A0), *s0 = find_label(sol, ModeLabel::S0);
    if (!a0 || !s0) {
        r.check(false, "A0 or S0 not found");
        return r.done();
    }
    const double plate_speed = std::sqrt(70e9 / (2700 * (1 - 0.33 * 0.33)));
    const double es = rel(s0->cg, plate_speed);
    r.check(es < 0.01, "S0 cg " + fmt(s0->cg, 6) + " vs " + fmt(plate_speed, 6) + " (" + pct(es) + ")");
    const double ea = rel(a0->cg, 2 * a0->cp);
    r.check(ea < 0.02, "A0 cg/cp = " + fmt(a0->cg / a0->cp, 4) + ", " + pct(ea) + " from 2");
    r.note("S0 " + pct(es) + ", A0 cg/cp " + fmt(a0->cg / a0->cp, 4));
    return r.done();
}

Outcome p4() {
    Report r;
    const auto layup = standard_layup(LayupKind::unidirectional);
    const auto m = as4();
    std::string hits;
    for (double f : grid()) {
        const auto c0 = detail::cg_at_angle(m, layup, f, 0.0, {ModeLabel::A0}, {})[0];
        const auto c90 = detail::cg_at_angle(m, layup, f, 90.0, {ModeLabel::A0}, {})[0];
        if (c0 >= 1300 && c0 <= 1600 && c90 >= 660 && c90 <= 840) {
            hits += (hits.empty() ? "" : ", ") + fmt(f / 1e3) + " kHz (" + fmt(c0) + "/" + fmt(c90) + ")";
        }
    }
    r.check(!hits.empty(), "no grid frequency puts A0 cg(0) and cg(90) in range");
    if (!hits.empty()) r.note("A0 cg(0)/cg(90) in range at " + hits);
    return r.done();
}

Outcome p5() {
    Report r;
    const auto m = as4();
    PolarConfig cfg;
    cfg.use_symmetry = false;
    double worst_defect = 0, worst_score = 1;
    std::string worst_defect_at, worst_score_at;
    for (auto kind : kLayups) {
        const auto layup = standard_layup(kind);
        for (double f : grid()) {
            for (const auto& p : polar_profiles(m, layup, f, {ModeLabel::A0, ModeLabel::S0}, cfg)) {
                const std::string at = std::string(to_string(kind)) + " " + std::string(to_string(p.mode)) + " " +
                                       fmt(f / 1e3) + " kHz";
                const double d = symmetry_defect(p);
                const double s = symmetry_score(rasterize(p, default_scale(p.mode))).value;
                if (d > worst_defect) worst_defect = d, worst_defect_at = at;
                if (s < worst_score) worst_score = s, worst_score_at = at;
                r.check(d < 0.01, at + " defect " + pct(d));
                r.check(s >= 0.95, at + " score " + fmt(s, 3));
            }
        }
    }
    r.note("worst defect " + pct(worst_defect) + " (" + worst_defect_at + "), worst score " + fmt(worst_score, 3) +
           " (" + worst_score_at + ")");
    return r.done();
}

std::map<fs::path, std::string> tree(const fs::path& root) {
    std::map<fs::path, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        out[fs::relative(e.path(), root)] = {std::istreambuf_iterator<char>(in), {}};
    }
    return out;
}

Outcome p6() {
    Report r;
    const auto cfg_dir = data_dir() / "configs";
    const auto n1 = plan_records(load_dataset_config(cfg_dir / "dataset1.json")).size();
    const auto n2 = plan_records(load_dataset_config(cfg_dir / "dataset2.json")).size();
    r.check(n1 == 600, "dataset1 plans " + std::to_string(n1));
    r.check(n2 == 19740, "dataset2 plans " + std::to_string(n2));

    auto smoke = load_dataset_config(cfg_dir / "smoke.json");
    std::vector<std::map<fs::path, std::string>> runs;
    double slowest = 0;
    for (const char* name : {"acceptance-smoke-a", "acceptance-smoke-b"}) {
        smoke.output_dir = scratch_dir(name);
        const auto t0 = std::chrono::steady_clock::now();
        const auto sum = generate_dataset(smoke);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        slowest = std::max(slowest, secs);
        r.check(secs < 600, "smoke run took " + fmt(secs) + " s");
        r.check(sum.failed == 0, std::to_string(sum.failed) + " failed records");
        r.check(read_manifest(smoke.output_dir / "manifest.jsonl").size() == 40, "smoke manifest size");
        runs.push_back(tree(smoke.output_dir));
    }
    r.check(runs[0] == runs[1], "smoke reruns differ");
    r.note("plans 600/19740; smoke 40 records, " + std::to_string(runs[0].size()) + " files identical across runs, " +
           fmt(slowest, 3) + " s per run");
    return r.done();
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return INFINITY;
    double w = 0;
    for (std::size_t i = 0; i < a.size(); ++i) w = std::max(w, std::abs(a[i] - b[i]));
    return w;
}

Outcome p7() {
    using namespace gwgen::nn;
    Report r;
    std::mt19937_64 g(7007);
    double worst = 0;
    for (auto kind : {LayerKind::dense, LayerKind::conv, LayerKind::conv_transpose, LayerKind::activation,
                      LayerKind::reshape}) {
        for (int trial = 0; trial < 50; ++trial) {
            const auto c = toy::random_case(kind, g);
            const auto x = toy::random_input(c.in_shape, g);
            const double d = max_abs_diff(forward(c.layer, x).data, toy::oracle_apply(c.layer, x));
            worst = std::max(worst, d);
            r.check(d < 1e-6, std::string(to_string(kind)) + " trial " + std::to_string(trial) + " diff " + fmt(d));
        }
    }
    const auto dir = scratch_dir("acceptance-wgt");
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto w = toy::vae(5, 32, seed);
        save_weights(w, dir / "toy.wgt");
        std::ifstream in(dir / "toy.wgt", std::ios::binary);
        const std::string bytes{std::istreambuf_iterator<char>(in), {}};
        const auto back = load_weights(dir / "toy.wgt");
        r.check(bytes == serialize_weights(w) && serialize_weights(back) == bytes, "WGT1 round trip seed " +
                                                                                       std::to_string(seed));
        const std::vector<double> z{0.3, -1.2, 2.0, 0.0, -0.7};
        r.check(max_abs_diff(decode(z, back).data, toy::oracle_run(w.decoder, Tensor(std::vector<int>{5}, z))) < 1e-6,
                "decode after reload");
    }
    r.note("250 layers, worst diff " + fmt(worst, 3) + "; 3 WGT1 files bit-exact");
    return r.done();
}

double uniformity_p(const std::vector<LatentPoint>& pts, std::size_t axis) {
    std::vector<double> count(10, 0.0);
    for (const auto& z : pts) count[std::min<std::size_t>(9, static_cast<std::size_t>((z[axis] + 2.0) / 4.0 * 10))] += 1;
    const double expect = static_cast<double>(pts.size()) / 10;
    double chi2 = 0;
    for (double c : count) chi2 += (c - expect) * (c - expect) / expect;
    return boost::math::gamma_q(4.5, chi2 / 2.0);
}

Outcome p8() {
    Report r;
    const auto pts = sample_monte_carlo(10000, 2022);
    bool inside = true;
    for (const auto& z : pts) {
        inside = inside && z.size() == 5;
        for (double v : z) inside = inside && v >= -2.0 && v <= 2.0;
    }
    r.check(inside, "a point left [-2, 2]^5");
    double min_p = 1;
    for (std::size_t a = 0; a < 5; ++a) {
        const double p = uniformity_p(pts, a);
        min_p = std::min(min_p, p);
        r.check(p > 1e-3, "axis " + std::to_string(a + 1) + " p = " + fmt(p, 3));
    }
    for (int axis = 1; axis <= 5; ++axis) {
        for (int steps : {2, 5, 11, 41}) {
            const auto d = sample_directional(axis, steps);
            bool ok = static_cast<int>(d.size()) == steps;
            for (int k = 0; ok && k < steps; ++k) {
                for (int j = 1; j <= 5; ++j) {
                    const double want = j == axis ? -2.0 + 4.0 * k / (steps - 1) : 0.0;
                    ok = ok && d[static_cast<std::size_t>(k)][static_cast<std::size_t>(j - 1)] == want;
                }
            }
            r.check(ok, "directional axis " + std::to_string(axis) + " steps " + std::to_string(steps));
        }
    }
    r.note("n = 10000, min chi-square p " + fmt(min_p, 3) + "; directional progressions exact");
    return r.done();
}

struct Criterion {
    const char* id;
    const char* title;
    double budget_s; // 0: no runtime bound
    std::function<Outcome()> run;
};

std::set<std::string> split(const std::string& s) {
    std::set<std::string> out;
    std::istringstream in(s);
    for (std::string t; std::getline(in, t, ',');)
        if (!t.empty()) out.insert(t);
    return out;
}

} // namespace

int main(int argc, char** argv) {
    std::set<std::string> only, expect_red;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if ((a == "--only" || a == "--expect-red") && i + 1 < argc) {
            (a == "--only" ? only : expect_red) = split(argv[++i]);
        } else {
            std::cerr << "usage: acceptance [--only P1,P2] [--expect-red P3]\n";
            return 2;
        }
    }

    const std::vector<Criterion> all{
        {"P1", "Rayleigh-Lamb oracle equivalence", 30, p1},
        {"P2", "isotropy invariance", 300, p2},
        {"P3", "thin-plate limits", 0, p3},
        {"P4", "AS4M3502 unidirectional A0 anchor", 120, p4},
        {"P5", "two-axis symmetry", 0, p5},
        {"P6", "dataset counts and determinism", 0, p6},
        {"P7", "inference-engine oracle parity", 60, p7},
        {"P8", "sampler laws", 10, p8},
    };

    int unexpected = 0;
    for (const auto& c : all) {
        if (!only.empty() && !only.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.budget_s > 0 && secs > c.budget_s) {
            o.pass = false;
            o.detail += " | over the " + fmt(c.budget_s) + " s budget";
        }
        const bool red_ok = !o.pass && expect_red.count(c.id);
        if (!o.pass && !red_ok) ++unexpected;
        std::cout << c.id << ' ' << (o.pass ? "PASS" : "FAIL") << (red_ok ? " (expected)" : "") << "  " << c.title
                  << "  [" << fmt(secs, 3) << " s]  " << o.detail << std::endl;
    }
    return unexpected == 0 ? 0 : 1;
}
