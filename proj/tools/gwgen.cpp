// gwgen: dispersion solves, polar rasters, dataset synthesis, latent
// sampling and decoder-driven generation from one binary.
//
// Exit codes: 0 success, 1 domain error, 2 usage error.

#include <gwgen/dataset.hpp>
#include <gwgen/dispersion.hpp>
#include <gwgen/latent.hpp>
#include <gwgen/material_io.hpp>
#include <gwgen/nn.hpp>
#include <gwgen/polar.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace gwgen;

namespace {

constexpr const char* kOutEnv = "GWGEN_OUT_DIR";

fs::path default_out_dir() {
    const char* env = std::getenv(kOutEnv);
    return env && *env ? fs::path(env) : fs::path("out");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct MaterialArgs {
    std::string file;
    std::string name;
    std::string layup = "unidirectional";
    int plies = 16;
    double thickness = 2e-3;

    void add(CLI::App* app) {
        app->add_option("--material", file, "material JSON (one object or a list)")->required()->check(CLI::ExistingFile);
        app->add_option("--name", name, "material name when the file holds several");
        app->add_option("--layup", layup, "unidirectional | cross-ply | quasi-isotropic")->capture_default_str();
        app->add_option("--plies", plies, "ply count of the symmetric laminate")->capture_default_str();
        app->add_option("--thickness", thickness, "laminate thickness in m")->capture_default_str();
    }
    Material material() const { return load_material(file, name.empty() ? std::nullopt : std::optional(name)); }
    Layup stack() const { return build_layup(parse_layup_kind(layup), plies, thickness); }
};

std::vector<ModeLabel> parse_modes(const std::string& s) {
    if (s == "both" || s == "all") return {ModeLabel::A0, ModeLabel::S0};
    return {parse_mode(s)};
}

int run_dispersion(const MaterialArgs& ma, const std::vector<double>& freqs, const std::vector<double>& angles,
                   const SweepConfig& sweep) {
    const auto m = ma.material();
    const auto layup = ma.stack();
    std::cout << "f_hz,angle_deg,mode,cp_mps,cg_mps,ambiguous,cg_one_sided,cg_clamped\n" << std::setprecision(10);
    for (double a : angles) {
        const PlateAtAngle plate(m, layup, deg2rad(a));
        for (double f : freqs) {
            const auto sol = solve_modes(plate, f, sweep);
            for (const auto& p : sol.points) {
                std::cout << f << ',' << a << ',' << to_string(p.label) << ',' << p.cp << ',' << p.cg << ','
                          << p.ambiguous << ',' << p.cg_one_sided << ',' << p.cg_clamped << '\n';
            }
            std::cerr << m.name << " " << to_string(layup.kind) << " f=" << f << " Hz angle=" << a << " deg: "
                      << sol.points.size() << " modes";
            for (const auto& w : sol.warnings) std::cerr << "; warning: " << w;
            std::cerr << '\n';
        }
    }
    return 0;
}

int run_polar(const MaterialArgs& ma, double f, const std::string& mode, fs::path out, int size, double scale_a0,
              double scale_s0, bool brute, int jobs, bool overwrite) {
    const auto m = ma.material();
    const auto layup = ma.stack();
    PolarConfig cfg;
    cfg.use_symmetry = !brute;
    cfg.jobs = jobs;
    const auto t0 = std::chrono::steady_clock::now();
    const auto modes = parse_modes(mode);
    const auto profiles = polar_profiles(m, layup, f, modes, cfg);
    fs::create_directories(out);
    for (const auto& p : profiles) {
        const std::string stem = std::string(to_string(p.mode));
        const auto csv = out / (stem + ".csv"), pgm = out / (stem + ".pgm");
        if (!overwrite && (fs::exists(csv) || fs::exists(pgm))) {
            throw IoError(csv.string() + " or " + pgm.string() + " exists; pass --overwrite to replace");
        }
        const auto img = rasterize(p, p.mode == ModeLabel::A0 ? scale_a0 : scale_s0, size);
        write_profile_csv(p, csv);
        write_pgm(img, pgm);
        std::cerr << stem << ": cg " << p.min_cg() << ".." << p.max_cg() << " m/s, " << p.interpolated_count()
                  << " interpolated angles, symmetry score " << symmetry_score(img).value << ", defect "
                  << symmetry_defect(p) << '\n';
    }
    std::cerr << "wrote " << out << " in " << seconds_since(t0) << " s\n";
    return 0;
}

int run_dataset(const std::string& config, const std::string& out, int jobs, bool overwrite, bool dry_run) {
    const auto j = read_json_file(config);
    auto cfg = dataset_config_from_json(j, fs::path(config).parent_path());
    if (!out.empty()) {
        cfg.output_dir = out;
    } else if (!j.contains("output_dir")) {
        cfg.output_dir = default_out_dir() / fs::path(config).stem();
    }
    const auto plan = plan_records(cfg);
    if (dry_run) {
        std::cout << nlohmann::json{{"materials", cfg.materials.size()},
                                    {"layups", cfg.layups.size()},
                                    {"frequencies", cfg.frequencies.size()},
                                    {"modes", cfg.modes.size()},
                                    {"records", plan.size()}}
                         .dump()
                  << '\n';
        return 0;
    }
    GenerateOptions opt;
    opt.jobs = jobs;
    opt.overwrite = overwrite;
    opt.log = [](const std::string& s) { std::cerr << s << '\n'; };
    const auto t0 = std::chrono::steady_clock::now();
    const auto sum = generate_dataset(cfg, opt);
    std::cout << (cfg.output_dir / "manifest.jsonl").string() << '\n';
    std::cerr << sum.records.size() << " records (" << sum.generated << " generated, " << sum.skipped << " kept, "
              << sum.failed << " failed) in " << seconds_since(t0) << " s\n";
    return 0;
}

int run_validate(const std::string& manifest, const std::string& config, double tolerance) {
    const auto records = read_manifest(manifest); // throws on dangling files
    const auto dir = fs::path(manifest).parent_path();
    std::size_t failed = 0;
    std::vector<std::string> problems;
    for (const auto& r : records) {
        if (r.failed) {
            ++failed;
            continue;
        }
        const auto img = read_pgm(dir / r.raster);
        const double s = symmetry_score(img).value;
        if (std::abs(s - r.symmetry_score) > tolerance) {
            std::ostringstream os;
            os << r.id << "_" << to_string(r.mode) << ": recorded symmetry score " << r.symmetry_score
               << ", raster gives " << s;
            problems.push_back(os.str());
        }
    }
    std::set<std::pair<std::string, std::string>> keys;
    for (const auto& r : records)
        if (!keys.insert(r.key()).second) problems.push_back("duplicate record " + r.id + "_" + std::string(to_string(r.mode)));
    if (!config.empty()) {
        const auto cfg = load_dataset_config(config);
        const auto plan = plan_records(cfg);
        if (plan.size() != records.size()) {
            problems.push_back("config plans " + std::to_string(plan.size()) + " records, manifest holds " +
                               std::to_string(records.size()));
        }
    }
    std::cout << nlohmann::json{{"records", records.size()}, {"failed", failed}, {"problems", problems}}.dump() << '\n';
    for (const auto& p : problems) std::cerr << "problem: " << p << '\n';
    std::cerr << records.size() << " records, " << failed << " flagged failed, " << problems.size() << " problems\n";
    if (!problems.empty()) throw ValidationError(manifest + " failed validation");
    return 0;
}

std::vector<LatentPoint> sampled_points(const std::string& sampler, std::size_t n, int axis, int steps,
                                        std::uint64_t seed, double lo, double hi, int dim) {
    if (sampler == "mc") return sample_monte_carlo(n, seed, lo, hi, dim);
    if (sampler == "dir") return sample_directional(axis, steps, lo, hi, dim);
    throw InvalidInput("unknown sampler '" + sampler + "' (mc | dir)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Guided-wave polar representations: dispersion, datasets and latent generation"};
    app.require_subcommand(1);

    // dispersion
    auto* disp = app.add_subcommand("dispersion", "phase and group velocities of A0, SH0, S0");
    MaterialArgs disp_m;
    disp_m.add(disp);
    std::vector<double> disp_f, disp_a{0.0};
    SweepConfig sweep;
    disp->add_option("--freq", disp_f, "frequency in Hz (repeatable)")->required();
    disp->add_option("--angle", disp_a, "propagation angle in degrees (repeatable)")->capture_default_str();
    disp->add_option("--cp-max", sweep.cp_max, "upper end of the phase-velocity scan, m/s")->capture_default_str();

    // polar
    auto* pol = app.add_subcommand("polar", "polar group-velocity profile and raster at one frequency");
    MaterialArgs pol_m;
    pol_m.add(pol);
    double pol_f = 0;
    std::string pol_mode = "both", pol_out;
    int pol_size = 64, pol_jobs = 1;
    double scale_a0 = 3000, scale_s0 = 12000;
    bool pol_brute = false, pol_over = false;
    pol->add_option("--freq", pol_f, "frequency in Hz")->required();
    pol->add_option("--mode", pol_mode, "A0 | S0 | both")->capture_default_str();
    pol->add_option("--out", pol_out, "output directory (default $" + std::string(kOutEnv) + " or ./out)");
    pol->add_option("--size", pol_size, "raster size in pixels")->capture_default_str();
    pol->add_option("--scale-a0", scale_a0, "A0 raster half-width in m/s")->capture_default_str();
    pol->add_option("--scale-s0", scale_s0, "S0 raster half-width in m/s")->capture_default_str();
    pol->add_flag("--no-symmetry", pol_brute, "solve all 360 angles");
    pol->add_option("--jobs", pol_jobs, "worker threads")->capture_default_str();
    pol->add_flag("--overwrite", pol_over, "replace existing outputs");

    // dataset
    auto* ds = app.add_subcommand("dataset", "synthesize a dataset from a JSON config");
    std::string ds_cfg, ds_out;
    int ds_jobs = 1;
    bool ds_over = false, ds_dry = false;
    ds->add_option("--config", ds_cfg, "dataset config JSON")->required()->check(CLI::ExistingFile);
    ds->add_option("--out", ds_out, "output directory (overrides the config)");
    ds->add_option("--jobs", ds_jobs, "worker threads")->capture_default_str();
    ds->add_flag("--overwrite", ds_over, "regenerate every record");
    ds->add_flag("--dry-run", ds_dry, "print the planned record count and exit");

    // sample
    auto* smp = app.add_subcommand("sample", "latent points as z1..zL CSV on stdout");
    smp->require_subcommand(1);
    std::size_t mc_n = 20;
    std::uint64_t mc_seed = 0;
    int dir_axis = 1, dir_steps = 5, smp_dim = kLatentDim;
    double smp_lo = -2, smp_hi = 2;
    auto* smp_mc = smp->add_subcommand("mc", "uniform Monte Carlo points");
    smp_mc->add_option("--n", mc_n, "number of points")->capture_default_str();
    smp_mc->add_option("--seed", mc_seed, "RNG seed")->capture_default_str();
    auto* smp_dir = smp->add_subcommand("dir", "equally spaced points along one axis");
    smp_dir->add_option("--axis", dir_axis, "1-based latent axis")->capture_default_str();
    smp_dir->add_option("--steps", dir_steps, "number of points")->capture_default_str();
    for (auto* s : {smp_mc, smp_dir}) {
        s->add_option("--lo", smp_lo, "lower bound")->capture_default_str();
        s->add_option("--hi", smp_hi, "upper bound")->capture_default_str();
        s->add_option("--dim", smp_dim, "latent dimension")->capture_default_str();
    }

    // generate
    auto* gen = app.add_subcommand("generate", "decode latent points into A0/S0 rasters");
    std::string gen_w, gen_sampler, gen_lat, gen_out;
    std::size_t gen_n = 20;
    int gen_axis = 1, gen_steps = 5, gen_jobs = 1;
    std::uint64_t gen_seed = 0;
    double gen_lo = -2, gen_hi = 2, gen_thr = 0.5;
    bool gen_over = false;
    gen->add_option("--weights", gen_w, "WGT1 weight file")->required()->check(CLI::ExistingFile);
    auto* opt_sampler = gen->add_option("--sampler", gen_sampler, "mc | dir");
    auto* opt_lat = gen->add_option("--latents", gen_lat, "z1..zL CSV file, or - for stdin");
    opt_sampler->excludes(opt_lat);
    gen->add_option("--n", gen_n, "Monte Carlo point count")->capture_default_str();
    gen->add_option("--seed", gen_seed, "Monte Carlo seed")->capture_default_str();
    gen->add_option("--axis", gen_axis, "directional axis (1-based)")->capture_default_str();
    gen->add_option("--steps", gen_steps, "directional step count")->capture_default_str();
    gen->add_option("--lo", gen_lo, "sampler lower bound")->capture_default_str();
    gen->add_option("--hi", gen_hi, "sampler upper bound")->capture_default_str();
    gen->add_option("--threshold", gen_thr, "binarization threshold")->capture_default_str();
    gen->add_option("--out", gen_out, "output directory (default $" + std::string(kOutEnv) + "/generated)");
    gen->add_option("--jobs", gen_jobs, "worker threads")->capture_default_str();
    gen->add_flag("--overwrite", gen_over, "replace an existing generation manifest");

    // validate
    auto* val = app.add_subcommand("validate", "re-check a dataset manifest");
    std::string val_m, val_cfg;
    double val_tol = 1e-9;
    val->add_option("--manifest", val_m, "manifest.jsonl")->required()->check(CLI::ExistingFile);
    val->add_option("--config", val_cfg, "dataset config to check the record count against")->check(CLI::ExistingFile);
    val->add_option("--tolerance", val_tol, "allowed symmetry-score difference")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << '\n' << app.help();
        return 2;
    }

    try {
        if (*disp) return run_dispersion(disp_m, disp_f, disp_a, sweep);
        if (*pol) {
            return run_polar(pol_m, pol_f, pol_mode, pol_out.empty() ? default_out_dir() : fs::path(pol_out), pol_size,
                             scale_a0, scale_s0, pol_brute, pol_jobs, pol_over);
        }
        if (*ds) return run_dataset(ds_cfg, ds_out, ds_jobs, ds_over, ds_dry);
        if (*smp) {
            const auto pts = *smp_mc ? sample_monte_carlo(mc_n, mc_seed, smp_lo, smp_hi, smp_dim)
                                     : sample_directional(dir_axis, dir_steps, smp_lo, smp_hi, smp_dim);
            write_latents_csv(pts, std::cout, smp_dim);
            std::cerr << pts.size() << " latent points\n";
            return 0;
        }
        if (*gen) {
            const auto w = nn::load_weights(gen_w);
            std::vector<LatentPoint> pts;
            if (!gen_lat.empty()) {
                if (gen_lat == "-") {
                    pts = read_latents_csv(std::cin);
                } else {
                    std::ifstream in(gen_lat);
                    if (!in) throw IoError("cannot open " + gen_lat);
                    pts = read_latents_csv(in);
                }
            } else if (!gen_sampler.empty()) {
                pts = sampled_points(gen_sampler, gen_n, gen_axis, gen_steps, gen_seed, gen_lo, gen_hi, w.latent_dim);
            } else {
                std::cerr << "generate: one of --sampler or --latents is required\n\n" << gen->help();
                return 2;
            }
            const fs::path out = gen_out.empty() ? default_out_dir() / "generated" : fs::path(gen_out);
            GenerateConfig gc;
            gc.threshold = gen_thr;
            gc.jobs = gen_jobs;
            gc.overwrite = gen_over;
            const auto t0 = std::chrono::steady_clock::now();
            const auto recs = generate(pts, w, out, gc);
            std::size_t bad = 0;
            double score = 0;
            for (const auto& r : recs) {
                bad += r.failed;
                if (!r.failed) score += 0.5 * (r.score_a0 + r.score_s0);
            }
            std::cout << (out / "manifest.jsonl").string() << '\n';
            std::cerr << recs.size() << " points decoded (" << bad << " failed), mean symmetry score "
                      << (recs.size() > bad ? score / static_cast<double>(recs.size() - bad) : 0.0) << ", "
                      << seconds_since(t0) << " s\n";
            return 0;
        }
        if (*val) return run_validate(val_m, val_cfg, val_tol);
    } catch (const gwgen::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
