#include "support.hpp"
#include "toy_networks.hpp"

#include <gwgen/latent.hpp>

#include <boost/math/special_functions/gamma.hpp>
#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace gwgen;
using testing_support::scratch_dir;

namespace fs = std::filesystem;

namespace {

// Upper-tail p-value of Pearson's statistic over equal-width bins.
double uniformity_p(const std::vector<LatentPoint>& pts, std::size_t axis, double lo, double hi, int bins = 10) {
    std::vector<double> count(static_cast<std::size_t>(bins), 0.0);
    for (const auto& z : pts) {
        const int b = std::min(bins - 1, static_cast<int>((z[axis] - lo) / (hi - lo) * bins));
        count[static_cast<std::size_t>(b)] += 1;
    }
    const double expect = static_cast<double>(pts.size()) / bins;
    double chi2 = 0;
    for (double c : count) chi2 += (c - expect) * (c - expect) / expect;
    return boost::math::gamma_q((bins - 1) / 2.0, chi2 / 2.0);
}

} // namespace

TEST(MonteCarlo, SeededInsideBoundsAndUniform) {
    const auto pts = sample_monte_carlo(10000, 7);
    ASSERT_EQ(pts.size(), 10000u);
    for (const auto& z : pts) {
        ASSERT_EQ(z.size(), 5u);
        for (double v : z) {
            ASSERT_GE(v, -2.0);
            ASSERT_LE(v, 2.0);
        }
    }
    for (std::size_t a = 0; a < 5; ++a) EXPECT_GT(uniformity_p(pts, a, -2, 2), 1e-3) << "axis " << a + 1;
    EXPECT_EQ(sample_monte_carlo(20, 7), sample_monte_carlo(20, 7));
    EXPECT_NE(sample_monte_carlo(20, 7), sample_monte_carlo(20, 8));
    EXPECT_EQ(sample_monte_carlo(20, 3).size(), 20u);
    EXPECT_TRUE(sample_monte_carlo(0, 3).empty());
}

TEST(MonteCarlo, CustomBounds) {
    for (const auto& z : sample_monte_carlo(500, 1, 0.5, 0.75, 3)) {
        ASSERT_EQ(z.size(), 3u);
        for (double v : z) EXPECT_TRUE(v >= 0.5 && v <= 0.75);
    }
    EXPECT_THROW(sample_monte_carlo(5, 1, 1.0, 1.0), InvalidInput);
}

TEST(Directional, ArithmeticProgression) {
    const auto pts = sample_directional(1, 5);
    ASSERT_EQ(pts.size(), 5u);
    const double want[] = {-2, -1, 0, 1, 2};
    for (std::size_t k = 0; k < 5; ++k) {
        EXPECT_EQ(pts[k][0], want[k]);
        for (std::size_t j = 1; j < 5; ++j) EXPECT_EQ(pts[k][j], 0.0);
    }
    const auto mid = sample_directional(3, 1);
    EXPECT_EQ(mid.size(), 1u);
    EXPECT_EQ(mid[0][2], 0.0);
    const auto many = sample_directional(5, 9, -1, 3);
    for (std::size_t k = 0; k < 9; ++k) EXPECT_DOUBLE_EQ(many[k][4], -1 + 0.5 * static_cast<double>(k));
    EXPECT_THROW(sample_directional(0, 5), InvalidInput);
    EXPECT_THROW(sample_directional(6, 5), InvalidInput);
    EXPECT_THROW(sample_directional(1, 0), InvalidInput);
}

TEST(LatentCsv, RoundTripsExactly) {
    const auto pts = sample_monte_carlo(30, 2);
    std::stringstream ss;
    write_latents_csv(pts, ss);
    EXPECT_EQ(ss.str().substr(0, 15), "z1,z2,z3,z4,z5\n");
    EXPECT_EQ(read_latents_csv(ss), pts);
}

TEST(LatentCsv, ReportsBadLines) {
    std::stringstream bad_header("a,b\n1,2\n");
    EXPECT_THROW(read_latents_csv(bad_header), FormatError);
    std::stringstream empty("");
    EXPECT_THROW(read_latents_csv(empty), FormatError);
    std::stringstream short_row("z1,z2\n1,2\n3\n");
    try {
        (void)read_latents_csv(short_row);
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
    std::stringstream junk("z1\n1.5x\n");
    EXPECT_THROW(read_latents_csv(junk), FormatError);
    std::stringstream header_only("z1,z2\n");
    EXPECT_TRUE(read_latents_csv(header_only).empty());
}

TEST(Binarize, ThresholdIsInclusive) {
    nn::Tensor t({2, 2, 2}, {0.5, 0.49, 1.0, 0.0, 0.2, 0.7, 0.5, 0.51});
    const auto a = binarize(t, 0), s = binarize(t, 1);
    EXPECT_EQ(a.px, (std::vector<std::uint8_t>{1, 0, 1, 0}));
    EXPECT_EQ(s.px, (std::vector<std::uint8_t>{0, 1, 1, 1}));
}

TEST(GenerateLatent, WritesTwoRastersPerPoint) {
    const auto dir = scratch_dir("latent-gen");
    const auto w = toy::vae(5, 64, 17);
    const auto pts = sample_monte_carlo(20, 4);
    const auto recs = generate(pts, w, dir);
    ASSERT_EQ(recs.size(), 20u);
    std::size_t pgms = 0;
    for (const auto& e : fs::directory_iterator(dir / "rasters")) pgms += e.path().extension() == ".pgm";
    EXPECT_EQ(pgms, 40u);
    const auto img = read_pgm(dir / recs[3].raster_a0);
    EXPECT_EQ(img.width, 64);
    EXPECT_EQ(recs[3].id, "g0003");
    EXPECT_NEAR(recs[3].score_a0, symmetry_score(img).value, 1e-15);

    std::ifstream in(dir / "manifest.jsonl");
    std::size_t lines = 0;
    for (std::string line; std::getline(in, line); ++lines) {
        const auto j = nlohmann::json::parse(line);
        EXPECT_EQ(j.at("z").size(), 5u);
        EXPECT_TRUE(j.at("symmetry_score").contains("A0"));
        EXPECT_TRUE(j.at("symmetry_score").contains("S0"));
    }
    EXPECT_EQ(lines, 20u);

    EXPECT_THROW(generate(pts, w, dir), IoError);
    GenerateConfig again;
    again.overwrite = true;
    again.jobs = 2;
    const auto second = generate(pts, w, dir, again);
    for (std::size_t i = 0; i < recs.size(); ++i) EXPECT_EQ(second[i].score_s0, recs[i].score_s0);
}

TEST(GenerateLatent, EmptyInputGivesEmptyManifest) {
    const auto dir = scratch_dir("latent-empty");
    const auto recs = generate({}, toy::vae(5, 8, 1), dir / "out");
    EXPECT_TRUE(recs.empty());
    EXPECT_TRUE(fs::exists(dir / "out" / "manifest.jsonl"));
    EXPECT_EQ(fs::file_size(dir / "out" / "manifest.jsonl"), 0u);
    EXPECT_FALSE(fs::exists(dir / "out" / "rasters"));
}

TEST(GenerateLatent, NumericFailuresAreFlagged) {
    const auto dir = scratch_dir("latent-fail");
    auto w = toy::vae(5, 8, 1);
    std::fill(w.decoder[0].weight.begin(), w.decoder[0].weight.end(), std::numeric_limits<float>::max());
    const auto recs = generate({LatentPoint(5, 1e300), LatentPoint(5, 0.0)}, w, dir);
    ASSERT_EQ(recs.size(), 2u);
    EXPECT_TRUE(recs[0].failed);
    EXPECT_NE(recs[0].error.find("dec.fc"), std::string::npos) << recs[0].error;
    EXPECT_FALSE(recs[1].failed);
    const auto wrong_dim = generate({LatentPoint(3, 0.0)}, w, dir / "dim");
    EXPECT_TRUE(wrong_dim[0].failed);
}
