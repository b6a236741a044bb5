#include "support.hpp"
#include "toy_networks.hpp"

#include <gwgen/nn.hpp>

#include <gtest/gtest.h>

#include <fstream>

using namespace gwgen;
using namespace gwgen::nn;
using testing_support::scratch_dir;

namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    EXPECT_EQ(a.size(), b.size());
    double worst = 0;
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

NetworkWeights dense_only(int in, int out) {
    NetworkWeights w;
    w.latent_dim = in;
    w.input_size = 1;
    w.decoder = {toy::dense("fc", in, out), toy::reshape("img", {2, 1, 1})};
    w.decoder[0].weight.assign(static_cast<std::size_t>(in * out), 0.5f);
    w.decoder[0].bias.assign(static_cast<std::size_t>(out), 0.0f);
    return w;
}

} // namespace

TEST(Forward, OneByOneIdentityConv) {
    auto l = toy::conv("id", LayerKind::conv, 3, 3, 1, 1, 0);
    l.weight.assign(9, 0.0f);
    for (int c = 0; c < 3; ++c) l.weight[static_cast<std::size_t>(c * 3 + c)] = 1.0f;
    l.bias.assign(3, 0.0f);
    std::mt19937_64 g(3);
    const auto x = toy::random_input({3, 5, 7}, g);
    const auto y = forward(l, x);
    EXPECT_EQ(y.shape, x.shape);
    EXPECT_EQ(y.data, x.data);
}

TEST(Forward, MatchesOraclePerLayerKind) {
    std::mt19937_64 g(20221);
    for (auto kind : {LayerKind::dense, LayerKind::conv, LayerKind::conv_transpose, LayerKind::activation,
                      LayerKind::reshape}) {
        for (int trial = 0; trial < 50; ++trial) {
            const auto c = toy::random_case(kind, g);
            const auto x = toy::random_input(c.in_shape, g);
            const auto y = forward(c.layer, x);
            EXPECT_EQ(y.shape, output_shape(c.layer, x.shape));
            EXPECT_LT(max_abs_diff(y.data, toy::oracle_apply(c.layer, x)), 1e-6)
                << to_string(kind) << " trial " << trial << " in " << shape_str(c.in_shape);
        }
    }
}

TEST(Forward, ThreeLayerDecoderMatchesOracle) {
    std::mt19937_64 g(7);
    for (int trial = 0; trial < 20; ++trial) {
        const int latent = toy::pick(g, 1, 6), ch = toy::pick(g, 1, 3), hw = toy::pick(g, 2, 4);
        std::vector<Layer> net{toy::dense("fc", latent, ch * hw * hw), toy::reshape("r", {ch, hw, hw}),
                               toy::conv("up", LayerKind::conv_transpose, ch, 2, 3, 2, 1, 1),
                               toy::act("head", Activation::sigmoid)};
        for (auto& l : net) toy::fill(l, g);
        const auto z = toy::random_input({latent}, g);
        EXPECT_LT(max_abs_diff(run(net, z).data, toy::oracle_run(net, z)), 1e-6);
    }
}

TEST(Forward, NonFiniteActivationNamesLayer) {
    auto l = toy::dense("blowup", 1, 1);
    l.weight = {std::numeric_limits<float>::max()};
    l.bias = {0.0f};
    try {
        (void)forward(l, Tensor({1}, {std::numeric_limits<double>::max()}));
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("blowup"), std::string::npos);
    }
}

TEST(Weights, RoundTripIsBitExact) {
    const auto w = toy::vae(5, 16, 99);
    const auto dir = scratch_dir("wgt");
    save_weights(w, dir / "toy.wgt");
    const auto back = load_weights(dir / "toy.wgt");
    ASSERT_EQ(back.encoder.size(), w.encoder.size());
    ASSERT_EQ(back.decoder.size(), w.decoder.size());
    for (std::size_t i = 0; i < w.decoder.size(); ++i) {
        ASSERT_EQ(back.decoder[i].weight.size(), w.decoder[i].weight.size());
        EXPECT_EQ(std::memcmp(back.decoder[i].weight.data(), w.decoder[i].weight.data(), w.decoder[i].weight.size() * 4), 0);
        EXPECT_EQ(std::memcmp(back.decoder[i].bias.data(), w.decoder[i].bias.data(), w.decoder[i].bias.size() * 4), 0);
    }
    EXPECT_EQ(serialize_weights(back), serialize_weights(w));
}

TEST(Weights, ContainerLayout) {
    const auto bytes = serialize_weights(toy::vae(5, 8, 1));
    EXPECT_EQ(bytes.substr(0, 4), "WGT1");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    EXPECT_EQ(nn::detail::read_u32(p + 4), 1u);
    const auto hlen = nn::detail::read_u32(p + 8);
    const auto header = nlohmann::json::parse(bytes.substr(12, hlen));
    EXPECT_EQ(header.at("latent_dim"), 5);
    EXPECT_EQ(header.at("input_size"), 8);
    std::size_t floats = 0;
    const auto w = toy::vae(5, 8, 1);
    for (const auto* s : {&w.encoder, &w.decoder})
        for (const auto& l : *s) floats += l.weight_count() + l.bias_count();
    EXPECT_EQ(bytes.size(), 12 + hlen + 4 * floats);
}

TEST(Weights, BadMagicAndVersion) {
    auto bytes = serialize_weights(toy::vae(5, 8, 1));
    auto bad = bytes;
    bad.replace(0, 4, "XXXX");
    EXPECT_THROW(parse_weights(bad), FormatError);
    bad = bytes;
    bad[4] = 2;
    EXPECT_THROW(parse_weights(bad), FormatError);
    EXPECT_THROW(parse_weights("WGT"), FormatError);
}

TEST(Weights, ShortPayloadIsALengthError) {
    const auto w = dense_only(5, 2);
    auto bytes = serialize_weights(w);
    // A 5 -> 10 dense layer needs 50 weights; the file carries only 49 floats.
    auto h = header_json(w);
    h["decoder"][0]["out_features"] = 10;
    h["decoder"][1]["shape"] = {2, 5, 1};
    const std::string header = h.dump();
    std::string out = "WGT1";
    nn::detail::put_u32(out, 1);
    nn::detail::put_u32(out, static_cast<std::uint32_t>(header.size()));
    out += header;
    for (int i = 0; i < 49; ++i) nn::detail::put_u32(out, std::bit_cast<std::uint32_t>(0.25f));
    try {
        (void)parse_weights(out);
        FAIL() << "expected LengthError";
    } catch (const LengthError& e) {
        EXPECT_NE(std::string(e.what()).find("fc"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse_weights(bytes + "x"), LengthError);
    EXPECT_THROW(parse_weights(bytes.substr(0, bytes.size() - 4)), LengthError);
}

TEST(Weights, CompositionErrorNamesLayerPair) {
    auto w = toy::vae(5, 8, 1);
    w.decoder[2].target = {2, 4, 2}; // 16 values, but the next layer expects 4 channels
    try {
        w.validate();
        FAIL() << "expected CompositionError";
    } catch (const CompositionError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("dec.unflatten"), std::string::npos) << msg;
        EXPECT_NE(msg.find("dec.deconv0"), std::string::npos) << msg;
    }
    EXPECT_THROW(parse_weights(serialize_weights(w)), CompositionError);
}

TEST(Weights, MissingFileIsAnIoError) { EXPECT_THROW(load_weights("/nonexistent/x.wgt"), IoError); }

TEST(Decode, OutputsAreProbabilities) {
    const auto w = toy::vae(5, 16, 42);
    std::mt19937_64 g(5);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int i = 0; i < 1000; ++i) {
        std::vector<double> z(5);
        for (auto& v : z) v = u(g);
        const auto img = decode(z, w);
        ASSERT_EQ(img.shape, (std::vector<int>{2, 16, 16}));
        for (double v : img.data) {
            ASSERT_GE(v, 0.0);
            ASSERT_LE(v, 1.0);
        }
    }
    EXPECT_THROW(decode({1, 2}, w), InvalidInput);
    EXPECT_THROW(decode({1, 2, 3, 4, std::nan("")}, w), InvalidInput);
}

TEST(Decode, MatchesOracleOnToyVae) {
    const auto w = toy::vae(5, 8, 4);
    std::mt19937_64 g(8);
    for (int i = 0; i < 20; ++i) {
        const auto z = toy::random_input({5}, g);
        EXPECT_LT(max_abs_diff(decode(z.data, w).data, toy::oracle_run(w.decoder, z)), 1e-6);
    }
}

TEST(Encode, SigmaPositiveAndMatchesOracle) {
    const auto w = toy::vae(5, 8, 4);
    std::mt19937_64 g(9);
    for (int i = 0; i < 20; ++i) {
        const auto img = toy::random_input({2, 8, 8}, g);
        const auto post = encode(img, w);
        ASSERT_EQ(post.mu.size(), 5u);
        for (double s : post.sigma) EXPECT_GT(s, 0.0);
        const auto ref = toy::oracle_run(w.encoder, img);
        for (std::size_t k = 0; k < 5; ++k) {
            EXPECT_NEAR(post.mu[k], ref[k], 1e-6);
            EXPECT_NEAR(post.sigma[k], std::exp(0.5 * ref[5 + k]), 1e-6);
        }
    }
    EXPECT_THROW(encode(Tensor({2, 4, 4}), w), InvalidInput);
}
