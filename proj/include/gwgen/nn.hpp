#pragma once

// Inference engine for the dual-channel VAE: WGT1 weight container and
// forward passes of the encoder and decoder. Tensors follow the PyTorch
// layouts (dense [out, in], conv [out, in, k, k], transposed conv
// [in, out, k, k]); convolution is cross-correlation with zero padding.

#include <gwgen/error.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace gwgen::nn {

inline constexpr std::uint32_t kWgtVersion = 1;

/// Dense activation: either a flat vector [n] or a feature map [c, h, w].
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(numel(shape), 0.0) {}
    Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != numel(shape)) throw InvalidInput("tensor data does not match its shape");
    }

    static std::size_t numel(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) n *= static_cast<std::size_t>(d);
        return n;
    }
    std::size_t size() const { return data.size(); }
    double& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x]; }
    double at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x]; }
};

inline std::string shape_str(const std::vector<int>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
    return out + "]";
}

enum class LayerKind { dense, conv, conv_transpose, activation, reshape };
enum class Activation { relu, sigmoid };

struct Layer {
    std::string name;
    LayerKind kind = LayerKind::dense;
    // dense
    int in_features = 0, out_features = 0;
    // conv / conv_transpose
    int in_channels = 0, out_channels = 0, kernel = 1, stride = 1, padding = 0, output_padding = 0;
    // activation
    Activation fn = Activation::relu;
    // reshape target
    std::vector<int> target;

    std::vector<float> weight, bias; // accumulated in double at use

    std::size_t weight_count() const {
        switch (kind) {
        case LayerKind::dense: return static_cast<std::size_t>(out_features) * in_features;
        case LayerKind::conv:
        case LayerKind::conv_transpose:
            return static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel;
        default: return 0;
        }
    }
    std::size_t bias_count() const {
        switch (kind) {
        case LayerKind::dense: return static_cast<std::size_t>(out_features);
        case LayerKind::conv:
        case LayerKind::conv_transpose: return static_cast<std::size_t>(out_channels);
        default: return 0;
        }
    }
};

inline std::string_view to_string(LayerKind k) {
    switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv: return "conv";
    case LayerKind::conv_transpose: return "conv_transpose";
    case LayerKind::activation: return "activation";
    case LayerKind::reshape: return "reshape";
    }
    return "?";
}

/// Output shape of `l` applied to `in`; CompositionError when they do not fit.
inline std::vector<int> output_shape(const Layer& l, const std::vector<int>& in) {
    auto fail = [&](const std::string& why) {
        throw CompositionError("layer '" + l.name + "' (" + std::string(to_string(l.kind)) + ") cannot take input " +
                               shape_str(in) + ": " + why);
    };
    switch (l.kind) {
    case LayerKind::dense:
        if (in.size() != 1 || in[0] != l.in_features) fail("expects [" + std::to_string(l.in_features) + "]");
        return {l.out_features};
    case LayerKind::conv: {
        if (in.size() != 3 || in[0] != l.in_channels) fail("expects " + std::to_string(l.in_channels) + " channels");
        const int h = (in[1] + 2 * l.padding - l.kernel) / l.stride + 1;
        const int w = (in[2] + 2 * l.padding - l.kernel) / l.stride + 1;
        if (in[1] + 2 * l.padding < l.kernel || in[2] + 2 * l.padding < l.kernel) fail("kernel exceeds padded input");
        return {l.out_channels, h, w};
    }
    case LayerKind::conv_transpose: {
        if (in.size() != 3 || in[0] != l.in_channels) fail("expects " + std::to_string(l.in_channels) + " channels");
        const int h = (in[1] - 1) * l.stride - 2 * l.padding + l.kernel + l.output_padding;
        const int w = (in[2] - 1) * l.stride - 2 * l.padding + l.kernel + l.output_padding;
        if (h <= 0 || w <= 0) fail("empty output");
        return {l.out_channels, h, w};
    }
    case LayerKind::activation: return in;
    case LayerKind::reshape:
        if (Tensor::numel(l.target) != Tensor::numel(in)) fail("cannot reshape to " + shape_str(l.target));
        return l.target;
    }
    return in;
}

namespace detail {

inline void check_layer(const Layer& l) {
    auto bad = [&](const std::string& why) { throw FormatError("layer '" + l.name + "': " + why); };
    switch (l.kind) {
    case LayerKind::dense:
        if (l.in_features <= 0 || l.out_features <= 0) bad("dense sizes must be positive");
        break;
    case LayerKind::conv:
    case LayerKind::conv_transpose:
        if (l.in_channels <= 0 || l.out_channels <= 0 || l.kernel <= 0) bad("channel counts and kernel must be positive");
        if (l.stride != 1 && l.stride != 2) bad("stride must be 1 or 2");
        if (l.padding < 0 || l.output_padding < 0) bad("padding must be non-negative");
        if (l.kind == LayerKind::conv && l.output_padding != 0) bad("output_padding applies to conv_transpose only");
        if (l.output_padding >= l.stride && l.output_padding > 0) bad("output_padding must be smaller than stride");
        break;
    case LayerKind::reshape:
        if (l.target.empty() || l.target.size() > 3 || l.target.size() == 2) bad("reshape target must be [n] or [c, h, w]");
        for (int d : l.target)
            if (d <= 0) bad("reshape dimensions must be positive");
        break;
    case LayerKind::activation: break;
    }
}

inline Layer layer_from_json(const nlohmann::json& j) {
    Layer l;
    try {
        l.name = j.value("name", std::string{});
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "dense") {
            l.kind = LayerKind::dense;
            l.in_features = j.at("in_features").get<int>();
            l.out_features = j.at("out_features").get<int>();
        } else if (kind == "conv" || kind == "conv_transpose") {
            l.kind = kind == "conv" ? LayerKind::conv : LayerKind::conv_transpose;
            l.in_channels = j.at("in_channels").get<int>();
            l.out_channels = j.at("out_channels").get<int>();
            l.kernel = j.at("kernel").get<int>();
            l.stride = j.value("stride", 1);
            l.padding = j.value("padding", 0);
            l.output_padding = j.value("output_padding", 0);
        } else if (kind == "activation") {
            l.kind = LayerKind::activation;
            const auto fn = j.at("function").get<std::string>();
            if (fn == "relu") l.fn = Activation::relu;
            else if (fn == "sigmoid") l.fn = Activation::sigmoid;
            else throw FormatError("layer '" + l.name + "': unsupported activation '" + fn + "'");
        } else if (kind == "reshape") {
            l.kind = LayerKind::reshape;
            l.target = j.at("shape").get<std::vector<int>>();
        } else {
            throw FormatError("layer '" + l.name + "': unsupported kind '" + kind + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("layer '" + l.name + "': " + e.what());
    }
    check_layer(l);
    return l;
}

inline nlohmann::json layer_to_json(const Layer& l) {
    nlohmann::json j{{"name", l.name}, {"kind", std::string(to_string(l.kind))}};
    switch (l.kind) {
    case LayerKind::dense:
        j["in_features"] = l.in_features;
        j["out_features"] = l.out_features;
        break;
    case LayerKind::conv:
    case LayerKind::conv_transpose:
        j["in_channels"] = l.in_channels;
        j["out_channels"] = l.out_channels;
        j["kernel"] = l.kernel;
        j["stride"] = l.stride;
        j["padding"] = l.padding;
        if (l.kind == LayerKind::conv_transpose) j["output_padding"] = l.output_padding;
        break;
    case LayerKind::activation: j["function"] = l.fn == Activation::relu ? "relu" : "sigmoid"; break;
    case LayerKind::reshape: j["shape"] = l.target; break;
    }
    return j;
}

inline std::uint32_t read_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::vector<int> compose(const std::vector<Layer>& layers, std::vector<int> shape, const char* stack) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        try {
            shape = output_shape(layers[i], shape);
        } catch (const CompositionError& e) {
            const std::string prev = i ? "'" + layers[i - 1].name + "'" : std::string("the ") + stack + " input";
            throw CompositionError(std::string(stack) + ": " + prev + " -> '" + layers[i].name + "': " + e.what());
        }
    }
    return shape;
}

} // namespace detail

struct NetworkWeights {
    int latent_dim = 0;
    int input_channels = 2;
    int input_size = 0;
    std::vector<Layer> encoder; // image -> [2 * latent_dim] (mu then log-variance)
    std::vector<Layer> decoder; // [latent_dim] -> [input_channels, input_size, input_size]

    /// Checks that both stacks compose end to end with the header shapes.
    void validate() const {
        if (latent_dim <= 0 || input_size <= 0) throw FormatError("header needs positive latent_dim and input_size");
        if (input_channels != 2) throw FormatError("input_channels must be 2 (A0 and S0)");
        const std::vector<int> image{input_channels, input_size, input_size};
        if (!encoder.empty()) {
            const auto out = detail::compose(encoder, image, "encoder");
            if (out != std::vector<int>{2 * latent_dim}) {
                throw CompositionError("encoder ends in " + shape_str(out) + ", expected [" +
                                       std::to_string(2 * latent_dim) + "] (mu and log-variance)");
            }
        }
        if (decoder.empty()) throw FormatError("weight file has no decoder");
        const auto out = detail::compose(decoder, {latent_dim}, "decoder");
        if (out != image) throw CompositionError("decoder ends in " + shape_str(out) + ", expected " + shape_str(image));
    }
};

inline nlohmann::json header_json(const NetworkWeights& w) {
    nlohmann::json enc = nlohmann::json::array(), dec = nlohmann::json::array();
    for (const auto& l : w.encoder) enc.push_back(detail::layer_to_json(l));
    for (const auto& l : w.decoder) dec.push_back(detail::layer_to_json(l));
    return {{"latent_dim", w.latent_dim},
            {"input_channels", w.input_channels},
            {"input_size", w.input_size},
            {"encoder", enc},
            {"decoder", dec}};
}

/// Serializes to the WGT1 byte layout.
inline std::string serialize_weights(const NetworkWeights& w) {
    const std::string header = header_json(w).dump();
    std::string out = "WGT1";
    detail::put_u32(out, kWgtVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(header.size()));
    out += header;
    auto put = [&](const std::vector<float>& v, std::size_t expect, const Layer& l) {
        if (v.size() != expect) throw LengthError("layer '" + l.name + "' holds " + std::to_string(v.size()) +
                                                  " values, descriptor needs " + std::to_string(expect));
        for (float f : v) detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
    };
    for (const auto* stack : {&w.encoder, &w.decoder}) {
        for (const auto& l : *stack) {
            put(l.weight, l.weight_count(), l);
            put(l.bias, l.bias_count(), l);
        }
    }
    return out;
}

inline NetworkWeights parse_weights(const std::string& bytes) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 12 || bytes.compare(0, 4, "WGT1") != 0) throw FormatError("not a WGT1 file (bad magic)");
    const std::uint32_t version = detail::read_u32(p + 4);
    if (version != kWgtVersion) throw FormatError("unsupported WGT1 version " + std::to_string(version));
    const std::uint32_t hlen = detail::read_u32(p + 8);
    if (bytes.size() - 12 < hlen) throw LengthError("WGT1 header truncated");
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(bytes.substr(12, hlen));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("WGT1 header: ") + e.what());
    }
    NetworkWeights w;
    try {
        w.latent_dim = h.at("latent_dim").get<int>();
        w.input_channels = h.at("input_channels").get<int>();
        w.input_size = h.at("input_size").get<int>();
        for (const auto& l : h.value("encoder", nlohmann::json::array())) w.encoder.push_back(detail::layer_from_json(l));
        for (const auto& l : h.at("decoder")) w.decoder.push_back(detail::layer_from_json(l));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("WGT1 header: ") + e.what());
    }

    std::size_t pos = 12 + hlen;
    auto take = [&](std::vector<float>& v, std::size_t n, const Layer& l, const char* what) {
        if ((bytes.size() - pos) / 4 < n) {
            throw LengthError("layer '" + l.name + "' " + what + ": needs " + std::to_string(n) + " floats, " +
                              std::to_string((bytes.size() - pos) / 4) + " remain");
        }
        v.resize(n);
        for (std::size_t i = 0; i < n; ++i, pos += 4) v[i] = std::bit_cast<float>(detail::read_u32(p + pos));
    };
    for (auto* stack : {&w.encoder, &w.decoder}) {
        for (auto& l : *stack) {
            take(l.weight, l.weight_count(), l, "weight");
            take(l.bias, l.bias_count(), l, "bias");
        }
    }
    if (pos != bytes.size()) {
        throw LengthError("WGT1 payload has " + std::to_string(bytes.size() - pos) + " bytes beyond the declared tensors");
    }
    w.validate();
    return w;
}

inline NetworkWeights load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_weights(ss.str());
}

inline void save_weights(const NetworkWeights& w, const std::filesystem::path& path) {
    const auto bytes = serialize_weights(w);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

/// One layer applied to `x`. The input shape must already be compatible.
inline Tensor forward(const Layer& l, const Tensor& x) {
    if (l.weight.size() != l.weight_count() || l.bias.size() != l.bias_count()) {
        throw LengthError("layer '" + l.name + "' tensors do not match its descriptor");
    }
    Tensor y(output_shape(l, x.shape));
    switch (l.kind) {
    case LayerKind::dense:
        for (int o = 0; o < l.out_features; ++o) {
            double acc = l.bias[o];
            const float* wr = &l.weight[static_cast<std::size_t>(o) * l.in_features];
            for (int i = 0; i < l.in_features; ++i) acc += double(wr[i]) * x.data[i];
            y.data[o] = acc;
        }
        break;
    case LayerKind::conv: {
        const int H = x.shape[1], W = x.shape[2], k = l.kernel;
        for (int o = 0; o < l.out_channels; ++o) {
            for (int oy = 0; oy < y.shape[1]; ++oy) {
                for (int ox = 0; ox < y.shape[2]; ++ox) {
                    double acc = l.bias[o];
                    for (int c = 0; c < l.in_channels; ++c) {
                        const float* wk = &l.weight[((static_cast<std::size_t>(o) * l.in_channels + c) * k) * k];
                        for (int ky = 0; ky < k; ++ky) {
                            const int iy = oy * l.stride - l.padding + ky;
                            if (iy < 0 || iy >= H) continue;
                            for (int kx = 0; kx < k; ++kx) {
                                const int ix = ox * l.stride - l.padding + kx;
                                if (ix < 0 || ix >= W) continue;
                                acc += double(wk[ky * k + kx]) * x.at(c, iy, ix);
                            }
                        }
                    }
                    y.at(o, oy, ox) = acc;
                }
            }
        }
        break;
    }
    case LayerKind::conv_transpose: {
        // Gather form: output (oy, ox) collects input (iy, ix) where
        // oy = iy * stride - padding + ky.
        const int H = x.shape[1], W = x.shape[2], k = l.kernel, s = l.stride;
        for (int o = 0; o < l.out_channels; ++o) {
            for (int oy = 0; oy < y.shape[1]; ++oy) {
                for (int ox = 0; ox < y.shape[2]; ++ox) {
                    double acc = l.bias[o];
                    for (int ky = 0; ky < k; ++ky) {
                        const int ty = oy + l.padding - ky;
                        if (ty < 0 || ty % s) continue;
                        const int iy = ty / s;
                        if (iy >= H) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int tx = ox + l.padding - kx;
                            if (tx < 0 || tx % s) continue;
                            const int ix = tx / s;
                            if (ix >= W) continue;
                            for (int c = 0; c < l.in_channels; ++c) {
                                acc += double(l.weight[((static_cast<std::size_t>(c) * l.out_channels + o) * k + ky) * k + kx]) *
                                       x.at(c, iy, ix);
                            }
                        }
                    }
                    y.at(o, oy, ox) = acc;
                }
            }
        }
        break;
    }
    case LayerKind::activation:
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double v = x.data[i];
            y.data[i] = l.fn == Activation::relu ? std::max(v, 0.0) : 1.0 / (1.0 + std::exp(-v));
        }
        break;
    case LayerKind::reshape: y.data = x.data; break;
    }
    for (double v : y.data) {
        if (!std::isfinite(v)) throw NumericError("non-finite activation in layer '" + l.name + "'");
    }
    return y;
}

inline Tensor run(const std::vector<Layer>& layers, Tensor x) {
    for (const auto& l : layers) x = forward(l, x);
    return x;
}

/// Two-channel decoder output, channel 0 = A0, channel 1 = S0.
using ImagePair = Tensor;

inline ImagePair decode(const std::vector<double>& z, const NetworkWeights& w) {
    if (static_cast<int>(z.size()) != w.latent_dim) {
        throw InvalidInput("latent point has " + std::to_string(z.size()) + " coordinates, weights expect " +
                           std::to_string(w.latent_dim));
    }
    for (double v : z)
        if (!std::isfinite(v)) throw InvalidInput("latent point is not finite");
    return run(w.decoder, Tensor({w.latent_dim}, z));
}

struct GaussianPosterior {
    std::vector<double> mu, sigma, logvar;
};

inline GaussianPosterior encode(const ImagePair& img, const NetworkWeights& w) {
    if (w.encoder.empty()) throw InvalidInput("weight file carries no encoder");
    const std::vector<int> expect{w.input_channels, w.input_size, w.input_size};
    if (img.shape != expect) throw InvalidInput("image " + shape_str(img.shape) + " does not match " + shape_str(expect));
    const auto out = run(w.encoder, img);
    GaussianPosterior g;
    const auto L = static_cast<std::size_t>(w.latent_dim);
    g.mu.assign(out.data.begin(), out.data.begin() + static_cast<std::ptrdiff_t>(L));
    g.logvar.assign(out.data.begin() + static_cast<std::ptrdiff_t>(L), out.data.end());
    for (double lv : g.logvar) {
        const double s = std::exp(0.5 * lv);
        if (!(s > 0.0) || !std::isfinite(s)) throw NumericError("posterior sigma underflows or overflows");
        g.sigma.push_back(s);
    }
    return g;
}

} // namespace gwgen::nn
