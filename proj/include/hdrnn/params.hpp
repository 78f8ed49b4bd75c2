#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "hdrnn/binary_io.hpp"
#include "hdrnn/errors.hpp"
#include "hdrnn/lstm.hpp"
#include "hdrnn/rng.hpp"
#include "hdrnn/tensor.hpp"

namespace hdrnn {

struct LayerDims {
    std::size_t input = 0;
    std::size_t hidden = 0;
    bool operator==(const LayerDims&) const = default;
};

/// All trainable weights of the supervised recurrent autoencoder: the encoder
/// stack, the decoder stack (both in `layers`, encoder first) and the softmax
/// classifier that reads the last encoder layer.
struct ParamSet {
    std::vector<LstmParams> layers;
    std::size_t encoder_depth = 0;
    Tensor2 Wc;             // classes x latent
    std::vector<double> bc; // classes

    std::size_t class_count() const { return Wc.rows; }
    std::size_t latent_size() const { return Wc.cols; }

    std::vector<LayerDims> dims() const {
        std::vector<LayerDims> d;
        for (const auto& l : layers) d.push_back({l.input_size(), l.hidden_size()});
        return d;
    }

    // Every trainable array in serialization order: per layer W, R, b; then Wc, bc.
    std::vector<std::span<double>> arrays() {
        std::vector<std::span<double>> out;
        for (auto& l : layers) {
            out.emplace_back(l.W.data);
            out.emplace_back(l.R.data);
            out.emplace_back(l.b);
        }
        out.emplace_back(Wc.data);
        out.emplace_back(bc);
        return out;
    }

    std::vector<std::span<const double>> arrays() const {
        std::vector<std::span<const double>> out;
        for (const auto& l : layers) {
            out.emplace_back(l.W.data);
            out.emplace_back(l.R.data);
            out.emplace_back(l.b);
        }
        out.emplace_back(Wc.data);
        out.emplace_back(bc);
        return out;
    }

    // Weight matrices only (W, R of every layer and Wc); biases are not regularized.
    std::vector<std::span<const double>> weight_matrices() const {
        std::vector<std::span<const double>> out;
        for (const auto& l : layers) {
            out.emplace_back(l.W.data);
            out.emplace_back(l.R.data);
        }
        out.emplace_back(Wc.data);
        return out;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (auto a : arrays()) n += a.size();
        return n;
    }

    void validate() const {
        if (layers.empty()) throw DimensionError("parameter set has no layers");
        if (encoder_depth == 0 || encoder_depth > layers.size())
            throw DimensionError("encoder depth must be in [1, layer count]");
        for (std::size_t k = 0; k < layers.size(); ++k) {
            layers[k].validate();
            if (k > 0 && layers[k].input_size() != layers[k - 1].hidden_size())
                throw DimensionError("layer " + std::to_string(k) + " input size " +
                                     std::to_string(layers[k].input_size()) + " does not chain with hidden size " +
                                     std::to_string(layers[k - 1].hidden_size()));
        }
        if (Wc.cols != layers[encoder_depth - 1].hidden_size())
            throw DimensionError("classifier input size must equal the final encoder hidden size");
        if (bc.size() != Wc.rows) throw DimensionError("classifier bias length must equal class count");
    }

    bool operator==(const ParamSet&) const = default;
};

inline ParamSet zeros_like(const ParamSet& p) {
    ParamSet z;
    z.encoder_depth = p.encoder_depth;
    for (const auto& l : p.layers) z.layers.emplace_back(l.input_size(), l.hidden_size());
    z.Wc = Tensor2(p.Wc.rows, p.Wc.cols);
    z.bc.assign(p.bc.size(), 0.0);
    return z;
}

inline void check_chain(std::span<const LayerDims> dims) {
    for (std::size_t k = 0; k < dims.size(); ++k) {
        if (dims[k].input == 0 || dims[k].hidden == 0)
            throw DimensionError("layer " + std::to_string(k) + " has a zero dimension");
        if (k > 0 && dims[k].input != dims[k - 1].hidden)
            throw DimensionError("layer " + std::to_string(k) + " input " + std::to_string(dims[k].input) +
                                 " does not match previous hidden " + std::to_string(dims[k - 1].hidden));
    }
}

/// Uniform init in +-sqrt(1/fan_in) where fan_in is the column count of each
/// matrix; biases zero except the forget-gate slice, which starts at 1.
inline ParamSet init_params(std::span<const LayerDims> dims, std::size_t encoder_depth, std::size_t classes,
                            std::uint64_t seed) {
    if (dims.empty()) throw DimensionError("init_params: no layers");
    if (classes < 2) throw DimensionError("init_params: need at least 2 classes");
    if (encoder_depth == 0 || encoder_depth > dims.size())
        throw DimensionError("init_params: encoder depth out of range");
    check_chain(dims);

    Rng rng(seed);
    auto fill = [&rng](Tensor2& m) {
        const double bound = std::sqrt(1.0 / static_cast<double>(m.cols));
        for (double& v : m.data) v = rng.uniform(-bound, bound);
    };

    ParamSet p;
    p.encoder_depth = encoder_depth;
    for (const auto& d : dims) {
        LstmParams l(d.input, d.hidden);
        fill(l.W);
        fill(l.R);
        for (std::size_t j = 0; j < d.hidden; ++j) l.b[kForget * d.hidden + j] = 1.0;
        p.layers.push_back(std::move(l));
    }
    p.Wc = Tensor2(classes, dims[encoder_depth - 1].hidden);
    fill(p.Wc);
    p.bc.assign(classes, 0.0);
    return p;
}

// ---------------------------------------------------------------------------
// Binary container
//
//   "HDRNNPS1"                  8-byte magic
//   u32 version (=1)
//   u32 layer count, u32 encoder depth
//   layer count x (u32 input, u32 hidden)
//   u32 classes, u32 latent
//   per layer: W, R, b as little-endian f64 in gate order [f, i, g, o]
//   Wc (row-major), bc
// ---------------------------------------------------------------------------

inline constexpr std::string_view kParamMagic = "HDRNNPS1";
inline constexpr std::uint32_t kParamVersion = 1;

inline void write_params(std::ostream& os, const ParamSet& p) {
    p.validate();
    os.write(kParamMagic.data(), static_cast<std::streamsize>(kParamMagic.size()));
    binio::write_u32(os, kParamVersion);
    binio::write_u32(os, static_cast<std::uint32_t>(p.layers.size()));
    binio::write_u32(os, static_cast<std::uint32_t>(p.encoder_depth));
    for (const auto& l : p.layers) {
        binio::write_u32(os, static_cast<std::uint32_t>(l.input_size()));
        binio::write_u32(os, static_cast<std::uint32_t>(l.hidden_size()));
    }
    binio::write_u32(os, static_cast<std::uint32_t>(p.Wc.rows));
    binio::write_u32(os, static_cast<std::uint32_t>(p.Wc.cols));
    for (auto a : p.arrays()) binio::write_f64s(os, a);
}

inline ParamSet read_params(std::istream& is) {
    binio::expect_magic(is, kParamMagic);
    const auto version = binio::read_u32(is);
    if (version != kParamVersion) throw FormatError("unsupported parameter container version " + std::to_string(version));
    const auto n_layers = binio::read_u32(is);
    const auto depth = binio::read_u32(is);
    if (n_layers == 0 || n_layers > 64) throw FormatError("implausible layer count");
    std::vector<LayerDims> dims(n_layers);
    for (auto& d : dims) {
        d.input = binio::read_u32(is);
        d.hidden = binio::read_u32(is);
    }
    const auto classes = binio::read_u32(is);
    const auto latent = binio::read_u32(is);

    ParamSet p;
    p.encoder_depth = depth;
    for (const auto& d : dims) p.layers.emplace_back(d.input, d.hidden);
    p.Wc = Tensor2(classes, latent);
    p.bc.assign(classes, 0.0);
    for (auto a : p.arrays()) binio::read_f64s(is, a);
    try {
        p.validate();
    } catch (const DimensionError& e) {
        throw FormatError(std::string("parameter container is inconsistent: ") + e.what());
    }
    return p;
}

inline void save_params(const std::string& path, const ParamSet& p) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot open " + path + " for writing");
    write_params(os, p);
}

inline ParamSet load_params(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot open " + path);
    return read_params(is);
}

} // namespace hdrnn
