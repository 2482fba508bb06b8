#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "gcad/core.hpp"
#include "gcad/dataset_io.hpp"
#include "gcad/encoder.hpp"

namespace gcad {

namespace detail {

inline void write_u32_le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = (v >> (8 * i)) & 0xff;
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32_le(std::istream& is, const std::string& what) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw ParseError(concat(what, ": truncated"));
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
    return v;
}

}  // namespace detail

constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary model checkpoint: magic "GCAD", version, config block, then each
/// tensor as (name length, name, rows, cols, little-endian doubles).
inline void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(detail::concat("cannot write checkpoint ", path.string()));
    os.write("GCAD", 4);
    detail::write_u32_le(os, kCheckpointVersion);

    const ModelConfig& c = params.config;
    detail::write_u32_le(os, std::uint32_t(c.num_layers));
    detail::write_u32_le(os, std::uint32_t(c.input_dim));
    detail::write_u32_le(os, std::uint32_t(c.hidden_dims.size()));
    for (int d : c.hidden_dims) detail::write_u32_le(os, std::uint32_t(d));
    os.put(char(c.aggregator));
    detail::write_f64_le(os, c.gumbel_temperature);
    os.put(c.keep_self_loops_in_readout ? 1 : 0);
    os.put(char(c.edge_mode));
    os.put(char(c.readout));

    auto named = params.named_tensors();
    detail::write_u32_le(os, std::uint32_t(named.size()));
    for (const auto& [name, t] : named) {
        detail::write_u32_le(os, std::uint32_t(name.size()));
        os.write(name.data(), std::streamsize(name.size()));
        detail::write_u64_le(os, t->rows());
        detail::write_u64_le(os, t->cols());
        for (std::size_t i = 0; i < t->size(); ++i) detail::write_f64_le(os, (*t)[i]);
    }
    if (!os) throw Error(detail::concat("failed writing checkpoint ", path.string()));
}

inline ModelParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError(detail::concat("missing checkpoint: ", path.string()));
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "GCAD")
        throw ParseError(detail::concat(path.string(), ": bad magic (not a GCAD checkpoint)"));
    std::uint32_t version = detail::read_u32_le(is, path.string());
    if (version != kCheckpointVersion)
        throw ParseError(detail::concat(path.string(), ": unsupported version ", version));

    ModelConfig c;
    c.num_layers = int(detail::read_u32_le(is, path.string()));
    c.input_dim = int(detail::read_u32_le(is, path.string()));
    std::uint32_t nd = detail::read_u32_le(is, path.string());
    for (std::uint32_t i = 0; i < nd; ++i)
        c.hidden_dims.push_back(int(detail::read_u32_le(is, path.string())));
    c.aggregator = ModelConfig::Aggregator(is.get());
    c.gumbel_temperature = detail::read_f64_le(is, path.string());
    c.keep_self_loops_in_readout = is.get() != 0;
    c.edge_mode = ModelConfig::EdgeMode(is.get());
    c.readout = ModelConfig::Readout(is.get());
    c.validate();

    // Start from a correctly-shaped parameter set, then overwrite, so shape
    // validation against the config is automatic.
    Rng scratch(1);
    ModelParams params = ModelParams::init(c, scratch);
    auto named = params.named_tensors();

    std::uint32_t count = detail::read_u32_le(is, path.string());
    if (count != named.size())
        throw ParseError(detail::concat(path.string(), ": ", count, " tensors, expected ",
                                        named.size()));
    for (std::uint32_t k = 0; k < count; ++k) {
        std::uint32_t len = detail::read_u32_le(is, path.string());
        std::string name(len, '\0');
        is.read(name.data(), len);
        std::uint64_t rows = detail::read_u64_le(is, path.string());
        std::uint64_t cols = detail::read_u64_le(is, path.string());
        if (name != named[k].first)
            throw ParseError(detail::concat(path.string(), ": tensor '", name, "' where '",
                                            named[k].first, "' expected"));
        Tensor* t = named[k].second;
        if (rows != t->rows() || cols != t->cols())
            throw ParseError(detail::concat(path.string(), ": tensor '", name, "' is ", rows, "x",
                                            cols, ", config requires ", t->shape_str()));
        for (std::size_t i = 0; i < t->size(); ++i)
            (*t)[i] = detail::read_f64_le(is, path.string());
    }
    return params;
}

}  // namespace gcad
