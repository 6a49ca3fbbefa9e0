#pragma once

// Flat checkpoint container.
//
//   bytes 0..7   magic "MDMTCKP1"
//   bytes 8..15  header length H, unsigned 64-bit little endian
//   next H bytes UTF-8 JSON header:
//                {"seed": u64, "precision": "float32"|"float64",
//                 "config": {d, hidden, latent, classifier_depth, domains,
//                            bn_momentum, bn_eps},
//                 "metadata": {...free-form...},
//                 "arrays": [{"name": str, "shape": [rows, cols]}, ...]}
//   remainder    every array in header order, row-major IEEE-754 float64,
//                little endian
//
// Array names are the dotted parameter paths produced by the params' zip(),
// e.g. "vae0.encoder.hidden1.weight"; running batch-norm statistics are under
// "stats.vae0.encoder.norm1.running_mean" and so on.

#include "mdmt/network.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace mdmt {

struct NamedArray {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major
};

struct Checkpoint {
    ModelConfig config;
    std::uint64_t seed = 0;
    std::string precision = "float64";
    std::string metadata_json = "{}";
    std::vector<NamedArray> arrays;

    const NamedArray& find(const std::string& name) const;
};

template <typename T>
Checkpoint to_checkpoint(const ModelState<T>& model);

/// Rebuilds a model in any precision; array names and shapes must match the config.
template <typename T>
ModelState<T> from_checkpoint(const Checkpoint& ckpt);

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

} // namespace mdmt
