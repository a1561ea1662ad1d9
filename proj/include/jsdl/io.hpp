#pragma once

/*
 * On-disk formats.
 *
 * Matrix file: 16-byte header — magic "JSDL", u32 rows, u32 cols,
 * u32 reserved (zero) — followed by rows*cols float64 values, row-major,
 * little-endian throughout.
 *
 * Dataset directory: manifest.txt (key=value), one matrix file per
 * modality (features.<s>.bin), labels.bin (u32 per sample, 1-based) and
 * splits.bin (u32 per sample: 0 train, 1 val, 2 test).
 *
 * Model directory: manifest.txt plus dict.<s>.bin and weights.<s>.bin in
 * the same matrix format. Writers are deterministic byte-for-byte.
 */

#include <filesystem>

#include "jsdl/data.hpp"
#include "jsdl/types.hpp"

namespace jsdl {

void save_matrix(const std::filesystem::path& file, const Mat& m);
Mat load_matrix(const std::filesystem::path& file);

void save_u32(const std::filesystem::path& file, const std::vector<std::uint32_t>& values);
std::vector<std::uint32_t> load_u32(const std::filesystem::path& file, std::size_t count);

void save_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

struct Model {
    MultimodalDictionary dict;
    ClassifierBank bank;
    Prior prior = Prior::L12;
    Hyperparams hp;  // encode settings needed at evaluation time
};

void save_model(const Model& model, const std::filesystem::path& dir);
Model load_model(const std::filesystem::path& dir);

// Codes directory written by the encode command: manifest plus codes.bin,
// a (d*S) x N matrix whose column i stacks sample i's codes column by
// column (alpha^1 first).
void save_codes(const std::vector<Mat>& codes, const std::filesystem::path& dir);

}  // namespace jsdl
