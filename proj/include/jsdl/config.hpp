#pragma once

/*
 * Experiment configuration: plain-text key=value with [section] headers.
 * Unknown sections or keys are rejected. See README for the schema.
 */

#include <filesystem>
#include <optional>
#include <string>

#include "jsdl/data.hpp"
#include "jsdl/types.hpp"

namespace jsdl {

struct ExperimentConfig {
    std::optional<std::string> dataset_path;  // [data] path=...
    std::optional<SynthSpec> synth;           // or a [synth] block
    std::uint64_t synth_seed = 0;
    Head head = Head::Quadratic;
    Prior prior = Prior::L12;
    int atoms_per_class = 3;
    Hyperparams hp;
    std::string output_dir;

    void validate() const;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& file);

}  // namespace jsdl
