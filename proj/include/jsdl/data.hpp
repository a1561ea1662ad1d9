#pragma once

/*
 * Datasets, the planted-model synthetic generator, the reconstructive
 * residual baseline, and evaluation.
 */

#include <cstdint>
#include <string>
#include <vector>

#include "jsdl/encode.hpp"
#include "jsdl/train.hpp"
#include "jsdl/types.hpp"

namespace jsdl {

enum class Split : std::uint32_t { Train = 0, Val = 1, Test = 2 };

struct Dataset {
    std::vector<std::string> modality_names;
    std::vector<Mat> features;  // n^s x N
    std::vector<int> labels;    // 1-based, length N
    std::vector<Split> split;   // length N
    int classes = 0;

    Index size() const { return features.empty() ? 0 : features.front().cols(); }
    int modalities() const { return static_cast<int>(features.size()); }

    SampleSet subset(Split which) const;
    void validate() const;  // shapes, label range, per-sample normalization
};

struct SynthSpec {
    int classes = 10;
    int modalities = 3;
    std::vector<int> dims;      // n^s, one per modality
    int atoms_per_class = 3;    // planted atoms
    int train_per_class = 40;
    int test_per_class = 20;
    double noise = 0.3;
    bool correlated = false;    // duplicate one modality's coefficients across all

    void validate() const;  // throws InvalidSpec
};

struct SynthResult {
    Dataset data;
    MultimodalDictionary true_dict;  // kept for diagnostics
    std::vector<int> atom_class;     // 1-based class of every planted atom
};

// Planted per-class multimodal dictionaries, row-sparse codes shared
// across modalities, additive Gaussian noise, then per-sample
// normalization. Deterministic for a fixed seed.
SynthResult generate_synthetic(const SynthSpec& spec, std::uint64_t seed);

// Class-partitioned dictionary for the reconstructive baseline.
struct ClassDictionary {
    MultimodalDictionary dict;
    std::vector<int> atom_class;  // 1-based, length d
};

// atoms drawn from raw training samples of each class
ClassDictionary baseline_from_samples(const SampleSet& train, int atoms_per_class, int classes,
                                      std::uint64_t seed);

// per-class unsupervised dictionaries, stacked
ClassDictionary baseline_from_unsupervised(const SampleSet& train, int atoms_per_class,
                                           int classes, const Hyperparams& hp, Prior prior,
                                           const FitOptions& opts = {});

// Joint encode against the full dictionary (row-group prior, no ridge),
// then pick the class whose atoms reconstruct best; ties toward the
// smaller class.
int residual_classify(const std::vector<Vec>& x, const ClassDictionary& cd, double lambda1,
                      const EncodeOptions& opts = {});

struct Metrics {
    double accuracy = 0.0;
    Eigen::MatrixXi confusion;  // rows true class, columns predicted

    std::string to_string() const;
    std::string to_csv() const;
};

Metrics evaluate(const MultimodalDictionary& dict, const ClassifierBank& bank,
                 const PriorSpec& prior, const SampleSet& test, const EncodeOptions& opts = {},
                 bool parallel = true);

Metrics evaluate_baseline(const ClassDictionary& cd, double lambda1, const SampleSet& test,
                          int classes, const EncodeOptions& opts = {}, bool parallel = true);

Metrics metrics_from_predictions(const std::vector<int>& predicted, const std::vector<int>& truth,
                                 int classes);

}  // namespace jsdl
