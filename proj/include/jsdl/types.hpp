#pragma once

/*
 * Core value types for multimodal sparse coding: samples, dictionaries,
 * classifier banks, hyperparameters. Everything here is a plain value;
 * once constructed, instances are safe to share read-only across threads.
 */

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "jsdl/errors.hpp"

namespace jsdl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

enum class Head { Logistic, Softmax, Quadratic };
enum class Prior { L12, L11, Mixed };

std::string to_string(Head head);
std::string to_string(Prior prior);
Head head_from_string(const std::string& name);
Prior prior_from_string(const std::string& name);

// One observation: a feature vector per modality, optionally labeled.
// Labels are 1-based class indices; the binary logistic head identifies
// class 1 with +1 and class 2 with -1.
struct MultimodalSample {
    std::vector<Vec> features;
    std::optional<int> label;

    int modalities() const { return static_cast<int>(features.size()); }
};

// One dictionary per modality. All D^s share the atom count d and every
// atom lives in the closed unit l2 ball.
struct MultimodalDictionary {
    std::vector<Mat> dicts;  // n^s x d

    int modalities() const { return static_cast<int>(dicts.size()); }
    Index atoms() const { return dicts.empty() ? 0 : dicts.front().cols(); }
    Index feature_dim(int s) const { return dicts[static_cast<std::size_t>(s)].rows(); }
};

// Codes for one sample form a d x S matrix: column s is the code of
// modality s, row j the cross-modality coefficients of atom j.
using CodeMatrix = Mat;

// Per-modality linear classifiers sharing one loss head. Weight matrices
// are K x d, or 1 x d for the binary logistic head.
struct ClassifierBank {
    std::vector<Mat> weights;
    Head head = Head::Quadratic;
    double nu = 1e-8;

    int modalities() const { return static_cast<int>(weights.size()); }
    Index classes() const { return weights.empty() ? 0 : weights.front().rows(); }
    Index atoms() const { return weights.empty() ? 0 : weights.front().cols(); }
};

struct Hyperparams {
    double lambda1 = 0.01;   // row-group penalty
    double lambda1p = 0.0;   // entrywise l1 penalty
    double lambda2 = 0.0;    // Frobenius ridge
    double nu = 1e-8;        // classifier ridge
    double rho = 0.1;        // base SGD step
    long t0 = 0;             // annealing knee in steps; 0 = (epochs/10) * steps_per_epoch
    int epochs = 20;
    int batch_size = 100;
    double active_tol = 1e-6;
    double admm_tol = 1e-8;
    int admm_max_iter = 2000;
    std::uint64_t seed = 0;

    void validate(Prior prior) const;  // throws ValidationError
};

// Center to zero mean, then scale to unit l2 norm. Throws ConstantVector
// when the centered vector has norm below 1e-12.
Vec normalize_sample(const Vec& x);

struct DictionaryReport {
    struct Issue {
        int modality = 0;   // 1-based
        Index atom = -1;    // 0-based column, -1 for shape issues
        double value = 0.0;
        std::string what;
    };
    std::vector<Issue> issues;

    bool ok() const { return issues.empty(); }
    std::string to_string() const;
};

// Pure report: atoms with l2 norm > 1 + 1e-12 and inconsistent shapes.
DictionaryReport validate_dictionary(const MultimodalDictionary& dict);

// Column-per-sample storage used by training and evaluation.
struct SampleSet {
    std::vector<Mat> features;  // per modality, n^s x N
    std::vector<int> labels;    // 1-based; empty when unlabeled

    Index size() const { return features.empty() ? 0 : features.front().cols(); }
    int modalities() const { return static_cast<int>(features.size()); }

    std::vector<Vec> features_of(Index i) const {
        std::vector<Vec> out;
        out.reserve(features.size());
        for (const Mat& f : features) out.push_back(f.col(i));
        return out;
    }
};

}  // namespace jsdl
