#pragma once

/*
 * Training loops: projected stochastic gradient descent for reconstructive
 * (unsupervised) dictionaries and for the task-driven problem where the
 * dictionaries and classifiers are learned jointly through the coding
 * step. Mini-batches are encoded with shared factorizations, per-sample
 * gradients are averaged in fixed order, and every step projects the
 * atoms back onto the unit ball.
 */

#include <functional>
#include <vector>

#include "jsdl/batch.hpp"
#include "jsdl/encode.hpp"
#include "jsdl/rng.hpp"
#include "jsdl/types.hpp"

namespace jsdl {

struct TrainRecord {
    int epoch = 0;
    long step = 0;
    double objective = 0.0;  // mini-batch average of the epoch
    double mean_kkt = 0.0;
    double mean_active = 0.0;
};

struct TrainState {
    MultimodalDictionary dict;
    ClassifierBank bank;
    Prior prior = Prior::L12;
    int epoch = 0;
    long step = 0;
    Rng rng{0};
    double running_objective = 0.0;
    std::vector<TrainRecord> log;
};

struct FitOptions {
    bool parallel = true;
    bool warm_start = true;  // carry per-sample ADMM starts across epochs
    std::function<void(const TrainState&)> on_step;
};

// min(rho, rho * t0 / t): constant for the first t0 steps, then 1/t decay
double learning_rate(long t, double rho, double t0);

// orthogonal projection of every atom onto the unit l2 ball
Mat project_dictionary(Mat D);
MultimodalDictionary project_dictionary(MultimodalDictionary dict);

// identity: the classifier constraint set is the whole space, the nu
// ridge term does the regularizing; kept as a seam
Mat project_classifier(Mat W);

struct UnsupervisedFit {
    MultimodalDictionary dict;
    std::vector<double> cost_per_epoch;  // mean mini-batch coding cost
};

// Projected SGD on the expected coding cost, codes treated as fixed in
// the gradient. `init` seeds the iterate; `rng` drives the shuffles.
UnsupervisedFit unsupervised_fit(const SampleSet& data, const Hyperparams& hp, Prior prior,
                                 MultimodalDictionary init, Rng& rng, const FitOptions& opts = {});

// Convenience overload seeding atoms from hp.seed-selected samples.
UnsupervisedFit unsupervised_fit(const SampleSet& data, const Hyperparams& hp, Prior prior,
                                 Index atoms, const FitOptions& opts = {});

// Convex fit of the classifiers at fixed dictionaries: closed-form ridge
// regression for the quadratic head, gradient descent to gradient
// sup-norm 1e-8 for the logistic and softmax heads.
ClassifierBank fit_classifiers(const SampleSet& data, const MultimodalDictionary& dict, Head head,
                               const PriorSpec& prior, const Hyperparams& hp, Index classes,
                               const FitOptions& opts = {});

// Unsupervised dictionaries seeded from distinct normalized training
// samples, then the convex classifier fit. Throws InsufficientData when
// atoms > sample count.
TrainState init_model(const SampleSet& data, const Hyperparams& hp, Head head, Prior prior,
                      Index classes, Index atoms, const FitOptions& opts = {});

// Task-driven training: per epoch, shuffle, encode each mini-batch,
// average the implicit-differentiation gradients, take a projected step
// on every dictionary and classifier at the annealed rate.
TrainState supervised_fit(const SampleSet& data, const Hyperparams& hp, TrainState state,
                          const FitOptions& opts = {});

// cross-validation grids
std::vector<double> lambda1_grid();
std::vector<double> mixed_prior_grid();

PriorSpec prior_from_hyperparams(Prior prior, const Hyperparams& hp);
EncodeOptions encode_options(const Hyperparams& hp);

}  // namespace jsdl
