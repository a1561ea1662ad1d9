#pragma once

/*
 * Batch kernels over samples. Each kernel runs the same per-sample code
 * either serially or under OpenMP; per-sample work is independent and
 * reductions happen in sample order after the parallel region, so the
 * results are identical for any thread count. The serial path doubles
 * as the reference implementation in tests and in the benchmark.
 */

#include <optional>
#include <vector>

#include "jsdl/encode.hpp"
#include "jsdl/taskgrad.hpp"
#include "jsdl/types.hpp"

namespace jsdl {

// Per-sample ADMM warm starts carried across epochs by the training
// loops. Indexed by sample position in the owning SampleSet.
struct WarmStartCache {
    std::vector<Mat> z;

    void reset(Index n) {
        z.assign(static_cast<std::size_t>(n), Mat());
    }
    bool empty() const { return z.empty(); }
};

std::vector<EncodeResult> batch_encode(const EncoderContext& ctx, const SampleSet& data,
                                       const std::vector<Index>& samples, const PriorSpec& prior,
                                       const EncodeOptions& opts, bool parallel,
                                       WarmStartCache* warm = nullptr);

struct BatchGradients {
    std::vector<Mat> dict;     // averaged over the batch
    std::vector<Mat> weights;  // averaged, includes the nu ridge term
    double mean_loss = 0.0;    // includes nu/2 sum ||W||^2
    double mean_kkt = 0.0;
    double mean_active = 0.0;
    bool all_converged = true;
};

// Encode the batch and average the per-sample task gradients. A
// RankDeficient sensitivity solve is retried once with lambda2 bumped to
// 1e-6 in the system.
BatchGradients batch_task_gradients(const EncoderContext& ctx, const SampleSet& data,
                                    const std::vector<Index>& samples, const ClassifierBank& bank,
                                    const PriorSpec& prior, double active_tol,
                                    const EncodeOptions& opts, bool parallel,
                                    WarmStartCache* warm = nullptr);

}  // namespace jsdl
