#include "jsdl/batch.hpp"

#include <exception>

namespace jsdl {

std::vector<EncodeResult> batch_encode(const EncoderContext& ctx, const SampleSet& data,
                                       const std::vector<Index>& samples, const PriorSpec& prior,
                                       const EncodeOptions& opts, bool parallel,
                                       WarmStartCache* warm) {
    const Index B = static_cast<Index>(samples.size());
    std::vector<EncodeResult> results(static_cast<std::size_t>(B));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(B));

#pragma omp parallel for schedule(dynamic) if (parallel)
    for (Index i = 0; i < B; ++i) {
        try {
            const Index sample = samples[static_cast<std::size_t>(i)];
            EncodeOptions local = opts;
            if (warm && !warm->empty()) {
                const Mat& z = warm->z[static_cast<std::size_t>(sample)];
                if (z.size() == ctx.dict().atoms() * ctx.dict().modalities()) local.warm_z = &z;
            }
            results[static_cast<std::size_t>(i)] =
                joint_encode(ctx, data.features_of(sample), prior, local);
            if (warm && !warm->empty()) {
                warm->z[static_cast<std::size_t>(sample)] = results[static_cast<std::size_t>(i)].codes;
            }
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (const std::exception_ptr& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return results;
}

BatchGradients batch_task_gradients(const EncoderContext& ctx, const SampleSet& data,
                                    const std::vector<Index>& samples, const ClassifierBank& bank,
                                    const PriorSpec& prior, double active_tol,
                                    const EncodeOptions& opts, bool parallel,
                                    WarmStartCache* warm) {
    const Index B = static_cast<Index>(samples.size());
    const MultimodalDictionary& dict = ctx.dict();

    struct Slot {
        SampleGradients grads;
        double kkt = 0.0;
        bool converged = false;
        std::exception_ptr error;
    };
    std::vector<Slot> slots(static_cast<std::size_t>(B));

#pragma omp parallel for schedule(dynamic) if (parallel)
    for (Index i = 0; i < B; ++i) {
        Slot& slot = slots[static_cast<std::size_t>(i)];
        try {
            const Index sample = samples[static_cast<std::size_t>(i)];
            const std::vector<Vec> x = data.features_of(sample);
            EncodeOptions local = opts;
            if (warm && !warm->empty()) {
                const Mat& z = warm->z[static_cast<std::size_t>(sample)];
                if (z.size() == dict.atoms() * dict.modalities()) local.warm_z = &z;
            }
            const EncodeResult enc = joint_encode(ctx, x, prior, local);
            if (warm && !warm->empty()) warm->z[static_cast<std::size_t>(sample)] = enc.codes;
            slot.kkt = enc.kkt_residual;
            slot.converged = enc.converged;
            const int y = data.labels[static_cast<std::size_t>(sample)];
            try {
                slot.grads = task_gradients(x, y, dict, bank, enc.codes, prior, active_tol);
            } catch (const RankDeficient&) {
                PriorSpec bumped = prior;
                bumped.lambda2 = 1e-6;
                slot.grads = task_gradients(x, y, dict, bank, enc.codes, bumped, active_tol);
            }
        } catch (...) {
            slot.error = std::current_exception();
        }
    }
    for (const Slot& slot : slots) {
        if (slot.error) std::rethrow_exception(slot.error);
    }

    BatchGradients out;
    const int S = dict.modalities();
    for (int s = 0; s < S; ++s) {
        const Mat& D = dict.dicts[static_cast<std::size_t>(s)];
        out.dict.push_back(Mat::Zero(D.rows(), D.cols()));
        const Mat& W = bank.weights[static_cast<std::size_t>(s)];
        out.weights.push_back(Mat::Zero(W.rows(), W.cols()));
    }
    // fixed-order reduction
    for (const Slot& slot : slots) {
        for (int s = 0; s < S; ++s) {
            out.dict[static_cast<std::size_t>(s)] += slot.grads.dict[static_cast<std::size_t>(s)];
            out.weights[static_cast<std::size_t>(s)] +=
                slot.grads.weights[static_cast<std::size_t>(s)];
        }
        out.mean_loss += slot.grads.loss;
        out.mean_kkt += slot.kkt;
        out.mean_active += static_cast<double>(slot.grads.active_count);
        out.all_converged = out.all_converged && slot.converged;
    }
    const double inv = 1.0 / static_cast<double>(B);
    for (int s = 0; s < S; ++s) {
        out.dict[static_cast<std::size_t>(s)] *= inv;
        out.weights[static_cast<std::size_t>(s)] *= inv;
    }
    out.mean_loss *= inv;
    out.mean_kkt *= inv;
    out.mean_active *= inv;
    for (const Mat& W : bank.weights) out.mean_loss += 0.5 * bank.nu * W.squaredNorm();
    return out;
}

}  // namespace jsdl
