// Compares the serial and OpenMP paths of the batch kernels and reports
// how encode cost grows with dictionary size.

#include <chrono>
#include <cstdio>

#include <omp.h>

#include "jsdl/batch.hpp"
#include "jsdl/rng.hpp"

using namespace jsdl;

namespace {

struct Workload {
    MultimodalDictionary dict;
    SampleSet data;
    ClassifierBank bank;
    PriorSpec prior;
    std::vector<Index> samples;
};

Workload make_workload(Rng& rng, int S, Index n, Index d, Index batch, Index classes) {
    Workload w;
    for (int s = 0; s < S; ++s) {
        Mat D(n, d);
        for (Index j = 0; j < d; ++j) {
            for (Index i = 0; i < n; ++i) D(i, j) = rng.normal();
            D.col(j).normalize();
        }
        w.dict.dicts.push_back(std::move(D));
        Mat F(n, batch);
        for (Index i = 0; i < batch; ++i) {
            Vec x(n);
            for (Index r = 0; r < n; ++r) x(r) = rng.normal();
            F.col(i) = x.normalized();
        }
        w.data.features.push_back(std::move(F));
        Mat W(classes, d);
        for (Index i = 0; i < classes; ++i)
            for (Index j = 0; j < d; ++j) W(i, j) = 0.3 * rng.normal();
        w.bank.weights.push_back(std::move(W));
    }
    w.bank.head = Head::Quadratic;
    w.bank.nu = 1e-8;
    for (Index i = 0; i < batch; ++i) {
        w.data.labels.push_back(1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(classes))));
        w.samples.push_back(i);
    }
    w.prior = PriorSpec::l12(0.1, 0.05);
    return w;
}

template <typename F>
double best_of(int reps, F&& run) {
    double best = 1e18;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        run();
        best = std::min(best,
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

}  // namespace

int main() {
    std::printf("threads available: %d\n\n", omp_get_max_threads());
    std::printf("%-34s %10s %10s %8s\n", "kernel", "serial", "parallel", "speedup");

    Rng rng(42);
    for (const auto& [S, n, d, batch] : {std::tuple{2, (Index)30, (Index)60, (Index)128},
                                         std::tuple{3, (Index)20, (Index)120, (Index)128},
                                         std::tuple{3, (Index)64, (Index)256, (Index)64}}) {
        Workload w = make_workload(rng, S, n, d, batch, 10);
        EncoderContext ctx(w.dict, w.prior.lambda2);
        const EncodeOptions opts;

        const double enc_serial =
            best_of(3, [&] { batch_encode(ctx, w.data, w.samples, w.prior, opts, false); });
        const double enc_parallel =
            best_of(3, [&] { batch_encode(ctx, w.data, w.samples, w.prior, opts, true); });
        char name[64];
        std::snprintf(name, sizeof(name), "encode S=%d n=%lld d=%lld B=%lld", S,
                      static_cast<long long>(n), static_cast<long long>(d),
                      static_cast<long long>(batch));
        std::printf("%-34s %9.3fs %9.3fs %7.2fx\n", name, enc_serial, enc_parallel,
                    enc_serial / enc_parallel);

        const double grad_serial = best_of(3, [&] {
            batch_task_gradients(ctx, w.data, w.samples, w.bank, w.prior, 1e-6, opts, false);
        });
        const double grad_parallel = best_of(3, [&] {
            batch_task_gradients(ctx, w.data, w.samples, w.bank, w.prior, 1e-6, opts, true);
        });
        std::snprintf(name, sizeof(name), "task grads S=%d n=%lld d=%lld B=%lld", S,
                      static_cast<long long>(n), static_cast<long long>(d),
                      static_cast<long long>(batch));
        std::printf("%-34s %9.3fs %9.3fs %7.2fx\n", name, grad_serial, grad_parallel,
                    grad_serial / grad_parallel);
    }

    std::printf("\nencode cost vs dictionary size (serial, batch 200, S=2, n=30):\n");
    double reference = 0.0;
    for (Index d : {(Index)50, (Index)100, (Index)200, (Index)400}) {
        Workload w = make_workload(rng, 2, 30, d, 200, 10);
        EncoderContext ctx(w.dict, w.prior.lambda2);
        const double t = best_of(3, [&] {
            batch_encode(ctx, w.data, w.samples, w.prior, EncodeOptions{}, false);
        });
        if (reference == 0.0) reference = t;
        std::printf("  d = %4lld: %7.3fs (%.2fx of d=50)\n", static_cast<long long>(d), t,
                    t / reference);
    }
    return 0;
}
