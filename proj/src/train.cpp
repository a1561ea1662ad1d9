#include "jsdl/train.hpp"

#include <algorithm>
#include <cmath>

namespace jsdl {

double learning_rate(long t, double rho, double t0) {
    if (t < 1) throw ValidationError("learning_rate requires t >= 1");
    const double td = static_cast<double>(t);
    return td <= t0 ? rho : rho * t0 / td;
}

Mat project_dictionary(Mat D) {
    // the guard absorbs the rounding of a freshly rescaled unit atom, so
    // projecting twice is bitwise idempotent
    constexpr double kUnit = 1.0 + 1e-14;
    for (Index k = 0; k < D.cols(); ++k) {
        const double norm = D.col(k).norm();
        if (norm > kUnit) D.col(k) /= norm;
    }
    return D;
}

MultimodalDictionary project_dictionary(MultimodalDictionary dict) {
    for (Mat& D : dict.dicts) D = project_dictionary(std::move(D));
    return dict;
}

Mat project_classifier(Mat W) { return W; }

PriorSpec prior_from_hyperparams(Prior prior, const Hyperparams& hp) {
    switch (prior) {
        case Prior::L12: return PriorSpec::l12(hp.lambda1, hp.lambda2);
        case Prior::L11: return PriorSpec::l11(hp.lambda1p, hp.lambda2);
        case Prior::Mixed: return PriorSpec::mixed(hp.lambda1, hp.lambda1p, hp.lambda2);
    }
    throw ValidationError("unknown prior");
}

EncodeOptions encode_options(const Hyperparams& hp) {
    EncodeOptions opts;
    opts.tol = hp.admm_tol;
    opts.max_iter = hp.admm_max_iter;
    return opts;
}

namespace {

double effective_t0(const Hyperparams& hp, Index steps_per_epoch) {
    if (hp.t0 > 0) return static_cast<double>(hp.t0);
    return std::max(1.0, (static_cast<double>(hp.epochs) / 10.0) *
                             static_cast<double>(steps_per_epoch));
}

std::vector<std::vector<Index>> epoch_batches(Index n, Index batch, Rng& rng) {
    std::vector<Index> perm(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    rng.shuffle(perm);
    std::vector<std::vector<Index>> batches;
    for (Index start = 0; start < n; start += batch) {
        const Index stop = std::min(n, start + batch);
        batches.emplace_back(perm.begin() + start, perm.begin() + stop);
    }
    return batches;
}

}  // namespace

UnsupervisedFit unsupervised_fit(const SampleSet& data, const Hyperparams& hp, Prior prior,
                                 MultimodalDictionary init, Rng& rng, const FitOptions& opts) {
    hp.validate(prior);
    const Index n = data.size();
    if (n == 0) throw InsufficientData("unsupervised_fit: empty data");
    const PriorSpec pspec = prior_from_hyperparams(prior, hp);
    const EncodeOptions eopts = encode_options(hp);
    const Index batch = std::min<Index>(hp.batch_size, n);
    const Index steps_per_epoch = (n + batch - 1) / batch;
    const double t0 = effective_t0(hp, steps_per_epoch);

    UnsupervisedFit out;
    out.dict = project_dictionary(std::move(init));
    WarmStartCache warm;
    if (opts.warm_start) warm.reset(n);

    long t = 0;
    for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
        double epoch_cost = 0.0;
        Index batches_seen = 0;
        for (const std::vector<Index>& indices : epoch_batches(n, batch, rng)) {
            EncoderContext ctx(out.dict, pspec.lambda2);
            const std::vector<EncodeResult> encs =
                batch_encode(ctx, data, indices, pspec, eopts, opts.parallel,
                             opts.warm_start ? &warm : nullptr);

            const int S = out.dict.modalities();
            std::vector<Mat> grads;
            for (int s = 0; s < S; ++s) {
                const Mat& D = out.dict.dicts[static_cast<std::size_t>(s)];
                grads.push_back(Mat::Zero(D.rows(), D.cols()));
            }
            double cost = 0.0;
            for (std::size_t i = 0; i < indices.size(); ++i) {
                const std::vector<Vec> x = data.features_of(indices[i]);
                const Mat& codes = encs[i].codes;
                for (int s = 0; s < S; ++s) {
                    const std::size_t su = static_cast<std::size_t>(s);
                    grads[su] -= (x[su] - out.dict.dicts[su] * codes.col(s)) *
                                 codes.col(s).transpose();
                }
                cost += encs[i].objective;
            }
            const double inv = 1.0 / static_cast<double>(indices.size());
            ++t;
            const double rate = learning_rate(t, hp.rho, t0);
            for (int s = 0; s < S; ++s) {
                const std::size_t su = static_cast<std::size_t>(s);
                out.dict.dicts[su] =
                    project_dictionary(Mat(out.dict.dicts[su] - rate * inv * grads[su]));
            }
            epoch_cost += cost * inv;
            ++batches_seen;
        }
        out.cost_per_epoch.push_back(epoch_cost / static_cast<double>(batches_seen));
    }
    return out;
}

UnsupervisedFit unsupervised_fit(const SampleSet& data, const Hyperparams& hp, Prior prior,
                                 Index atoms, const FitOptions& opts) {
    Rng rng(hp.seed);
    const Index n = data.size();
    if (atoms > n) throw InsufficientData("unsupervised_fit: more atoms than samples");
    const std::vector<std::size_t> picks =
        rng.sample_without_replacement(static_cast<std::size_t>(n), static_cast<std::size_t>(atoms));
    MultimodalDictionary init;
    for (int s = 0; s < data.modalities(); ++s) {
        const Mat& F = data.features[static_cast<std::size_t>(s)];
        Mat D(F.rows(), atoms);
        for (Index k = 0; k < atoms; ++k) D.col(k) = F.col(static_cast<Index>(picks[static_cast<std::size_t>(k)]));
        init.dicts.push_back(std::move(D));
    }
    return unsupervised_fit(data, hp, prior, std::move(init), rng, opts);
}

namespace {

// gradient descent with backtracking for the logistic/softmax convex fit
void descend_classifiers(ClassifierBank& bank, const std::vector<Mat>& codes,
                         const std::vector<int>& labels, double nu) {
    const Index n = static_cast<Index>(labels.size());
    const double inv = 1.0 / static_cast<double>(n);

    auto objective_and_grads = [&](const ClassifierBank& b, std::vector<Mat>* grads) {
        double value = 0.0;
        if (grads) {
            grads->clear();
            for (const Mat& W : b.weights) grads->push_back(Mat::Zero(W.rows(), W.cols()));
        }
        for (Index i = 0; i < n; ++i) {
            for (int s = 0; s < b.modalities(); ++s) {
                const std::size_t su = static_cast<std::size_t>(s);
                const LossEval ev = head_loss(b.head, labels[static_cast<std::size_t>(i)],
                                              b.weights[su], codes[su].col(i));
                value += inv * ev.value;
                if (grads) (*grads)[su] += inv * ev.grad_w;
            }
        }
        for (std::size_t s = 0; s < b.weights.size(); ++s) {
            value += 0.5 * nu * b.weights[s].squaredNorm();
            if (grads) (*grads)[s] += nu * b.weights[s];
        }
        return value;
    };

    std::vector<Mat> grads;
    double value = objective_and_grads(bank, &grads);
    double step = 1.0;
    for (int iter = 0; iter < 100000; ++iter) {
        double gmax = 0.0, gsq = 0.0;
        for (const Mat& g : grads) {
            gmax = std::max(gmax, g.cwiseAbs().maxCoeff());
            gsq += g.squaredNorm();
        }
        if (gmax <= 1e-8) break;

        ClassifierBank trial = bank;
        double trial_value = 0.0;
        for (;;) {
            for (std::size_t s = 0; s < bank.weights.size(); ++s) {
                trial.weights[s] = bank.weights[s] - step * grads[s];
            }
            trial_value = objective_and_grads(trial, nullptr);
            if (trial_value <= value - 0.5 * step * gsq || step < 1e-16) break;
            step *= 0.5;
        }
        bank.weights = trial.weights;
        value = objective_and_grads(bank, &grads);
        step = std::min(step * 1.5, 1e6);
    }
}

}  // namespace

ClassifierBank fit_classifiers(const SampleSet& data, const MultimodalDictionary& dict, Head head,
                               const PriorSpec& prior, const Hyperparams& hp, Index classes,
                               const FitOptions& opts) {
    const Index n = data.size();
    const Index d = dict.atoms();
    const int S = dict.modalities();
    if (head == Head::Logistic && classes != 2) {
        throw ValidationError("logistic head requires K = 2");
    }

    // one dictionary state, so one shared factorization for all codes
    EncoderContext ctx(dict, prior.lambda2);
    std::vector<Index> all(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
    const std::vector<EncodeResult> encs =
        batch_encode(ctx, data, all, prior, encode_options(hp), opts.parallel);

    std::vector<Mat> codes(static_cast<std::size_t>(S));
    for (int s = 0; s < S; ++s) codes[static_cast<std::size_t>(s)] = Mat(d, n);
    for (Index i = 0; i < n; ++i) {
        for (int s = 0; s < S; ++s) {
            codes[static_cast<std::size_t>(s)].col(i) =
                encs[static_cast<std::size_t>(i)].codes.col(s);
        }
    }

    ClassifierBank bank;
    bank.head = head;
    bank.nu = hp.nu;
    const Index wrows = head == Head::Logistic ? 1 : classes;
    for (int s = 0; s < S; ++s) bank.weights.push_back(Mat::Zero(wrows, d));

    if (head == Head::Quadratic) {
        // normal equations of (1/n) sum 1/2||q^y - W a||^2 + nu/2 ||W||^2
        Mat Y(classes, n);
        for (Index i = 0; i < n; ++i) {
            Y.col(i) = class_indicator(classes, data.labels[static_cast<std::size_t>(i)]);
        }
        const double inv = 1.0 / static_cast<double>(n);
        for (int s = 0; s < S; ++s) {
            const Mat& A = codes[static_cast<std::size_t>(s)];
            const Mat G = inv * (A * A.transpose()) + hp.nu * Mat::Identity(d, d);
            const Mat rhs = inv * (A * Y.transpose());  // d x K
            bank.weights[static_cast<std::size_t>(s)] = G.ldlt().solve(rhs).transpose();
        }
    } else {
        descend_classifiers(bank, codes, data.labels, hp.nu);
    }
    return bank;
}

TrainState init_model(const SampleSet& data, const Hyperparams& hp, Head head, Prior prior,
                      Index classes, Index atoms, const FitOptions& opts) {
    hp.validate(prior);
    const Index n = data.size();
    if (atoms > n) {
        throw InsufficientData("init_model: atom count exceeds training sample count");
    }
    if (data.labels.size() != static_cast<std::size_t>(n)) {
        throw ValidationError("init_model requires labeled data");
    }

    TrainState state;
    state.prior = prior;
    state.rng = Rng(hp.seed);

    const std::vector<std::size_t> picks = state.rng.sample_without_replacement(
        static_cast<std::size_t>(n), static_cast<std::size_t>(atoms));
    MultimodalDictionary init;
    for (int s = 0; s < data.modalities(); ++s) {
        const Mat& F = data.features[static_cast<std::size_t>(s)];
        Mat D(F.rows(), atoms);
        for (Index k = 0; k < atoms; ++k) {
            D.col(k) = F.col(static_cast<Index>(picks[static_cast<std::size_t>(k)]));
        }
        init.dicts.push_back(std::move(D));
    }

    UnsupervisedFit unsup = unsupervised_fit(data, hp, prior, std::move(init), state.rng, opts);
    state.dict = std::move(unsup.dict);

    const PriorSpec pspec = prior_from_hyperparams(prior, hp);
    state.bank = fit_classifiers(data, state.dict, head, pspec, hp, classes, opts);
    return state;
}

TrainState supervised_fit(const SampleSet& data, const Hyperparams& hp, TrainState state,
                          const FitOptions& opts) {
    state.bank.nu = hp.nu;
    hp.validate(state.prior);
    const Index n = data.size();
    if (n == 0) throw InsufficientData("supervised_fit: empty data");
    const PriorSpec pspec = prior_from_hyperparams(state.prior, hp);
    const EncodeOptions eopts = encode_options(hp);
    const Index batch = std::min<Index>(hp.batch_size, n);
    const Index steps_per_epoch = (n + batch - 1) / batch;
    const double t0 = effective_t0(hp, steps_per_epoch);
    const int S = state.dict.modalities();

    WarmStartCache warm;
    if (opts.warm_start) warm.reset(n);

    for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
        double epoch_obj = 0.0, epoch_kkt = 0.0, epoch_active = 0.0;
        Index batches_seen = 0;
        for (const std::vector<Index>& indices : epoch_batches(n, batch, state.rng)) {
            EncoderContext ctx(state.dict, pspec.lambda2);
            const BatchGradients bg =
                batch_task_gradients(ctx, data, indices, state.bank, pspec, hp.active_tol, eopts,
                                     opts.parallel, opts.warm_start ? &warm : nullptr);

            ++state.step;
            const double rate = learning_rate(state.step, hp.rho, t0);
            for (int s = 0; s < S; ++s) {
                const std::size_t su = static_cast<std::size_t>(s);
                state.bank.weights[su] = project_classifier(
                    Mat(state.bank.weights[su] - rate * bg.weights[su]));
                state.dict.dicts[su] = project_dictionary(
                    Mat(state.dict.dicts[su] - rate * bg.dict[su]));
            }
            if (!state.dict.dicts[0].allFinite()) {
                throw NonFinite("supervised_fit: non-finite dictionary after step " +
                                std::to_string(state.step));
            }
            epoch_obj += bg.mean_loss;
            epoch_kkt += bg.mean_kkt;
            epoch_active += bg.mean_active;
            ++batches_seen;
            if (opts.on_step) opts.on_step(state);
        }
        ++state.epoch;
        TrainRecord rec;
        rec.epoch = state.epoch;
        rec.step = state.step;
        rec.objective = epoch_obj / static_cast<double>(batches_seen);
        rec.mean_kkt = epoch_kkt / static_cast<double>(batches_seen);
        rec.mean_active = epoch_active / static_cast<double>(batches_seen);
        state.running_objective = rec.objective;
        state.log.push_back(rec);
    }
    return state;
}

std::vector<double> lambda1_grid() {
    // 0.01 + 0.005k over k = -3..3, positive values only
    std::vector<double> grid;
    for (int k = -3; k <= 3; ++k) {
        const double v = 0.01 + 0.005 * k;
        if (v > 0) grid.push_back(v);
    }
    return grid;
}

std::vector<double> mixed_prior_grid() {
    return {0.0001, 0.0005, 0.001, 0.005, 0.01, 0.05};
}

}  // namespace jsdl
