#include "jsdl/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "jsdl/batch.hpp"
#include "jsdl/rng.hpp"

namespace jsdl {

SampleSet Dataset::subset(Split which) const {
    std::vector<Index> keep;
    for (Index i = 0; i < size(); ++i) {
        if (split[static_cast<std::size_t>(i)] == which) keep.push_back(i);
    }
    SampleSet out;
    for (const Mat& F : features) {
        Mat sub(F.rows(), static_cast<Index>(keep.size()));
        for (std::size_t i = 0; i < keep.size(); ++i) sub.col(static_cast<Index>(i)) = F.col(keep[i]);
        out.features.push_back(std::move(sub));
    }
    out.labels.reserve(keep.size());
    for (Index i : keep) out.labels.push_back(labels[static_cast<std::size_t>(i)]);
    return out;
}

void Dataset::validate() const {
    const Index n = size();
    if (features.empty()) throw ValidationError("dataset has no modalities");
    for (const Mat& F : features) {
        if (F.cols() != n) throw DimensionMismatch("modality sample counts differ");
        if (!F.allFinite()) throw NonFinite("dataset has non-finite features");
    }
    if (static_cast<Index>(labels.size()) != n || static_cast<Index>(split.size()) != n) {
        throw DimensionMismatch("label/split length differs from sample count");
    }
    for (int y : labels) {
        if (y < 1 || y > classes) throw ValidationError("label out of range [1, K]");
    }
    for (const Mat& F : features) {
        for (Index i = 0; i < n; ++i) {
            const double mean = F.col(i).mean();
            const double norm = F.col(i).norm();
            if (std::abs(mean) > 1e-9 || std::abs(norm - 1.0) > 1e-9) {
                throw ValidationError("sample " + std::to_string(i) +
                                      " is not normalized (zero mean, unit norm)");
            }
        }
    }
}

void SynthSpec::validate() const {
    if (classes < 1) throw InvalidSpec("classes must be >= 1");
    if (modalities < 1) throw InvalidSpec("modalities must be >= 1");
    if (static_cast<int>(dims.size()) != modalities) {
        throw InvalidSpec("dims must list one feature length per modality");
    }
    for (int n : dims) {
        if (n < 2) throw InvalidSpec("feature lengths must be >= 2");
    }
    if (atoms_per_class < 1) throw InvalidSpec("atoms_per_class must be >= 1");
    if (train_per_class < 1 || test_per_class < 0) {
        throw InvalidSpec("train_per_class must be >= 1, test_per_class >= 0");
    }
    if (noise < 0) throw InvalidSpec("noise must be nonnegative");
}

SynthResult generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    const int S = spec.modalities;
    const int K = spec.classes;
    const Index d = static_cast<Index>(K) * spec.atoms_per_class;
    const Index per_class = spec.train_per_class + spec.test_per_class;
    const Index n_total = static_cast<Index>(K) * per_class;

    SynthResult out;
    for (int s = 0; s < S; ++s) {
        const Index n = spec.dims[static_cast<std::size_t>(s)];
        Mat D(n, d);
        for (Index j = 0; j < d; ++j) {
            for (Index i = 0; i < n; ++i) D(i, j) = rng.normal();
            D.col(j).normalize();
        }
        out.true_dict.dicts.push_back(std::move(D));
        out.data.features.push_back(Mat(n, n_total));
        out.data.modality_names.push_back("modality" + std::to_string(s + 1));
    }
    out.atom_class.resize(static_cast<std::size_t>(d));
    for (int k = 0; k < K; ++k) {
        for (int a = 0; a < spec.atoms_per_class; ++a) {
            out.atom_class[static_cast<std::size_t>(k * spec.atoms_per_class + a)] = k + 1;
        }
    }

    out.data.classes = K;
    out.data.labels.resize(static_cast<std::size_t>(n_total));
    out.data.split.resize(static_cast<std::size_t>(n_total));

    Index col = 0;
    for (int k = 0; k < K; ++k) {
        for (Index i = 0; i < per_class; ++i, ++col) {
            // row support: this class's planted atoms, coefficients per
            // modality (shared values in correlated mode)
            // positive weights keep each class's codes in one orthant of
            // its atom block, which a linear head can separate
            Mat coeff = Mat::Zero(d, S);
            for (int a = 0; a < spec.atoms_per_class; ++a) {
                const Index row = static_cast<Index>(k * spec.atoms_per_class + a);
                if (spec.correlated) {
                    const double v = rng.uniform(0.5, 1.5);
                    for (int s = 0; s < S; ++s) coeff(row, s) = v;
                } else {
                    for (int s = 0; s < S; ++s) coeff(row, s) = rng.uniform(0.5, 1.5);
                }
            }
            for (int s = 0; s < S; ++s) {
                const std::size_t su = static_cast<std::size_t>(s);
                Vec x = out.true_dict.dicts[su] * coeff.col(s);
                if (spec.noise > 0) {
                    for (Index r = 0; r < x.size(); ++r) x(r) += spec.noise * rng.normal();
                }
                out.data.features[su].col(col) = normalize_sample(x);
            }
            out.data.labels[static_cast<std::size_t>(col)] = k + 1;
            out.data.split[static_cast<std::size_t>(col)] =
                i < spec.train_per_class ? Split::Train : Split::Test;
        }
    }
    return out;
}

ClassDictionary baseline_from_samples(const SampleSet& train, int atoms_per_class, int classes,
                                      std::uint64_t seed) {
    Rng rng(seed);
    ClassDictionary out;
    const int S = train.modalities();
    std::vector<std::vector<Index>> chosen(static_cast<std::size_t>(classes));
    for (int k = 1; k <= classes; ++k) {
        std::vector<Index> members;
        for (Index i = 0; i < train.size(); ++i) {
            if (train.labels[static_cast<std::size_t>(i)] == k) members.push_back(i);
        }
        if (static_cast<int>(members.size()) < atoms_per_class) {
            throw InsufficientData("class " + std::to_string(k) + " has fewer samples than atoms");
        }
        const std::vector<std::size_t> picks = rng.sample_without_replacement(
            members.size(), static_cast<std::size_t>(atoms_per_class));
        for (std::size_t p : picks) chosen[static_cast<std::size_t>(k - 1)].push_back(members[p]);
    }
    const Index d = static_cast<Index>(classes) * atoms_per_class;
    for (int s = 0; s < S; ++s) {
        const Mat& F = train.features[static_cast<std::size_t>(s)];
        Mat D(F.rows(), d);
        Index colidx = 0;
        for (int k = 0; k < classes; ++k) {
            for (Index i : chosen[static_cast<std::size_t>(k)]) D.col(colidx++) = F.col(i);
        }
        out.dict.dicts.push_back(std::move(D));
    }
    for (int k = 1; k <= classes; ++k) {
        for (int a = 0; a < atoms_per_class; ++a) out.atom_class.push_back(k);
    }
    return out;
}

ClassDictionary baseline_from_unsupervised(const SampleSet& train, int atoms_per_class,
                                           int classes, const Hyperparams& hp, Prior prior,
                                           const FitOptions& opts) {
    ClassDictionary out;
    const int S = train.modalities();
    std::vector<MultimodalDictionary> per_class;
    for (int k = 1; k <= classes; ++k) {
        std::vector<Index> members;
        for (Index i = 0; i < train.size(); ++i) {
            if (train.labels[static_cast<std::size_t>(i)] == k) members.push_back(i);
        }
        SampleSet sub;
        for (int s = 0; s < S; ++s) {
            const Mat& F = train.features[static_cast<std::size_t>(s)];
            Mat M(F.rows(), static_cast<Index>(members.size()));
            for (std::size_t i = 0; i < members.size(); ++i) M.col(static_cast<Index>(i)) = F.col(members[i]);
            sub.features.push_back(std::move(M));
        }
        Hyperparams sub_hp = hp;
        sub_hp.seed = hp.seed + static_cast<std::uint64_t>(k);
        per_class.push_back(
            unsupervised_fit(sub, sub_hp, prior, static_cast<Index>(atoms_per_class), opts).dict);
    }
    const Index d = static_cast<Index>(classes) * atoms_per_class;
    for (int s = 0; s < S; ++s) {
        const Index n = per_class.front().dicts[static_cast<std::size_t>(s)].rows();
        Mat D(n, d);
        for (int k = 0; k < classes; ++k) {
            D.block(0, static_cast<Index>(k) * atoms_per_class, n, atoms_per_class) =
                per_class[static_cast<std::size_t>(k)].dicts[static_cast<std::size_t>(s)];
        }
        out.dict.dicts.push_back(std::move(D));
    }
    for (int k = 1; k <= classes; ++k) {
        for (int a = 0; a < atoms_per_class; ++a) out.atom_class.push_back(k);
    }
    return out;
}

int residual_classify(const std::vector<Vec>& x, const ClassDictionary& cd, double lambda1,
                      const EncodeOptions& opts) {
    const EncodeResult enc =
        joint_encode(EncodeProblem{x, cd.dict, PriorSpec::l12(lambda1, 0.0)}, opts);
    int classes = 0;
    for (int c : cd.atom_class) classes = std::max(classes, c);

    int best = 1;
    double best_residual = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= classes; ++k) {
        double residual = 0.0;
        for (int s = 0; s < cd.dict.modalities(); ++s) {
            const std::size_t su = static_cast<std::size_t>(s);
            Vec recon = Vec::Zero(x[su].size());
            for (Index j = 0; j < cd.dict.atoms(); ++j) {
                if (cd.atom_class[static_cast<std::size_t>(j)] == k) {
                    recon += cd.dict.dicts[su].col(j) * enc.codes(j, s);
                }
            }
            residual += (x[su] - recon).squaredNorm();
        }
        if (residual < best_residual) {
            best_residual = residual;
            best = k;
        }
    }
    return best;
}

Metrics metrics_from_predictions(const std::vector<int>& predicted, const std::vector<int>& truth,
                                 int classes) {
    if (predicted.size() != truth.size()) throw DimensionMismatch("prediction count differs");
    Metrics m;
    m.confusion = Eigen::MatrixXi::Zero(classes, classes);
    Index hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        m.confusion(truth[i] - 1, predicted[i] - 1) += 1;
        if (truth[i] == predicted[i]) ++hits;
    }
    m.accuracy = truth.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(truth.size());
    return m;
}

Metrics evaluate(const MultimodalDictionary& dict, const ClassifierBank& bank,
                 const PriorSpec& prior, const SampleSet& test, const EncodeOptions& opts,
                 bool parallel) {
    const Index n = test.size();
    if (n == 0) throw ValidationError("evaluate: empty test set");
    EncoderContext ctx(dict, prior.lambda2);
    std::vector<Index> all(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
    const std::vector<EncodeResult> encs = batch_encode(ctx, test, all, prior, opts, parallel);

    std::vector<int> predicted(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        predicted[static_cast<std::size_t>(i)] = decide(bank, encs[static_cast<std::size_t>(i)].codes);
    }
    const Index K = bank.head == Head::Logistic ? 2 : bank.classes();
    return metrics_from_predictions(predicted, test.labels, static_cast<int>(K));
}

Metrics evaluate_baseline(const ClassDictionary& cd, double lambda1, const SampleSet& test,
                          int classes, const EncodeOptions& opts, bool parallel) {
    const Index n = test.size();
    if (n == 0) throw ValidationError("evaluate_baseline: empty test set");
    std::vector<int> predicted(static_cast<std::size_t>(n));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (Index i = 0; i < n; ++i) {
        try {
            predicted[static_cast<std::size_t>(i)] =
                residual_classify(test.features_of(i), cd, lambda1, opts);
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (const std::exception_ptr& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return metrics_from_predictions(predicted, test.labels, classes);
}

std::string Metrics::to_string() const {
    std::ostringstream os;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "accuracy %.4f", accuracy);
    os << buf << "\nconfusion (rows true, columns predicted):\n";
    for (Index r = 0; r < confusion.rows(); ++r) {
        for (Index c = 0; c < confusion.cols(); ++c) {
            os << confusion(r, c) << (c + 1 < confusion.cols() ? ' ' : '\n');
        }
    }
    return os.str();
}

std::string Metrics::to_csv() const {
    std::ostringstream os;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", accuracy);
    os << "accuracy," << buf << "\n";
    for (Index r = 0; r < confusion.rows(); ++r) {
        os << "confusion_row_" << r + 1;
        for (Index c = 0; c < confusion.cols(); ++c) os << ',' << confusion(r, c);
        os << '\n';
    }
    return os.str();
}

}  // namespace jsdl
