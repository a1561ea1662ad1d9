#include "jsdl/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <omp.h>

#include "jsdl/rng.hpp"

namespace jsdl::oracle {

namespace {

// stacked layout: position j*S + s <-> A(j, s)
Mat unstack_codes(const Vec& a, Index d, Index S) {
    Mat A(d, S);
    for (Index j = 0; j < d; ++j)
        for (Index s = 0; s < S; ++s) A(j, s) = a(j * S + s);
    return A;
}

// shrinkage written independently of the main solver's proximal operator
Vec shrink_stacked(const Vec& v, Index S, double t_group, double t_entry) {
    Vec out = v;
    const Index d = v.size() / S;
    if (t_entry > 0) {
        for (Index i = 0; i < out.size(); ++i) {
            const double m = std::abs(out(i)) - t_entry;
            out(i) = m > 0 ? (out(i) > 0 ? m : -m) : 0.0;
        }
    }
    if (t_group > 0) {
        for (Index j = 0; j < d; ++j) {
            const double norm = out.segment(j * S, S).norm();
            if (norm <= t_group) {
                out.segment(j * S, S).setZero();
            } else {
                out.segment(j * S, S) *= 1.0 - t_group / norm;
            }
        }
    }
    return out;
}

// subgradient optimality residual of the stacked group lasso, from the
// smooth gradient H a - q (the ridge is inside H)
double stacked_kkt(const Vec& grad, const Vec& a, Index S, double l1, double l1p) {
    const Index d = a.size() / S;
    double worst = 0.0;
    for (Index j = 0; j < d; ++j) {
        const auto ga = grad.segment(j * S, S);
        const auto aa = a.segment(j * S, S);
        const double rnorm = aa.norm();
        double sq = 0.0;
        if (rnorm > 0) {
            for (Index s = 0; s < S; ++s) {
                double e;
                if (aa(s) != 0.0) {
                    e = ga(s) + l1 * aa(s) / rnorm + (aa(s) > 0 ? l1p : -l1p);
                } else {
                    e = std::max(0.0, std::abs(ga(s)) - l1p);
                }
                sq += e * e;
            }
            worst = std::max(worst, std::sqrt(sq));
        } else {
            for (Index s = 0; s < S; ++s) {
                const double e = std::max(0.0, std::abs(ga(s)) - l1p);
                sq += e * e;
            }
            worst = std::max(worst, std::max(0.0, std::sqrt(sq) - l1));
        }
    }
    return worst;
}

}  // namespace

EncodeResult reference_encode(const EncodeProblem& problem, double tol, long max_iter) {
    problem.validate();
    const Index d = problem.dict.atoms();
    const Index S = problem.dict.modalities();
    const double l1 = problem.prior.group_weight();
    const double l1p = problem.prior.entry_weight();
    const double l2 = problem.prior.lambda2;

    Index n = 0;
    for (Index s = 0; s < S; ++s) n += problem.dict.feature_dim(static_cast<int>(s));

    // D'' = [D'; sqrt(l2) I], x'' = [x'; 0]
    const Index rows = n + (l2 > 0 ? d * S : 0);
    Mat dpp = Mat::Zero(rows, d * S);
    Vec xpp = Vec::Zero(rows);
    Index off = 0;
    for (Index s = 0; s < S; ++s) {
        const Mat& D = problem.dict.dicts[static_cast<std::size_t>(s)];
        for (Index j = 0; j < d; ++j) dpp.block(off, j * S + s, D.rows(), 1) = D.col(j);
        xpp.segment(off, D.rows()) = problem.features[static_cast<std::size_t>(s)];
        off += D.rows();
    }
    if (l2 > 0) {
        const double r = std::sqrt(l2);
        for (Index i = 0; i < d * S; ++i) dpp(n + i, i) = r;
    }

    const Mat H = dpp.transpose() * dpp;
    const Vec q = dpp.transpose() * xpp;

    auto smooth = [&](const Vec& a) { return 0.5 * a.dot(H * a) - q.dot(a); };

    Vec a = Vec::Zero(d * S);
    double fa = 0.0;
    Vec grad = -q;
    double step = 1.0;
    EncodeResult result;

    for (long iter = 1; iter <= max_iter; ++iter) {
        // backtracking on the quadratic upper model
        Vec cand;
        double fcand = 0.0;
        for (;;) {
            cand = shrink_stacked(a - step * grad, S, l1 * step, l1p * step);
            fcand = smooth(cand);
            const Vec diff = cand - a;
            const double bound = fa + grad.dot(diff) + diff.squaredNorm() / (2.0 * step);
            if (fcand <= bound + 1e-15 * (1.0 + std::abs(bound))) break;
            step *= 0.5;
            if (step < 1e-18) throw MaxIterations("reference_encode: step size underflow");
        }
        a = cand;
        fa = fcand;
        grad = H * a - q;
        if (!a.allFinite()) throw NonFinite("reference_encode: non-finite iterate");

        if (iter % 5 == 0 || iter == max_iter) {
            const double kkt = stacked_kkt(grad, a, S, l1, l1p);
            if (kkt <= tol) {
                result.kkt_residual = kkt;
                result.converged = true;
                result.iterations = static_cast<int>(std::min<long>(iter, 1 << 30));
                result.codes = unstack_codes(a, d, S);
                result.objective = objective_value(problem, result.codes);
                return result;
            }
        }
        // keep the accepted step; growth here oscillates in the linear tail
    }
    throw MaxIterations("reference_encode: no certificate within iteration budget");
}

EncodeResult bruteforce_encode(const EncodeProblem& problem, int max_d) {
    problem.validate();
    const Index d = problem.dict.atoms();
    const Index S = problem.dict.modalities();
    if (d > max_d || d > 30) throw TooLarge("bruteforce_encode: dictionary too large to enumerate");
    if (problem.prior.lambda2 <= 0) {
        throw ValidationError("bruteforce_encode requires lambda2 > 0");
    }
    const double l1 = problem.prior.group_weight();
    const double l1p = problem.prior.entry_weight();
    const double l2 = problem.prior.lambda2;

    double best_obj = objective_value(problem, Mat::Zero(d, S));
    Mat best = Mat::Zero(d, S);

    const unsigned long masks = 1ul << d;
    for (unsigned long mask = 1; mask < masks; ++mask) {
        std::vector<Index> rows;
        for (Index j = 0; j < d; ++j) {
            if (mask & (1ul << j)) rows.push_back(j);
        }
        const Index m = static_cast<Index>(rows.size());

        std::vector<Mat> subG(static_cast<std::size_t>(S));
        std::vector<Vec> subb(static_cast<std::size_t>(S));
        for (Index s = 0; s < S; ++s) {
            const Mat& D = problem.dict.dicts[static_cast<std::size_t>(s)];
            Mat sub(D.rows(), m);
            for (Index i = 0; i < m; ++i) sub.col(i) = D.col(rows[static_cast<std::size_t>(i)]);
            subG[static_cast<std::size_t>(s)] = sub.transpose() * sub;
            subb[static_cast<std::size_t>(s)] =
                sub.transpose() * problem.features[static_cast<std::size_t>(s)];
        }

        // reweighted ridge on the restricted rows
        Mat A = Mat::Zero(m, S);
        for (Index s = 0; s < S; ++s) {
            Mat M = subG[static_cast<std::size_t>(s)] + (l2 + l1 + l1p) * Mat::Identity(m, m);
            A.col(s) = M.ldlt().solve(subb[static_cast<std::size_t>(s)]);
        }
        const double weight_eps = 1e-12;
        for (int it = 0; it < 5000; ++it) {
            Vec row_w(m);
            for (Index i = 0; i < m; ++i) {
                row_w(i) = l1 > 0 ? l1 / std::max(A.row(i).norm(), weight_eps) : 0.0;
            }
            double delta = 0.0;
            for (Index s = 0; s < S; ++s) {
                Mat M = subG[static_cast<std::size_t>(s)] + l2 * Mat::Identity(m, m);
                for (Index i = 0; i < m; ++i) {
                    double w = row_w(i);
                    if (l1p > 0) w += l1p / std::max(std::abs(A(i, s)), weight_eps);
                    M(i, i) += w;
                }
                Vec next = M.ldlt().solve(subb[static_cast<std::size_t>(s)]);
                delta = std::max(delta, (next - A.col(s)).cwiseAbs().maxCoeff());
                A.col(s) = next;
            }
            if (delta <= 1e-14 * (1.0 + A.cwiseAbs().maxCoeff())) break;
        }

        Mat padded = Mat::Zero(d, S);
        for (Index i = 0; i < m; ++i) padded.row(rows[static_cast<std::size_t>(i)]) = A.row(i);
        const double obj = objective_value(problem, padded);
        if (obj < best_obj) {
            best_obj = obj;
            best = padded;
        }
    }

    EncodeResult result;
    result.codes = best;
    result.objective = best_obj;
    result.kkt_residual = kkt_residual(problem, best);
    result.iterations = static_cast<int>(masks);
    result.converged = true;
    return result;
}

namespace {

std::vector<Index> support_pattern(const Mat& A) {
    std::vector<Index> rows;
    for (Index j = 0; j < A.rows(); ++j) {
        if (A.row(j).norm() > 1e-12) rows.push_back(j);
    }
    return rows;
}

double total_loss(const ClassifierBank& bank, int y_class, const Mat& codes) {
    double loss = 0.0;
    for (Index s = 0; s < codes.cols(); ++s) {
        loss += head_loss(bank.head, y_class, bank.weights[static_cast<std::size_t>(s)],
                          codes.col(s)).value;
    }
    return loss;
}

}  // namespace

std::vector<Mat> fd_dictionary_gradient(const std::vector<Vec>& x, int y_class,
                                        const MultimodalDictionary& dict,
                                        const ClassifierBank& bank, const PriorSpec& prior,
                                        const FdOptions& opts) {
    if (opts.epsilon < 1e-7 || opts.epsilon > 1e-4) {
        throw ValidationError("fd epsilon must lie in [1e-7, 1e-4]");
    }
    EncodeOptions eopts;
    eopts.tol = opts.encode_tol;
    eopts.max_iter = opts.encode_max_iter;

    EncodeProblem base{x, dict, prior};
    const EncodeResult base_enc = joint_encode(base, eopts);
    const std::vector<Index> base_support = support_pattern(base_enc.codes);

    EncodeOptions warm = eopts;
    warm.warm_z = &base_enc.codes;

    std::vector<Mat> grads;
    for (int s = 0; s < dict.modalities(); ++s) {
        const Mat& D = dict.dicts[static_cast<std::size_t>(s)];
        Mat g(D.rows(), D.cols());
        for (Index i = 0; i < D.rows(); ++i) {
            for (Index j = 0; j < D.cols(); ++j) {
                double side[2];
                for (int k = 0; k < 2; ++k) {
                    EncodeProblem p = base;
                    p.dict.dicts[static_cast<std::size_t>(s)](i, j) +=
                        (k == 0 ? opts.epsilon : -opts.epsilon);
                    const EncodeResult enc = joint_encode(p, warm);
                    if (support_pattern(enc.codes) != base_support) {
                        throw TransitionPoint("fd_dictionary_gradient: active set changed");
                    }
                    side[k] = total_loss(bank, y_class, enc.codes);
                }
                g(i, j) = (side[0] - side[1]) / (2.0 * opts.epsilon);
            }
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

std::vector<Mat> fd_classifier_gradient(const std::vector<Vec>& x, int y_class,
                                        const MultimodalDictionary& dict,
                                        const ClassifierBank& bank, const PriorSpec& prior,
                                        const FdOptions& opts) {
    EncodeOptions eopts;
    eopts.tol = opts.encode_tol;
    eopts.max_iter = opts.encode_max_iter;
    const EncodeResult enc = joint_encode(EncodeProblem{x, dict, prior}, eopts);

    auto objective = [&](const ClassifierBank& b) {
        double v = total_loss(b, y_class, enc.codes);
        for (const Mat& W : b.weights) v += 0.5 * b.nu * W.squaredNorm();
        return v;
    };

    std::vector<Mat> grads;
    for (int s = 0; s < bank.modalities(); ++s) {
        const Mat& W = bank.weights[static_cast<std::size_t>(s)];
        Mat g(W.rows(), W.cols());
        for (Index i = 0; i < W.rows(); ++i) {
            for (Index j = 0; j < W.cols(); ++j) {
                ClassifierBank plus = bank;
                plus.weights[static_cast<std::size_t>(s)](i, j) += opts.epsilon;
                ClassifierBank minus = bank;
                minus.weights[static_cast<std::size_t>(s)](i, j) -= opts.epsilon;
                g(i, j) = (objective(plus) - objective(minus)) / (2.0 * opts.epsilon);
            }
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

Mat single_modal_dictionary_gradient(const Vec& x, const Mat& D, const Vec& alpha,
                                     const Vec& grad_alpha, double lambda2, double active_tol) {
    std::vector<Index> act;
    for (Index j = 0; j < alpha.size(); ++j) {
        if (std::abs(alpha(j)) > active_tol) act.push_back(j);
    }
    if (act.empty()) return Mat::Zero(D.rows(), D.cols());

    const Index m = static_cast<Index>(act.size());
    Mat Dact(D.rows(), m);
    Vec gact(m);
    for (Index i = 0; i < m; ++i) {
        Dact.col(i) = D.col(act[static_cast<std::size_t>(i)]);
        gact(i) = grad_alpha(act[static_cast<std::size_t>(i)]);
    }
    const Mat M = Dact.transpose() * Dact + lambda2 * Mat::Identity(m, m);
    const Vec beta_act = M.ldlt().solve(gact);

    Vec beta = Vec::Zero(alpha.size());
    for (Index i = 0; i < m; ++i) beta(act[static_cast<std::size_t>(i)]) = beta_act(i);
    return (x - D * alpha) * beta.transpose() - (D * beta) * alpha.transpose();
}

bool OracleReport::pass() const {
    for (const OracleCheck& c : checks) {
        if (!c.pass) return false;
    }
    return true;
}

std::string OracleReport::to_string() const {
    std::ostringstream os;
    os << "instances=" << instances << " resampled=" << resampled << '\n';
    char line[256];
    for (const OracleCheck& c : checks) {
        std::snprintf(line, sizeof(line), "[%s] %s: %.3e (tolerance %.1e)\n",
                      c.pass ? "PASS" : "FAIL", c.name.c_str(), c.value, c.tolerance);
        os << line;
    }
    os << (pass() ? "gradcheck: PASS" : "gradcheck: FAIL") << '\n';
    return os.str();
}

namespace {

struct Instance {
    std::vector<Vec> x;
    MultimodalDictionary dict;
    ClassifierBank bank;
    PriorSpec prior;
    int y = 1;
};

constexpr double kGuardMargin = 1e-3;
constexpr double kActiveTol = 1e-6;

// One random task instance; returns false when it sits too close to a
// support transition and must be resampled.
bool try_make_instance(Rng& rng, Head head, Prior prior_kind, Instance& out) {
    const int S = 1 + static_cast<int>(rng.below(3));
    const Index d = 4 + static_cast<Index>(rng.below(9));
    const int K = head == Head::Logistic ? 2 : 2 + static_cast<int>(rng.below(4));

    MultimodalDictionary dict;
    std::vector<Vec> x;
    for (int s = 0; s < S; ++s) {
        const Index n = 4 + static_cast<Index>(rng.below(13));
        Mat D(n, d);
        for (Index j = 0; j < d; ++j) {
            for (Index i = 0; i < n; ++i) D(i, j) = rng.normal();
            D.col(j).normalize();
        }
        dict.dicts.push_back(std::move(D));
    }
    const Index support = 1 + static_cast<Index>(rng.below(3));
    std::vector<std::size_t> rows = rng.sample_without_replacement(static_cast<std::size_t>(d),
                                                                   static_cast<std::size_t>(support));
    for (int s = 0; s < S; ++s) {
        Vec code = Vec::Zero(d);
        for (std::size_t r : rows) {
            code(static_cast<Index>(r)) = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.5, 1.5);
        }
        Vec signal = dict.dicts[static_cast<std::size_t>(s)] * code;
        for (Index i = 0; i < signal.size(); ++i) signal(i) += 0.2 * rng.normal();
        x.push_back(normalize_sample(signal));
    }

    const double lmax = zero_threshold(x, dict);
    const double l2 = rng.uniform(0.05, 0.3);
    PriorSpec prior;
    if (prior_kind == Prior::L12) {
        prior = PriorSpec::l12(rng.uniform(0.25, 0.6) * lmax, l2);
    } else {
        prior = PriorSpec::mixed(rng.uniform(0.2, 0.45) * lmax, rng.uniform(0.08, 0.25) * lmax, l2);
    }

    EncodeOptions eopts;
    eopts.tol = 1e-10;
    eopts.max_iter = 100000;
    const EncodeResult enc = joint_encode(EncodeProblem{x, dict, prior}, eopts);
    if (!enc.converged) return false;

    const std::vector<Index> active = support_pattern(enc.codes);
    if (active.empty()) return false;

    // transition guards on the correlation residual
    Mat c(d, S);
    for (int s = 0; s < S; ++s) {
        const Mat& D = dict.dicts[static_cast<std::size_t>(s)];
        c.col(s) = D.transpose() *
                   (x[static_cast<std::size_t>(s)] - D * enc.codes.col(s));
    }
    c -= prior.lambda2 * enc.codes;
    const double l1 = prior.group_weight();
    const double l1p = prior.entry_weight();
    for (Index j = 0; j < d; ++j) {
        const double row_norm = enc.codes.row(j).norm();
        if (row_norm > 0) {
            if (row_norm < 10.0 * kActiveTol) return false;
            for (Index s = 0; s < S; ++s) {
                if (enc.codes(j, s) == 0.0) {
                    if (l1p - std::abs(c(j, s)) < kGuardMargin) return false;
                } else if (l1p > 0 && std::abs(enc.codes(j, s)) < 1e-5) {
                    return false;
                }
            }
        } else {
            double sq = 0.0;
            for (Index s = 0; s < S; ++s) {
                const double e = std::max(0.0, std::abs(c(j, s)) - l1p);
                sq += e * e;
            }
            if (l1 - std::sqrt(sq) < kGuardMargin) return false;
        }
    }

    ClassifierBank bank;
    bank.head = head;
    bank.nu = 1e-4;
    const Index wrows = head == Head::Logistic ? 1 : K;
    for (int s = 0; s < S; ++s) {
        Mat W(wrows, d);
        for (Index i = 0; i < W.rows(); ++i)
            for (Index j = 0; j < W.cols(); ++j) W(i, j) = 0.5 * rng.normal();
        bank.weights.push_back(std::move(W));
    }

    out.x = std::move(x);
    out.dict = std::move(dict);
    out.bank = std::move(bank);
    out.prior = prior;
    out.y = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(K)));
    return true;
}

double relative_error(const std::vector<Mat>& got, const std::vector<Mat>& want) {
    double num = 0.0, den = 1e-8;
    for (std::size_t i = 0; i < got.size(); ++i) {
        num = std::max(num, (got[i] - want[i]).cwiseAbs().maxCoeff());
        den = std::max(den, want[i].cwiseAbs().maxCoeff());
    }
    return num / den;
}

}  // namespace

OracleReport gradcheck(const GradCheckOptions& opts) {
    struct Slot {
        double dict_err = 0.0;
        double w_err = 0.0;
        int resampled = 0;
        bool ok = false;
    };
    std::vector<Slot> slots(static_cast<std::size_t>(opts.instances));

    const Head heads[3] = {Head::Logistic, Head::Softmax, Head::Quadratic};
    const Prior priors[2] = {Prior::L12, Prior::Mixed};

#pragma omp parallel for schedule(dynamic) if (opts.parallel)
    for (int i = 0; i < opts.instances; ++i) {
        Slot& slot = slots[static_cast<std::size_t>(i)];
        Rng rng(opts.seed + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(i + 1));
        const Head head = heads[i % 3];
        const Prior prior = priors[(i / 3) % 2];
        for (int attempt = 0; attempt < 60 && !slot.ok; ++attempt) {
            Instance inst;
            if (!try_make_instance(rng, head, prior, inst)) {
                ++slot.resampled;
                continue;
            }
            try {
                FdOptions fd;
                fd.epsilon = opts.epsilon;
                fd.active_tol = kActiveTol;

                EncodeOptions eopts;
                eopts.tol = 1e-10;
                eopts.max_iter = 100000;
                const EncodeResult enc =
                    joint_encode(EncodeProblem{inst.x, inst.dict, inst.prior}, eopts);
                const SampleGradients analytic = task_gradients(
                    inst.x, inst.y, inst.dict, inst.bank, enc.codes, inst.prior, kActiveTol);

                const std::vector<Mat> fd_dict = fd_dictionary_gradient(
                    inst.x, inst.y, inst.dict, inst.bank, inst.prior, fd);
                const std::vector<Mat> fd_w = fd_classifier_gradient(
                    inst.x, inst.y, inst.dict, inst.bank, inst.prior, fd);

                slot.dict_err = relative_error(analytic.dict, fd_dict);
                slot.w_err = relative_error(analytic.weights, fd_w);
                slot.ok = true;
            } catch (const TransitionPoint&) {
                ++slot.resampled;
            }
        }
    }

    OracleReport report;
    double max_dict = 0.0, max_w = 0.0;
    for (const Slot& slot : slots) {
        report.resampled += slot.resampled;
        if (!slot.ok) continue;
        ++report.instances;
        max_dict = std::max(max_dict, slot.dict_err);
        max_w = std::max(max_w, slot.w_err);
    }
    report.checks.push_back({"max relative error, dictionary gradient", max_dict, opts.tolerance,
                             max_dict < opts.tolerance});
    report.checks.push_back({"max relative error, classifier gradient", max_w, opts.tolerance,
                             max_w < opts.tolerance});
    report.checks.push_back({"instances evaluated", static_cast<double>(report.instances),
                             static_cast<double>(opts.instances),
                             report.instances == opts.instances});
    return report;
}

}  // namespace jsdl::oracle
