#include "jsdl/encode.hpp"

#include <algorithm>
#include <cmath>

namespace jsdl {

void PriorSpec::validate() const {
    if (lambda1 < 0 || lambda1p < 0 || lambda2 < 0) {
        throw ValidationError("penalty weights must be nonnegative");
    }
    switch (prior) {
        case Prior::L12:
            if (lambda1 <= 0) throw ValidationError("prior l12 requires lambda1 > 0");
            break;
        case Prior::L11:
            if (lambda1p <= 0) throw ValidationError("prior l11 requires lambda1p > 0");
            break;
        case Prior::Mixed:
            if (lambda1 <= 0 && lambda1p <= 0) {
                throw ValidationError("prior mixed requires lambda1 > 0 or lambda1p > 0");
            }
            break;
    }
}

void EncodeProblem::validate() const {
    prior.validate();
    if (features.size() != dict.dicts.size()) {
        throw DimensionMismatch("sample has " + std::to_string(features.size()) +
                                " modalities, dictionary has " + std::to_string(dict.dicts.size()));
    }
    const Index d = dict.atoms();
    for (std::size_t s = 0; s < features.size(); ++s) {
        if (features[s].size() != dict.dicts[s].rows()) {
            throw DimensionMismatch("modality " + std::to_string(s + 1) + ": feature length " +
                                    std::to_string(features[s].size()) + " vs dictionary rows " +
                                    std::to_string(dict.dicts[s].rows()));
        }
        if (dict.dicts[s].cols() != d) {
            throw DimensionMismatch("modality " + std::to_string(s + 1) +
                                    ": atom count differs across modalities");
        }
        if (!features[s].allFinite() || !dict.dicts[s].allFinite()) {
            throw NonFinite("non-finite encode inputs");
        }
    }
}

void RidgeSolver::build(const Mat& dict_matrix, double sigma_value) {
    sigma = sigma_value;
    D = &dict_matrix;
    dual = dict_matrix.cols() > dict_matrix.rows();
    if (dual) {
        const Index n = dict_matrix.rows();
        llt.compute(Mat(dict_matrix * dict_matrix.transpose() + sigma * Mat::Identity(n, n)));
    } else {
        const Index d = dict_matrix.cols();
        llt.compute(
            Mat(dict_matrix.transpose() * dict_matrix + sigma * Mat::Identity(d, d)));
    }
}

Vec RidgeSolver::solve(const Vec& rhs) const {
    if (!dual) return llt.solve(rhs);
    return (rhs - D->transpose() * llt.solve(*D * rhs)) / sigma;
}

EncoderContext::EncoderContext(const MultimodalDictionary& dict, double lambda2, double rho)
    : dict_(dict), lambda2_(lambda2), rho_(rho) {
    const int S = dict_.modalities();
    solvers_.resize(static_cast<std::size_t>(S));
    for (int s = 0; s < S; ++s) {
        solvers_[static_cast<std::size_t>(s)].build(dict_.dicts[static_cast<std::size_t>(s)],
                                                    lambda2_ + rho_);
    }
}

Mat prox_penalty(Mat v, double t_group, double t_entry) {
    if (t_entry > 0) {
        v = v.unaryExpr([t_entry](double a) {
            const double m = std::abs(a) - t_entry;
            return m > 0 ? (a > 0 ? m : -m) : 0.0;
        });
    }
    if (t_group > 0) {
        for (Index j = 0; j < v.rows(); ++j) {
            const double norm = v.row(j).norm();
            if (norm <= t_group) {
                v.row(j).setZero();
            } else {
                v.row(j) *= 1.0 - t_group / norm;
            }
        }
    }
    return v;
}

std::vector<Index> active_rows(const Mat& A, double tol) {
    if (tol <= 0) throw ValidationError("active_rows requires tol > 0");
    std::vector<Index> out;
    for (Index j = 0; j < A.rows(); ++j) {
        if (A.row(j).norm() > tol) out.push_back(j);
    }
    return out;
}

double objective_value(const std::vector<Vec>& x, const MultimodalDictionary& dict,
                       const PriorSpec& prior, const Mat& A) {
    double fit = 0.0;
    for (std::size_t s = 0; s < x.size(); ++s) {
        fit += (x[s] - dict.dicts[s] * A.col(static_cast<Index>(s))).squaredNorm();
    }
    double value = 0.5 * fit;
    const double l1 = prior.group_weight();
    const double l1p = prior.entry_weight();
    if (l1 > 0) {
        for (Index j = 0; j < A.rows(); ++j) value += l1 * A.row(j).norm();
    }
    if (l1p > 0) value += l1p * A.array().abs().sum();
    if (prior.lambda2 > 0) value += 0.5 * prior.lambda2 * A.squaredNorm();
    return value;
}

double objective_value(const EncodeProblem& problem, const Mat& A) {
    return objective_value(problem.features, problem.dict, problem.prior, A);
}

double kkt_residual(const std::vector<Vec>& x, const MultimodalDictionary& dict,
                    const PriorSpec& prior, const Mat& A) {
    const Index d = A.rows();
    const Index S = A.cols();
    const double l1 = prior.group_weight();
    const double l1p = prior.entry_weight();

    // correlation residual c_j^s = d_j^sT (x^s - D^s a^s), minus the ridge pull
    Mat c(d, S);
    for (Index s = 0; s < S; ++s) {
        const Mat& D = dict.dicts[static_cast<std::size_t>(s)];
        c.col(s) = D.transpose() * (x[static_cast<std::size_t>(s)] - D * A.col(s));
    }
    if (prior.lambda2 > 0) c -= prior.lambda2 * A;

    double worst = 0.0;
    for (Index j = 0; j < d; ++j) {
        const double row_norm = A.row(j).norm();
        double res;
        if (row_norm > 0) {
            double sq = 0.0;
            for (Index s = 0; s < S; ++s) {
                const double a = A(j, s);
                const double cj = c(j, s);
                double e;
                if (a != 0.0) {
                    e = cj - l1 * a / row_norm - (a > 0 ? l1p : -l1p);
                } else {
                    e = std::max(0.0, std::abs(cj) - l1p);
                }
                sq += e * e;
            }
            res = std::sqrt(sq);
        } else {
            // distance from c_j to l1 * B2 + l1p * Binf
            double sq = 0.0;
            for (Index s = 0; s < S; ++s) {
                const double e = std::max(0.0, std::abs(c(j, s)) - l1p);
                sq += e * e;
            }
            res = std::max(0.0, std::sqrt(sq) - l1);
        }
        worst = std::max(worst, res);
    }
    return worst;
}

double kkt_residual(const EncodeProblem& problem, const Mat& A) {
    return kkt_residual(problem.features, problem.dict, problem.prior, A);
}

double zero_threshold(const std::vector<Vec>& x, const MultimodalDictionary& dict) {
    const Index d = dict.atoms();
    const Index S = dict.modalities();
    Mat c(d, S);
    for (Index s = 0; s < S; ++s) {
        c.col(s) = dict.dicts[static_cast<std::size_t>(s)].transpose() * x[static_cast<std::size_t>(s)];
    }
    double worst = 0.0;
    for (Index j = 0; j < d; ++j) worst = std::max(worst, c.row(j).norm());
    return worst;
}

namespace {

// A-step factors at penalties other than the context's; built lazily when
// residual balancing moves rho.
struct LocalFactors {
    double rho = -1.0;
    std::vector<RidgeSolver> solvers;

    void rebuild(const EncoderContext& ctx, double new_rho) {
        const int S = ctx.dict().modalities();
        solvers.resize(static_cast<std::size_t>(S));
        for (int s = 0; s < S; ++s) {
            solvers[static_cast<std::size_t>(s)].build(
                ctx.dict().dicts[static_cast<std::size_t>(s)], ctx.lambda2() + new_rho);
        }
        rho = new_rho;
    }
};

}  // namespace

EncodeResult joint_encode(const EncoderContext& ctx, const std::vector<Vec>& x,
                          const PriorSpec& prior, const EncodeOptions& opts) {
    prior.validate();
    if (prior.lambda2 != ctx.lambda2()) {
        throw ValidationError("encoder context built for a different lambda2");
    }
    const MultimodalDictionary& dict = ctx.dict();
    const Index d = dict.atoms();
    const Index S = dict.modalities();
    if (static_cast<Index>(x.size()) != S) {
        throw DimensionMismatch("sample modality count differs from dictionary");
    }

    std::vector<Vec> b(static_cast<std::size_t>(S));
    for (Index s = 0; s < S; ++s) {
        const std::size_t su = static_cast<std::size_t>(s);
        if (x[su].size() != dict.dicts[su].rows()) {
            throw DimensionMismatch("feature length differs from dictionary rows");
        }
        b[su] = dict.dicts[su].transpose() * x[su];
    }

    Mat Z = opts.warm_z ? *opts.warm_z : Mat::Zero(d, S);
    Mat U = opts.warm_u ? *opts.warm_u : Mat::Zero(d, S);
    Mat A = Z;

    double rho = opts.rho;
    LocalFactors local;
    const bool ctx_rho_usable = (ctx.rho() == rho);
    if (!ctx_rho_usable) local.rebuild(ctx, rho);

    const double tol = opts.tol;
    const double sqrt_dim = std::sqrt(static_cast<double>(d * S));
    const double l1 = prior.group_weight();
    const double l1p = prior.entry_weight();

    EncodeResult result;
    int iter = 0;
    for (iter = 1; iter <= opts.max_iter; ++iter) {
        for (Index s = 0; s < S; ++s) {
            const std::size_t su = static_cast<std::size_t>(s);
            const Vec rhs = b[su] + rho * (Z.col(s) - U.col(s));
            if (local.rho == rho) {
                A.col(s) = local.solvers[su].solve(rhs);
            } else {
                A.col(s) = ctx.solver(static_cast<int>(s)).solve(rhs);
            }
        }

        Mat Zprev = std::move(Z);
        Z = prox_penalty(A + U, l1 / rho, l1p / rho);
        U += A - Z;

        if (!A.allFinite() || !Z.allFinite()) {
            throw NonFinite("joint_encode: non-finite iterate");
        }

        const double primal = (A - Z).norm();
        const double dual = rho * (Z - Zprev).norm();
        const double eps_pri = sqrt_dim * tol + tol * std::max(A.norm(), Z.norm());
        const double eps_dual = sqrt_dim * tol + tol * rho * U.norm();

        if (primal <= eps_pri && dual <= eps_dual) {
            const double kkt = kkt_residual(x, dict, prior, Z);
            if (kkt <= tol) {
                result.kkt_residual = kkt;
                result.converged = true;
                break;
            }
        }

        // residual balancing: factor 2, trigger ratio 10
        if (opts.adapt_rho) {
            if (primal > 10.0 * dual && rho < 1e8) {
                rho *= 2.0;
                U /= 2.0;
                local.rebuild(ctx, rho);
            } else if (dual > 10.0 * primal && rho > 1e-8) {
                rho /= 2.0;
                U *= 2.0;
                local.rebuild(ctx, rho);
            }
        }
    }

    result.iterations = std::min(iter, opts.max_iter);
    result.codes = std::move(Z);
    if (!result.converged) {
        result.kkt_residual = kkt_residual(x, dict, prior, result.codes);
        result.converged = result.kkt_residual <= tol;
    }
    result.objective = objective_value(x, dict, prior, result.codes);
    return result;
}

EncodeResult joint_encode(const EncodeProblem& problem, const EncodeOptions& opts) {
    problem.validate();
    EncoderContext ctx(problem.dict, problem.prior.lambda2, opts.rho);
    return joint_encode(ctx, problem.features, problem.prior, opts);
}

}  // namespace jsdl
