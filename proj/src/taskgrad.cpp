#include "jsdl/taskgrad.hpp"

#include <algorithm>
#include <cmath>

namespace jsdl {

Mat build_dhat(const MultimodalDictionary& dict, const std::vector<Index>& active) {
    if (active.empty()) throw EmptyActiveSet("build_dhat: empty active set");
    const Index S = dict.modalities();
    const Index d = dict.atoms();
    Index n = 0;
    for (int s = 0; s < S; ++s) n += dict.feature_dim(s);

    Mat dhat = Mat::Zero(n, S * static_cast<Index>(active.size()));
    for (std::size_t jidx = 0; jidx < active.size(); ++jidx) {
        const Index j = active[jidx];
        if (j < 0 || j >= d) throw ValidationError("build_dhat: atom index out of range");
        Index row = 0;
        for (Index s = 0; s < S; ++s) {
            const Mat& D = dict.dicts[static_cast<std::size_t>(s)];
            dhat.block(row, static_cast<Index>(jidx) * S + s, D.rows(), 1) = D.col(j);
            row += D.rows();
        }
    }
    return dhat;
}

Mat build_delta(const Mat& A, const std::vector<Index>& active, double active_tol) {
    const Index S = A.cols();
    const Index m = static_cast<Index>(active.size());
    Mat delta = Mat::Zero(S * m, S * m);
    for (Index jidx = 0; jidx < m; ++jidx) {
        const Eigen::RowVectorXd a = A.row(active[static_cast<std::size_t>(jidx)]);
        const double norm = a.norm();
        if (norm <= active_tol) {
            throw DegenerateRow("build_delta: row norm below active_tol");
        }
        Mat block = Mat::Identity(S, S) / norm - (a.transpose() * a) / (norm * norm * norm);
        delta.block(jidx * S, jidx * S, S, S) = block;
    }
    return delta;
}

std::vector<Index> psi_entries(const Mat& A, const std::vector<Index>& active) {
    const Index S = A.cols();
    std::vector<Index> psi;
    for (std::size_t jidx = 0; jidx < active.size(); ++jidx) {
        for (Index s = 0; s < S; ++s) {
            if (A(active[jidx], s) != 0.0) psi.push_back(static_cast<Index>(jidx) * S + s);
        }
    }
    return psi;
}

std::vector<Index> upsilon_expanded(const std::vector<Index>& active, Index d, Index S) {
    std::vector<Index> out;
    out.reserve(active.size() * static_cast<std::size_t>(S));
    for (Index s = 0; s < S; ++s) {
        for (Index j : active) out.push_back(j + s * d);
    }
    std::sort(out.begin(), out.end());
    return out;
}

Index nonzero_entry_count(const Mat& A) {
    Index count = 0;
    for (Index j = 0; j < A.rows(); ++j) {
        for (Index s = 0; s < A.cols(); ++s) {
            if (A(j, s) != 0.0) ++count;
        }
    }
    return count;
}

Vec stack_active_gradients(const std::vector<LossEval>& evals, const std::vector<Index>& active) {
    const Index S = static_cast<Index>(evals.size());
    Vec g(S * static_cast<Index>(active.size()));
    for (std::size_t jidx = 0; jidx < active.size(); ++jidx) {
        for (Index s = 0; s < S; ++s) {
            g(static_cast<Index>(jidx) * S + s) = evals[static_cast<std::size_t>(s)].grad_alpha(active[jidx]);
        }
    }
    return g;
}

namespace {

// Symmetric solve with rank-deficiency detection: LDLT first, a
// rank-revealing decomposition as fallback.
Vec symmetric_solve(const Mat& M, const Vec& rhs) {
    Eigen::LDLT<Mat> ldlt(M);
    bool suspicious = ldlt.info() != Eigen::Success;
    if (!suspicious) {
        const Vec diag = ldlt.vectorD();
        const double dmax = diag.cwiseAbs().maxCoeff();
        const double dmin = diag.minCoeff();
        // negative or collapsed pivots: not positive definite
        suspicious = !(dmin > dmax * 1e-13) || dmax <= 0.0;
    }
    if (!suspicious) {
        Vec sol = ldlt.solve(rhs);
        if (sol.allFinite()) return sol;
        suspicious = true;
    }
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(M);
    cod.setThreshold(1e-12);
    if (cod.rank() < M.rows()) {
        throw RankDeficient("sensitivity system is singular; retry with lambda2 > 0");
    }
    Vec sol = cod.solve(rhs);
    if (!sol.allFinite()) throw RankDeficient("sensitivity solve produced non-finite values");
    return sol;
}

}  // namespace

Mat solve_beta(const GradientWorkspace& ws, const PriorSpec& prior, Index d) {
    if (ws.active.empty()) throw EmptyActiveSet("solve_beta: empty active set");
    const Index S = ws.dhat.cols() / static_cast<Index>(ws.active.size());
    Mat beta = Mat::Zero(d, S);

    const double l1 = prior.group_weight();
    Mat M = ws.dhat.transpose() * ws.dhat;
    if (l1 > 0) M += l1 * ws.delta;
    if (prior.lambda2 > 0) M += prior.lambda2 * Mat::Identity(M.rows(), M.cols());

    auto scatter = [&](const std::vector<Index>& pos, const Vec& values) {
        for (std::size_t i = 0; i < pos.size(); ++i) {
            const Index p = pos[i];
            beta(ws.active[static_cast<std::size_t>(p / S)], p % S) = values(static_cast<Index>(i));
        }
    };

    if (prior.prior == Prior::L12) {
        Vec sol = symmetric_solve(M, ws.g);
        std::vector<Index> all(static_cast<std::size_t>(M.rows()));
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<Index>(i);
        scatter(all, sol);
        return beta;
    }

    // Mixed / L11: restrict to the nonzero coefficients of the active rows
    if (ws.psi.empty()) return beta;
    const Index p = static_cast<Index>(ws.psi.size());
    Mat Mp(p, p);
    Vec gp(p);
    for (Index r = 0; r < p; ++r) {
        gp(r) = ws.g(ws.psi[static_cast<std::size_t>(r)]);
        for (Index c = 0; c < p; ++c) {
            Mp(r, c) = M(ws.psi[static_cast<std::size_t>(r)], ws.psi[static_cast<std::size_t>(c)]);
        }
    }
    Vec sol = symmetric_solve(Mp, gp);
    scatter(ws.psi, sol);
    return beta;
}

std::vector<Mat> dictionary_gradient(const std::vector<Vec>& x, const Mat& codes, const Mat& beta,
                                     const MultimodalDictionary& dict) {
    const Index S = codes.cols();
    std::vector<Mat> grads;
    grads.reserve(static_cast<std::size_t>(S));
    for (Index s = 0; s < S; ++s) {
        const std::size_t su = static_cast<std::size_t>(s);
        const Mat& D = dict.dicts[su];
        const Vec resid = x[su] - D * codes.col(s);
        const Vec bs = beta.col(s);
        grads.push_back(resid * bs.transpose() - (D * bs) * codes.col(s).transpose());
    }
    return grads;
}

std::vector<Mat> classifier_gradient(const std::vector<LossEval>& evals, double nu,
                                     const ClassifierBank& bank) {
    std::vector<Mat> grads;
    grads.reserve(evals.size());
    for (std::size_t s = 0; s < evals.size(); ++s) {
        grads.push_back(evals[s].grad_w + nu * bank.weights[s]);
    }
    return grads;
}

SampleGradients task_gradients(const std::vector<Vec>& x, int y_class,
                               const MultimodalDictionary& dict, const ClassifierBank& bank,
                               const Mat& codes, const PriorSpec& prior, double active_tol) {
    const Index S = codes.cols();
    SampleGradients out;

    std::vector<LossEval> evals;
    evals.reserve(static_cast<std::size_t>(S));
    for (Index s = 0; s < S; ++s) {
        evals.push_back(head_loss(bank.head, y_class, bank.weights[static_cast<std::size_t>(s)],
                                  codes.col(s)));
        out.loss += evals.back().value;
    }
    out.weights = classifier_gradient(evals, bank.nu, bank);

    GradientWorkspace ws;
    ws.active = active_rows(codes, active_tol);
    out.active_count = static_cast<Index>(ws.active.size());
    if (ws.active.empty()) {
        // alpha* is identically zero in a neighborhood, so the chain rule
        // gives exactly zero
        for (Index s = 0; s < S; ++s) {
            const Mat& D = dict.dicts[static_cast<std::size_t>(s)];
            out.dict.push_back(Mat::Zero(D.rows(), D.cols()));
        }
        return out;
    }

    ws.dhat = build_dhat(dict, ws.active);
    ws.delta = build_delta(codes, ws.active, active_tol);
    ws.g = stack_active_gradients(evals, ws.active);
    if (prior.prior != Prior::L12) ws.psi = psi_entries(codes, ws.active);
    ws.beta = solve_beta(ws, prior, dict.atoms());
    out.dict = dictionary_gradient(x, codes, ws.beta, dict);
    return out;
}

}  // namespace jsdl
