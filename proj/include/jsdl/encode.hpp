#pragma once

/*
 * Joint sparse coding across S modalities:
 *
 *   min_A  1/2 sum_s ||x^s - D^s a^s||^2
 *          + l1 sum_j ||A_{j,.}||_2  +  l1' ||A||_1  +  l2/2 ||A||_F^2
 *
 * where column a^s of the d x S matrix A codes modality s. The row-group
 * term couples the modalities (shared atom supports), the entrywise term
 * loosens the coupling, the ridge makes the minimizer unique.
 *
 * Solved by ADMM on the splitting A = Z: the A-step is a per-modality
 * ridge solve against a cached Cholesky factor, the Z-step the proximal
 * operator of the penalty (entrywise shrink, then row shrink), plus
 * residual-balancing adaptation of the penalty parameter. Convergence is
 * declared only once the subgradient optimality residual of the iterate
 * falls below the requested tolerance, so `converged` implies
 * `kkt_residual <= tol`.
 */

#include <vector>

#include "jsdl/types.hpp"

namespace jsdl {

struct PriorSpec {
    Prior prior = Prior::L12;
    double lambda1 = 0.0;
    double lambda1p = 0.0;
    double lambda2 = 0.0;

    static PriorSpec l12(double l1, double l2 = 0.0) { return {Prior::L12, l1, 0.0, l2}; }
    static PriorSpec l11(double l1p, double l2 = 0.0) { return {Prior::L11, 0.0, l1p, l2}; }
    static PriorSpec mixed(double l1, double l1p, double l2 = 0.0) {
        return {Prior::Mixed, l1, l1p, l2};
    }

    // weights actually applied; the prior selector zeroes the unused term
    double group_weight() const { return prior == Prior::L11 ? 0.0 : lambda1; }
    double entry_weight() const { return prior == Prior::L12 ? 0.0 : lambda1p; }

    void validate() const;
};

struct EncodeProblem {
    std::vector<Vec> features;
    MultimodalDictionary dict;
    PriorSpec prior;

    void validate() const;
};

struct EncodeOptions {
    double tol = 1e-8;   // absolute and relative residual tolerance, and the KKT gate
    int max_iter = 2000;
    double rho = 1.0;    // initial ADMM penalty
    bool adapt_rho = true;
    const Mat* warm_z = nullptr;  // optional d x S starting points
    const Mat* warm_u = nullptr;
};

struct EncodeResult {
    Mat codes;  // d x S, exact zeros off the support
    double objective = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Solves (D^T D + sigma I) x = rhs against a Cholesky factor held on the
// smaller side: the d x d Gram directly when d <= n, otherwise the n x n
// system through (D^T D + sigma I)^-1 = (I - D^T (D D^T + sigma I)^-1 D) / sigma,
// which keeps the per-solve cost linear in the atom count.
struct RidgeSolver {
    bool dual = false;
    double sigma = 0.0;
    Eigen::LLT<Mat> llt;
    const Mat* D = nullptr;  // borrowed; must outlive the solver

    void build(const Mat& dict_matrix, double sigma_value);
    Vec solve(const Vec& rhs) const;
};

// Per-dictionary solver state shared across a mini-batch: the ridge
// factorizations at the construction penalty. Read-only after
// construction; concurrent encodes may share one instance.
class EncoderContext {
public:
    EncoderContext(const MultimodalDictionary& dict, double lambda2, double rho = 1.0);

    const MultimodalDictionary& dict() const { return dict_; }
    double lambda2() const { return lambda2_; }
    double rho() const { return rho_; }
    const RidgeSolver& solver(int s) const { return solvers_[static_cast<std::size_t>(s)]; }

private:
    MultimodalDictionary dict_;
    double lambda2_;
    double rho_;
    std::vector<RidgeSolver> solvers_;
};

EncodeResult joint_encode(const EncoderContext& ctx, const std::vector<Vec>& x,
                          const PriorSpec& prior, const EncodeOptions& opts = {});
EncodeResult joint_encode(const EncodeProblem& problem, const EncodeOptions& opts = {});

// rows of A with l2 norm > tol, ascending
std::vector<Index> active_rows(const Mat& A, double tol);

double objective_value(const std::vector<Vec>& x, const MultimodalDictionary& dict,
                       const PriorSpec& prior, const Mat& A);
double objective_value(const EncodeProblem& problem, const Mat& A);

// Max over rows of the distance between the correlation residual and the
// penalty subdifferential; zero exactly at a minimizer. Entries equal to
// zero are treated as off-support.
double kkt_residual(const std::vector<Vec>& x, const MultimodalDictionary& dict,
                    const PriorSpec& prior, const Mat& A);
double kkt_residual(const EncodeProblem& problem, const Mat& A);

// Smallest l1 at which the l12-prior solution is exactly zero:
// max_j || [d_j^1T x^1, ..., d_j^ST x^S] ||_2.
double zero_threshold(const std::vector<Vec>& x, const MultimodalDictionary& dict);

// prox of  t_group * sum_j ||row_j||_2 + t_entry * ||.||_1  (entrywise
// shrink first, then row shrink)
Mat prox_penalty(Mat v, double t_group, double t_entry);

}  // namespace jsdl
