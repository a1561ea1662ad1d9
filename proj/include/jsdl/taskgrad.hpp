#pragma once

/*
 * Gradients of the task loss through the joint sparse coding solution.
 *
 * On the active rows of A* the stationarity condition of the coding
 * problem is smooth, so the solution map can be differentiated
 * implicitly. The sensitivities solve one symmetric system
 *
 *   (Dhat^T Dhat + l1 Delta + l2 I) beta = g
 *
 * over the compressed index of (active atom, modality) pairs, where Dhat
 * stacks the active atoms block-diagonally per atom, Delta holds the
 * curvature of the row norms, and g is the loss gradient in the codes.
 * The dictionary gradient for modality s is then
 *
 *   (x^s - D^s a^s) beta_s^T - D^s beta_s a^sT
 *
 * with beta_s the modality-s column of the sensitivities scattered back
 * to atom positions.
 *
 * Index convention, locked by tests: the compressed index is atom-major
 * with the modality fastest, i.e. position j*S + s belongs to (active
 * atom j, modality s). This matches the column order of Dhat and the
 * layout of g. Under the mixed prior the system is restricted to the
 * positions whose coefficient is nonzero.
 */

#include <vector>

#include "jsdl/encode.hpp"
#include "jsdl/losses.hpp"
#include "jsdl/types.hpp"

namespace jsdl {

struct GradientWorkspace {
    std::vector<Index> active;  // ascending atom indices
    Mat dhat;                   // n x S|active|
    Mat delta;                  // S|active| x S|active|, block diagonal
    Vec g;                      // S|active|
    std::vector<Index> psi;     // nonzero-coefficient positions in the compressed index
    Mat beta;                   // d x S sensitivities, zero off the support
};

// n x S|active| block matrix; column j*S + s holds atom active[j] of
// modality s in that modality's row range. Throws EmptyActiveSet.
Mat build_dhat(const MultimodalDictionary& dict, const std::vector<Index>& active);

// Block-diagonal curvature of the row norms: for each active row a,
// (1/||a||) I - (1/||a||^3) a^T a. Throws DegenerateRow when a row norm
// is <= active_tol.
Mat build_delta(const Mat& A, const std::vector<Index>& active, double active_tol);

// positions j*S + s with A(active[j], s) != 0, ascending
std::vector<Index> psi_entries(const Mat& A, const std::vector<Index>& active);

// expanded index set over the full d x S layout: union over active j of
// {j, j+d, ..., j+(S-1)d}, ascending
std::vector<Index> upsilon_expanded(const std::vector<Index>& active, Index d, Index S);

Index nonzero_entry_count(const Mat& A);

// g[j*S + s] = d(sum_s l)/d A(active[j], s)
Vec stack_active_gradients(const std::vector<LossEval>& evals, const std::vector<Index>& active);

// Solve the sensitivity system and scatter the solution into a d x S
// matrix. Mixed/L11 priors restrict the system to ws.psi. Throws
// RankDeficient when the system matrix is singular (possible only with
// lambda2 = 0); the caller should retry with lambda2 > 0.
Mat solve_beta(const GradientWorkspace& ws, const PriorSpec& prior, Index d);

std::vector<Mat> dictionary_gradient(const std::vector<Vec>& x, const Mat& codes, const Mat& beta,
                                     const MultimodalDictionary& dict);

// per-modality grad_w from the losses plus the nu ridge term
std::vector<Mat> classifier_gradient(const std::vector<LossEval>& evals, double nu,
                                     const ClassifierBank& bank);

// One-sample pipeline: losses at the codes, sensitivity solve, both
// gradients. An empty active set yields zero dictionary gradients.
struct SampleGradients {
    std::vector<Mat> dict;     // n^s x d each
    std::vector<Mat> weights;  // shaped like the bank
    double loss = 0.0;         // sum_s l_su, without the nu term
    Index active_count = 0;
};

SampleGradients task_gradients(const std::vector<Vec>& x, int y_class,
                               const MultimodalDictionary& dict, const ClassifierBank& bank,
                               const Mat& codes, const PriorSpec& prior, double active_tol);

}  // namespace jsdl
