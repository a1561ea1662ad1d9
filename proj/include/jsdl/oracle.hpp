#pragma once

/*
 * Independent reference implementations used to certify the main path.
 * Different algorithm families on purpose: a proximal-gradient solver on
 * the stacked group-lasso reformulation checks the ADMM solver,
 * exhaustive support enumeration checks active sets on small problems,
 * and central finite differences of the end-to-end task loss check the
 * implicit gradients. None of these share solver code with the paths
 * they certify. Performance is explicitly not a goal here.
 */

#include <cstdint>
#include <string>
#include <vector>

#include "jsdl/encode.hpp"
#include "jsdl/taskgrad.hpp"
#include "jsdl/types.hpp"

namespace jsdl::oracle {

// Proximal gradient (ISTA with backtracking) on the stacked problem
//   1/2 || x'' - D'' a ||^2 + l1 sum_j ||a_group_j|| + l1' ||a||_1
// where x'' and D'' absorb the ridge. Runs until its own KKT residual
// certificate passes `tol`; throws MaxIterations otherwise.
EncodeResult reference_encode(const EncodeProblem& problem, double tol = 1e-10,
                              long max_iter = 2000000);

// Global optimum by enumeration of all 2^d row supports; each restricted
// smooth problem is solved by reweighted ridge iterations. Requires
// d <= max_d (throws TooLarge) and lambda2 > 0.
EncodeResult bruteforce_encode(const EncodeProblem& problem, int max_d = 8);

struct FdOptions {
    double epsilon = 1e-5;      // central-difference step
    double encode_tol = 1e-11;  // solver tolerance for the re-encodes
    int encode_max_iter = 200000;
    double active_tol = 1e-6;
};

// Central differences of sum_s l_su(y, w^s, alpha^s*(D)) in every
// dictionary entry, re-encoding at each perturbation. Throws
// TransitionPoint when a perturbation changes the active set.
std::vector<Mat> fd_dictionary_gradient(const std::vector<Vec>& x, int y_class,
                                        const MultimodalDictionary& dict,
                                        const ClassifierBank& bank, const PriorSpec& prior,
                                        const FdOptions& opts = {});

// Central differences of sum_s l_su + nu/2 sum_s ||W^s||^2 in the
// classifier entries; the codes do not depend on W, so no re-encode.
std::vector<Mat> fd_classifier_gradient(const std::vector<Vec>& x, int y_class,
                                        const MultimodalDictionary& dict,
                                        const ClassifierBank& bank, const PriorSpec& prior,
                                        const FdOptions& opts = {});

// S=1 reduction of the task gradient, written directly from the
// single-modality formulas (active-column slice, scalar curvature term
// vanishes). Shares no code with taskgrad.
Mat single_modal_dictionary_gradient(const Vec& x, const Mat& D, const Vec& alpha,
                                     const Vec& grad_alpha, double lambda2, double active_tol);

struct OracleCheck {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct OracleReport {
    std::vector<OracleCheck> checks;
    int instances = 0;
    int resampled = 0;

    bool pass() const;
    std::string to_string() const;
};

struct GradCheckOptions {
    int instances = 100;
    std::uint64_t seed = 7;
    double epsilon = 1e-5;
    double tolerance = 1e-4;  // max relative error gate
    bool parallel = true;
};

// Randomized verification of the implicit gradients against finite
// differences over all heads and the l12/mixed priors, with rejection of
// instances near a support transition.
OracleReport gradcheck(const GradCheckOptions& opts);

}  // namespace jsdl::oracle
