#pragma once

/*
 * Convex loss heads l(y, W, alpha) with gradients in both the classifier
 * parameters and the code, plus the fused decision rules that sum
 * per-modality scores.
 */

#include "jsdl/types.hpp"

namespace jsdl {

struct LossEval {
    double value = 0.0;
    Mat grad_w;      // same shape as W
    Vec grad_alpha;  // length d
};

// y in {-1, +1};  log(1 + exp(-y w.alpha)), stable for large margins
LossEval logistic_loss(int y, const Vec& w, const Vec& alpha);

// y in {1..K};  -log softmax(W alpha)_y with log-sum-exp stabilization
LossEval softmax_loss(int y, const Mat& W, const Vec& alpha);

// y_vec a one-hot indicator;  1/2 ||y_vec - W alpha||^2
LossEval quadratic_loss(const Vec& y_vec, const Mat& W, const Vec& alpha);

// indicator vector q^y (1-based y)
Vec class_indicator(Index K, int y);

// class 1 -> +1, class 2 -> -1
int binary_sign(int y_class);

// dispatch on the head; y_class is 1-based (logistic requires K = 2)
LossEval head_loss(Head head, int y_class, const Mat& W, const Vec& alpha);

// Fused decision over the columns of `codes` (one per modality).
// Returns a 1-based class; the logistic head maps +1 -> 1, -1 -> 2.
// Ties break toward the smaller class index (logistic tie -> +1).
int decide(const ClassifierBank& bank, const Mat& codes);

// sum_s w^sT alpha^s, the binary fused score
double binary_score(const ClassifierBank& bank, const Mat& codes);

}  // namespace jsdl
