#include "jsdl/losses.hpp"

#include <cmath>

namespace jsdl {

namespace {

// log(1 + exp(t)) without overflow
double softplus(double t) {
    if (t > 0) return t + std::log1p(std::exp(-t));
    return std::log1p(std::exp(t));
}

// 1 / (1 + exp(t))
double inv_logit(double t) {
    if (t >= 0) {
        const double e = std::exp(-t);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(t));
}

}  // namespace

LossEval logistic_loss(int y, const Vec& w, const Vec& alpha) {
    if (y != 1 && y != -1) throw ValidationError("logistic_loss requires y in {-1,+1}");
    if (w.size() != alpha.size()) throw DimensionMismatch("logistic_loss: w and alpha sizes differ");
    const double margin = y * w.dot(alpha);
    const double slope = -y * inv_logit(margin);  // d value / d (w.alpha)
    LossEval out;
    out.value = softplus(-margin);
    out.grad_w = slope * alpha.transpose();  // 1 x d
    out.grad_alpha = slope * w;
    return out;
}

LossEval softmax_loss(int y, const Mat& W, const Vec& alpha) {
    const Index K = W.rows();
    if (y < 1 || y > K) throw ValidationError("softmax_loss requires 1 <= y <= K");
    if (W.cols() != alpha.size()) throw DimensionMismatch("softmax_loss: W and alpha sizes differ");
    Vec z = W * alpha;
    const double zmax = z.maxCoeff();
    Vec p = (z.array() - zmax).exp();
    const double total = p.sum();
    LossEval out;
    out.value = std::log(total) + zmax - z(y - 1);
    Vec q = p / total;
    q(y - 1) -= 1.0;
    out.grad_w = q * alpha.transpose();
    out.grad_alpha = W.transpose() * q;
    return out;
}

LossEval quadratic_loss(const Vec& y_vec, const Mat& W, const Vec& alpha) {
    if (y_vec.size() != W.rows()) throw DimensionMismatch("quadratic_loss: y and W sizes differ");
    if (W.cols() != alpha.size()) throw DimensionMismatch("quadratic_loss: W and alpha sizes differ");
    const Vec r = W * alpha - y_vec;
    LossEval out;
    out.value = 0.5 * r.squaredNorm();
    out.grad_w = r * alpha.transpose();
    out.grad_alpha = W.transpose() * r;
    return out;
}

Vec class_indicator(Index K, int y) {
    if (y < 1 || y > K) throw ValidationError("class index out of range");
    Vec q = Vec::Zero(K);
    q(y - 1) = 1.0;
    return q;
}

int binary_sign(int y_class) {
    if (y_class == 1) return 1;
    if (y_class == 2) return -1;
    throw ValidationError("binary head requires class labels in {1,2}");
}

LossEval head_loss(Head head, int y_class, const Mat& W, const Vec& alpha) {
    switch (head) {
        case Head::Logistic: {
            if (W.rows() != 1) throw DimensionMismatch("logistic head requires 1 x d weights");
            return logistic_loss(binary_sign(y_class), W.row(0).transpose(), alpha);
        }
        case Head::Softmax:
            return softmax_loss(y_class, W, alpha);
        case Head::Quadratic:
            return quadratic_loss(class_indicator(W.rows(), y_class), W, alpha);
    }
    throw ValidationError("unknown head");
}

double binary_score(const ClassifierBank& bank, const Mat& codes) {
    double score = 0.0;
    for (int s = 0; s < bank.modalities(); ++s) {
        score += bank.weights[static_cast<std::size_t>(s)].row(0).dot(codes.col(s).transpose());
    }
    return score;
}

int decide(const ClassifierBank& bank, const Mat& codes) {
    const int S = bank.modalities();
    if (codes.cols() != S) throw DimensionMismatch("decide: code columns differ from bank modalities");
    switch (bank.head) {
        case Head::Logistic:
            return binary_score(bank, codes) >= 0 ? 1 : 2;
        case Head::Softmax: {
            const Index K = bank.classes();
            Vec total = Vec::Zero(K);
            for (int s = 0; s < S; ++s) {
                Vec z = bank.weights[static_cast<std::size_t>(s)] * codes.col(s);
                const double zmax = z.maxCoeff();
                Vec p = (z.array() - zmax).exp();
                total += p / p.sum();
            }
            Index best = 0;
            for (Index k = 1; k < K; ++k) {
                if (total(k) > total(best)) best = k;
            }
            return static_cast<int>(best) + 1;
        }
        case Head::Quadratic: {
            const Index K = bank.classes();
            Vec cost = Vec::Zero(K);
            std::vector<Vec> z(static_cast<std::size_t>(S));
            for (int s = 0; s < S; ++s) {
                z[static_cast<std::size_t>(s)] = bank.weights[static_cast<std::size_t>(s)] * codes.col(s);
            }
            for (Index k = 0; k < K; ++k) {
                const Vec q = class_indicator(K, static_cast<int>(k) + 1);
                for (int s = 0; s < S; ++s) {
                    cost(k) += (q - z[static_cast<std::size_t>(s)]).squaredNorm();
                }
            }
            Index best = 0;
            for (Index k = 1; k < K; ++k) {
                if (cost(k) < cost(best)) best = k;
            }
            return static_cast<int>(best) + 1;
        }
    }
    throw ValidationError("unknown head");
}

}  // namespace jsdl
