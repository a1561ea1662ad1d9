#include "jsdl/types.hpp"

#include <cmath>
#include <sstream>

namespace jsdl {

std::string to_string(Head head) {
    switch (head) {
        case Head::Logistic: return "logistic";
        case Head::Softmax: return "softmax";
        case Head::Quadratic: return "quadratic";
    }
    return "?";
}

std::string to_string(Prior prior) {
    switch (prior) {
        case Prior::L12: return "l12";
        case Prior::L11: return "l11";
        case Prior::Mixed: return "mixed";
    }
    return "?";
}

Head head_from_string(const std::string& name) {
    if (name == "logistic") return Head::Logistic;
    if (name == "softmax") return Head::Softmax;
    if (name == "quadratic") return Head::Quadratic;
    throw ValidationError("unknown loss head: " + name);
}

Prior prior_from_string(const std::string& name) {
    if (name == "l12") return Prior::L12;
    if (name == "l11") return Prior::L11;
    if (name == "mixed") return Prior::Mixed;
    throw ValidationError("unknown prior: " + name);
}

void Hyperparams::validate(Prior prior) const {
    if (lambda1 < 0 || lambda1p < 0 || lambda2 < 0 || nu < 0) {
        throw ValidationError("regularization weights must be nonnegative");
    }
    switch (prior) {
        case Prior::L12:
            if (lambda1 <= 0) throw ValidationError("prior l12 requires lambda1 > 0");
            break;
        case Prior::L11:
            if (lambda1p <= 0) throw ValidationError("prior l11 requires lambda1p > 0");
            break;
        case Prior::Mixed:
            // lambda1 = 0 or lambda1p = 0 degenerates to the pure priors and
            // stays legal; both zero leaves no sparsity-inducing term.
            if (lambda1 <= 0 && lambda1p <= 0) {
                throw ValidationError("prior mixed requires lambda1 > 0 or lambda1p > 0");
            }
            break;
    }
    if (rho < 0) throw ValidationError("rho must be nonnegative");
    if (t0 < 0) throw ValidationError("t0 must be >= 1, or 0 for the default schedule");
    if (epochs < 1) throw ValidationError("epochs must be >= 1");
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (active_tol <= 0) throw ValidationError("active_tol must be positive");
    if (admm_tol <= 0) throw ValidationError("admm_tol must be positive");
    if (admm_max_iter < 1) throw ValidationError("admm_max_iter must be >= 1");
}

Vec normalize_sample(const Vec& x) {
    if (x.size() < 2) throw ValidationError("normalize_sample requires length >= 2");
    Vec centered = x.array() - x.mean();
    const double norm = centered.norm();
    if (norm < 1e-12) throw ConstantVector("normalize_sample: centered vector has norm < 1e-12");
    return centered / norm;
}

std::string DictionaryReport::to_string() const {
    if (issues.empty()) return "dictionary ok";
    std::ostringstream os;
    for (const Issue& issue : issues) {
        os << issue.what << '\n';
    }
    return os.str();
}

DictionaryReport validate_dictionary(const MultimodalDictionary& dict) {
    DictionaryReport report;
    const Index d = dict.atoms();
    for (int s = 0; s < dict.modalities(); ++s) {
        const Mat& D = dict.dicts[static_cast<std::size_t>(s)];
        if (D.cols() != d) {
            DictionaryReport::Issue issue;
            issue.modality = s + 1;
            issue.value = static_cast<double>(D.cols());
            std::ostringstream os;
            os << "modality " << s + 1 << ": atom count " << D.cols()
               << " differs from modality 1 atom count " << d;
            issue.what = os.str();
            report.issues.push_back(std::move(issue));
            continue;
        }
        for (Index k = 0; k < D.cols(); ++k) {
            const double norm = D.col(k).norm();
            if (norm > 1.0 + 1e-12) {
                DictionaryReport::Issue issue;
                issue.modality = s + 1;
                issue.atom = k;
                issue.value = norm;
                std::ostringstream os;
                os << "modality " << s + 1 << ", atom " << k << ": l2 norm " << norm << " > 1";
                issue.what = os.str();
                report.issues.push_back(std::move(issue));
            }
            if (!D.col(k).allFinite()) {
                DictionaryReport::Issue issue;
                issue.modality = s + 1;
                issue.atom = k;
                issue.what = "non-finite atom entries";
                report.issues.push_back(std::move(issue));
            }
        }
    }
    return report;
}

}  // namespace jsdl
