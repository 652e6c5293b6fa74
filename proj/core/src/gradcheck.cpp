#include "vqb/gradcheck.hpp"

#include <cmath>

#include "vqb/check.hpp"

namespace vqb {

Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f,
                        const Matrix& x, double eps) {
    VQB_REQUIRE(eps > 0.0, "finite_diff_grad needs a positive step");
    Matrix grad(x.rows(), x.cols());
    Matrix probe = x;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
            const double saved = probe(i, j);
            probe(i, j) = saved + eps;
            const double hi = f(probe);
            probe(i, j) = saved - eps;
            const double lo = f(probe);
            probe(i, j) = saved;
            if (!std::isfinite(hi) || !std::isfinite(lo))
                throw numeric_error("non-finite function value in finite_diff_grad");
            grad(i, j) = (hi - lo) / (2.0 * eps);
        }
    }
    return grad;
}

double relative_error(const Matrix& a, const Matrix& b, double floor) {
    VQB_REQUIRE(a.same_shape(b), "shape mismatch in relative_error");
    double num = 0.0;
    double den = floor;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num = std::max(num, std::abs(a.data()[i] - b.data()[i]));
        den = std::max(den, std::abs(b.data()[i]));
    }
    return num / den;
}

}  // namespace vqb
