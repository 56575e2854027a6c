#include "dimml/fdcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dimml/errors.hpp"

namespace dimml {

namespace {

double eval_constant(const LossBuilder& fn, const std::vector<Tensor>& params) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (const Tensor& p : params) {
        vars.push_back(Tape::constant(p));
    }
    double v = fn(tape, vars).value.value();
    if (!std::isfinite(v)) {
        throw numeric_error("finite_difference_check: non-finite loss value");
    }
    return v;
}

}  // namespace

double finite_difference_check(const LossBuilder& fn, const std::vector<Tensor>& params,
                               double eps) {
    if (eps <= 0.0) {
        throw validation_error("finite_difference_check: eps must be positive");
    }

    // Analytic pass.
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (const Tensor& p : params) {
        vars.push_back(tape.leaf(p));
    }
    Var loss = fn(tape, vars);
    if (!std::isfinite(loss.value.value())) {
        throw numeric_error("finite_difference_check: non-finite loss value");
    }
    GradMap grads = tape.backward(loss);

    double max_err = 0.0;
    std::vector<Tensor> perturbed = params;
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor analytic = grads.grad(vars[p]);
        for (std::size_t e = 0; e < params[p].numel(); ++e) {
            double orig = perturbed[p][e];
            perturbed[p][e] = orig + eps;
            double fp = eval_constant(fn, perturbed);
            perturbed[p][e] = orig - eps;
            double fm = eval_constant(fn, perturbed);
            perturbed[p][e] = orig;
            double numeric = (fp - fm) / (2.0 * eps);
            double err = std::abs(analytic[e] - numeric) / std::max(1.0, std::abs(analytic[e]));
            max_err = std::max(max_err, err);
        }
    }
    return max_err;
}

}  // namespace dimml
