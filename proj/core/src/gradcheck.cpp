#include "ovtok/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace ovtok {

namespace {

double eval_scalar(const ScalarFn& f) {
  Graph g;
  TensorPtr out = f(g);
  if (out->size() != 1) throw std::invalid_argument("grad_check: f must return a scalar");
  const double v = out->data[0];
  if (!std::isfinite(v)) throw std::runtime_error("grad_check: non-finite function value");
  return v;
}

}  // namespace

double grad_check(const ScalarFn& f, const std::vector<TensorPtr>& params, double eps) {
  for (const auto& p : params) p->grad.clear();
  Graph g;
  TensorPtr loss = f(g);
  if (loss->size() != 1) throw std::invalid_argument("grad_check: f must return a scalar");
  g.backward(loss);

  std::vector<std::vector<double>> analytic(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    analytic[i] = params[i]->grad.empty() ? std::vector<double>(params[i]->size(), 0.0)
                                          : params[i]->grad;
  }

  double max_rel = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    for (std::size_t c = 0; c < p.data.size(); ++c) {
      const double orig = p.data[c];
      p.data[c] = orig + eps;
      const double fp = eval_scalar(f);
      p.data[c] = orig - eps;
      const double fm = eval_scalar(f);
      p.data[c] = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic[i][c];
      double rel = 0.0;
      if (std::abs(a) >= 1e-8 || std::abs(numeric) >= 1e-8) {
        rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-6);
      }
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace ovtok
