#include "rmp/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace rmp {

namespace {

double rel_err(double analytic, double central) {
  return std::abs(analytic - central) / std::max(1e-8, std::abs(analytic) + std::abs(central));
}

}  // namespace

double grad_check(const TensorFn& fn, const Tensor& point, double eps) {
  // Analytic gradient at the point.
  Tensor analytic;
  {
    Tape tape;
    Value x = tape.leaf(point, /*requires_grad=*/true);
    Value y = fn(tape, x);
    RMP_CHECK(tape.value(y).numel() == 1, "grad_check: fn must be scalar-valued");
    tape.backward(y);
    analytic = tape.grad(x);
  }
  auto eval = [&fn](const Tensor& p) {
    Tape tape;
    Value x = tape.leaf(p, false);
    Value y = fn(tape, x);
    return static_cast<double>(tape.value(y)[0]);
  };
  double worst = 0.0;
  Tensor probe = point;
  const std::int64_t n = point.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    const scalar orig = probe[i];
    probe[i] = orig + static_cast<scalar>(eps);
    const double fp = eval(probe);
    probe[i] = orig - static_cast<scalar>(eps);
    const double fm = eval(probe);
    probe[i] = orig;
    const double central = (fp - fm) / (2.0 * eps);
    worst = std::max(worst, rel_err(static_cast<double>(analytic[i]), central));
  }
  return worst;
}

ParamGradCheck param_grad_check(std::vector<std::pair<std::string, Tensor>>& params,
                                const std::function<Value(Tape&)>& build_loss, double eps,
                                int full_check_limit, int sampled_coords, Rng& rng) {
  ParamGradCheck report;
  std::vector<std::pair<std::string, Tensor>> analytic;
  {
    Tape tape;
    Value loss = build_loss(tape);
    RMP_CHECK(tape.value(loss).numel() == 1, "param_grad_check: loss must be scalar");
    tape.backward(loss);
    analytic = tape.param_grads();
  }
  auto eval = [&build_loss]() {
    Tape tape;
    Value loss = build_loss(tape);
    return static_cast<double>(tape.value(loss)[0]);
  };
  for (auto& [name, tensor] : params) {
    const Tensor* grad = nullptr;
    for (const auto& [gname, gtensor] : analytic)
      if (gname == name) grad = &gtensor;
    RMP_CHECK(grad != nullptr, "param_grad_check: builder did not register parameter " + name);
    std::vector<std::int64_t> coords;
    const std::int64_t n = tensor.numel();
    if (n <= full_check_limit) {
      for (std::int64_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (int s = 0; s < sampled_coords; ++s)
        coords.push_back(static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(n))));
    }
    for (std::int64_t i : coords) {
      const scalar orig = tensor[i];
      tensor[i] = orig + static_cast<scalar>(eps);
      const double fp = eval();
      tensor[i] = orig - static_cast<scalar>(eps);
      const double fm = eval();
      tensor[i] = orig;
      const double central = (fp - fm) / (2.0 * eps);
      const double err = rel_err(static_cast<double>((*grad)[i]), central);
      ++report.coords_checked;
      if (err > report.max_rel_err) {
        report.max_rel_err = err;
        report.worst_param = name;
      }
    }
  }
  return report;
}

}  // namespace rmp
