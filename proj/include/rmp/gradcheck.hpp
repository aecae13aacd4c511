#ifndef RMP_GRADCHECK_HPP_
#define RMP_GRADCHECK_HPP_

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "rmp/autodiff.hpp"
#include "rmp/rng.hpp"

namespace rmp {

// Scalar-valued function of one tensor input, built on the given tape.
using TensorFn = std::function<Value(Tape&, Value)>;

// Central finite-difference check for d fn / d point. Returns the maximum
// over coordinates of |analytic - central| / max(1e-8, |analytic| + |central|).
double grad_check(const TensorFn& fn, const Tensor& point, double eps);

// Finite-difference check of a scalar loss against the gradients of all
// parameters the builder registers on the tape. `params` are probed in
// place and restored. Checks every coordinate of tensors with at most
// `full_check_limit` entries, otherwise `sampled_coords` seeded samples.
struct ParamGradCheck {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::int64_t coords_checked = 0;
};

ParamGradCheck param_grad_check(std::vector<std::pair<std::string, Tensor>>& params,
                                const std::function<Value(Tape&)>& build_loss, double eps,
                                int full_check_limit, int sampled_coords, Rng& rng);

}  // namespace rmp

#endif  // RMP_GRADCHECK_HPP_
