#pragma once

#include "pktime/matrix.hpp"

#include <functional>
#include <string>
#include <vector>

namespace pktime {

struct GradCheckResult {
	/// max over non-frozen scalars of |analytic - numeric| / max(1, |numeric|)
	double max_rel_error = 0.0;
	std::string worst_param;
	std::size_t checked = 0;
	/// every frozen param's analytic gradient was identically zero
	bool frozen_grads_zero = true;
};

/**
 * @brief Compares reverse-pass gradients with central differences.
 *
 * `loss_fn(true)` must evaluate the loss and accumulate analytic gradients
 * into each param's grad (grads are zeroed beforehand); `loss_fn(false)`
 * evaluates the loss only. eps must lie in [1e-7, 1e-3].
 */
GradCheckResult grad_check(const std::function<double(bool)>& loss_fn,
                           const std::vector<Param*>& params, double eps = 1e-5);

} // namespace pktime
