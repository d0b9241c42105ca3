#include "pktime/gradcheck.hpp"

#include "pktime/error.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace pktime {

namespace {

double checked_loss(const std::function<double(bool)>& loss_fn, bool with_grad) {
	const double loss = loss_fn(with_grad);
	if (!std::isfinite(loss)) {
		throw NumericError("grad_check: loss is not finite");
	}
	return loss;
}

} // namespace

GradCheckResult grad_check(const std::function<double(bool)>& loss_fn,
                           const std::vector<Param*>& params, double eps) {
	if (!(eps >= 1e-7 && eps <= 1e-3)) {
		throw ConfigError(fmt::format("grad_check: eps {} outside [1e-7, 1e-3]", eps));
	}
	std::size_t total = 0;
	for (const Param* p : params) {
		total += p->frozen ? 0 : p->value.size();
	}
	if (total > 10000) {
		throw ConfigError(fmt::format("grad_check: {} scalars exceeds the 1e4 limit", total));
	}

	for (Param* p : params) {
		p->zero_grad();
	}
	checked_loss(loss_fn, true);

	GradCheckResult result;
	std::vector<Matrix> analytic;
	analytic.reserve(params.size());
	for (const Param* p : params) {
		analytic.push_back(p->grad);
		if (p->frozen) {
			const auto g = p->grad.values();
			if (std::any_of(g.begin(), g.end(), [](double v) { return v != 0.0; })) {
				result.frozen_grads_zero = false;
			}
		}
	}

	for (std::size_t pi = 0; pi < params.size(); ++pi) {
		Param& p = *params[pi];
		if (p.frozen) {
			continue;
		}
		auto values = p.value.values();
		for (std::size_t i = 0; i < values.size(); ++i) {
			const double saved = values[i];
			values[i] = saved + eps;
			const double up = checked_loss(loss_fn, false);
			values[i] = saved - eps;
			const double down = checked_loss(loss_fn, false);
			values[i] = saved;
			const double numeric = (up - down) / (2.0 * eps);
			const double err =
				std::abs(analytic[pi].values()[i] - numeric) / std::max(1.0, std::abs(numeric));
			++result.checked;
			if (err > result.max_rel_error) {
				result.max_rel_error = err;
				result.worst_param = p.name;
			}
		}
	}
	return result;
}

} // namespace pktime
