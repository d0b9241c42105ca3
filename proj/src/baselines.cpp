#include "pktime/error.hpp"
#include "pktime/train.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>

namespace pktime {

std::string to_string(Baseline b) {
	switch (b) {
	case Baseline::seasonal_naive:
		return "seasonal_naive";
	case Baseline::mean:
		return "mean";
	case Baseline::dlinear_style:
		return "dlinear";
	}
	return "unknown";
}

Baseline parse_baseline(const std::string& s) {
	if (s == "seasonal_naive") {
		return Baseline::seasonal_naive;
	}
	if (s == "mean") {
		return Baseline::mean;
	}
	if (s == "dlinear") {
		return Baseline::dlinear_style;
	}
	throw ConfigError(fmt::format("unknown baseline '{}' (expected seasonal_naive, mean or dlinear)", s));
}

namespace {

constexpr std::size_t kSeason = 7;

std::vector<CtWindow> scaled_windows(const CtSeries& segment, const ScalerParams& scaler,
                                     std::size_t input_len, std::size_t horizon) {
	const std::vector<double> scaled = apply_scaler(segment.values, scaler);
	return make_windows(scaled, segment.start, input_len, horizon);
}

} // namespace

Metrics run_baseline(Baseline which, const DataBundle& bundle, std::size_t input_len,
                     std::size_t horizon) {
	if (input_len == 0 || horizon == 0) {
		throw ConfigError("baseline: input and horizon lengths must be positive");
	}
	if (which == Baseline::seasonal_naive && input_len < kSeason) {
		throw ConfigError(fmt::format("seasonal_naive needs an input of at least {} days", kSeason));
	}
	const SeriesSplit parts = split(bundle.series, input_len + horizon);
	const ScalerParams scaler = fit_scaler(parts.train.values);
	const std::vector<CtWindow> test = scaled_windows(parts.test, scaler, input_len, horizon);
	if (test.empty()) {
		throw DataError("baseline: the test split holds no complete window");
	}

	// dlinear: one least-squares map [x, 1] -> y fitted on the training windows
	Eigen::MatrixXd coef;
	if (which == Baseline::dlinear_style) {
		const std::vector<CtWindow> fit = scaled_windows(parts.train, scaler, input_len, horizon);
		Eigen::MatrixXd a(static_cast<Eigen::Index>(fit.size()), static_cast<Eigen::Index>(input_len + 1));
		Eigen::MatrixXd b(static_cast<Eigen::Index>(fit.size()), static_cast<Eigen::Index>(horizon));
		for (std::size_t i = 0; i < fit.size(); ++i) {
			const auto r = static_cast<Eigen::Index>(i);
			for (std::size_t j = 0; j < input_len; ++j) {
				a(r, static_cast<Eigen::Index>(j)) = fit[i].input[j];
			}
			a(r, static_cast<Eigen::Index>(input_len)) = 1.0;
			for (std::size_t h = 0; h < horizon; ++h) {
				b(r, static_cast<Eigen::Index>(h)) = fit[i].target[h];
			}
		}
		coef = a.completeOrthogonalDecomposition().solve(b);
	}

	std::vector<double> pred;
	std::vector<double> truth;
	for (const CtWindow& w : test) {
		double window_mean = 0.0;
		for (double x : w.input) {
			window_mean += x;
		}
		window_mean /= static_cast<double>(input_len);
		for (std::size_t h = 1; h <= horizon; ++h) {
			double y = 0.0;
			switch (which) {
			case Baseline::seasonal_naive:
				y = w.input[input_len - kSeason + (h - 1) % kSeason];
				break;
			case Baseline::mean:
				y = window_mean;
				break;
			case Baseline::dlinear_style: {
				const auto col = static_cast<Eigen::Index>(h - 1);
				y = coef(static_cast<Eigen::Index>(input_len), col);
				for (std::size_t j = 0; j < input_len; ++j) {
					y += w.input[j] * coef(static_cast<Eigen::Index>(j), col);
				}
				break;
			}
			}
			pred.push_back(y);
			truth.push_back(w.target[h - 1]);
		}
	}
	return compute_metrics(pred, truth);
}

} // namespace pktime
