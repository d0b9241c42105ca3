#include "pktime/series.hpp"

#include "pktime/error.hpp"

#include <cmath>

#include <fmt/format.h>

namespace pktime {

CtSeries CtSeries::slice(std::size_t begin, std::size_t end) const {
	return CtSeries{date_at(begin), std::vector<double>(values.begin() + static_cast<long>(begin),
	                                                    values.begin() + static_cast<long>(end))};
}

CtSeries aggregate_daily(const EventLog& log, DateRange range) {
	if (range.days() <= 0) {
		throw DataError("aggregate_daily: empty date range");
	}
	CtSeries out{range.first, std::vector<double>(static_cast<std::size_t>(range.days()), 0.0)};
	for (const Event& e : log.events) {
		if (!range.contains(e.date)) {
			throw DataError(fmt::format("event at {} lies outside [{}, {}]", format_date(e.date),
			                            format_date(range.first), format_date(range.last)));
		}
		out.values[static_cast<std::size_t>(days_between(range.first, e.date))] += 1.0;
	}
	return out;
}

ScalerParams fit_scaler(std::span<const double> train_values) {
	if (train_values.empty()) {
		throw DataError("fit_scaler: empty training split");
	}
	const double n = static_cast<double>(train_values.size());
	double mean = 0.0;
	for (double v : train_values) {
		mean += v;
	}
	mean /= n;
	double var = 0.0;
	for (double v : train_values) {
		var += (v - mean) * (v - mean);
	}
	const double std = std::sqrt(var / n);
	if (!(std > 0.0)) {
		throw NumericError("fit_scaler: degenerate series (zero standard deviation)");
	}
	return {mean, std};
}

std::vector<double> apply_scaler(std::span<const double> values, const ScalerParams& p) {
	std::vector<double> out(values.size());
	for (std::size_t i = 0; i < values.size(); ++i) {
		out[i] = (values[i] - p.mean) / p.std;
	}
	return out;
}

std::vector<double> invert_scaler(std::span<const double> values, const ScalerParams& p) {
	std::vector<double> out(values.size());
	for (std::size_t i = 0; i < values.size(); ++i) {
		out[i] = values[i] * p.std + p.mean;
	}
	return out;
}

SplitSizes split_sizes(std::size_t n) {
	SplitSizes s;
	s.train = n / 2;
	s.val = (3 * n) / 10;
	s.test = n - s.train - s.val;
	return s;
}

SeriesSplit split(const CtSeries& series, std::size_t min_segment) {
	const SplitSizes s = split_sizes(series.size());
	if (min_segment > 0 && (s.train < min_segment || s.val < min_segment || s.test < min_segment)) {
		std::size_t need = series.size();
		for (;;) {
			const SplitSizes t = split_sizes(need);
			if (t.train >= min_segment && t.val >= min_segment && t.test >= min_segment) {
				break;
			}
			++need;
		}
		throw DataError(fmt::format(
			"series of {} days is too short: each split needs {} days, minimum length is {}",
			series.size(), min_segment, need));
	}
	return SeriesSplit{series.slice(0, s.train), series.slice(s.train, s.train + s.val),
	                   series.slice(s.train + s.val, series.size())};
}

std::vector<CtWindow> make_windows(std::span<const double> segment, Date segment_start,
                                   std::size_t input_len, std::size_t horizon) {
	std::vector<CtWindow> out;
	if (segment.size() < input_len + horizon) {
		return out;
	}
	const std::size_t count = segment.size() - input_len - horizon + 1;
	out.reserve(count);
	for (std::size_t s = 0; s < count; ++s) {
		CtWindow w;
		w.input.assign(segment.begin() + static_cast<long>(s),
		               segment.begin() + static_cast<long>(s + input_len));
		w.target.assign(segment.begin() + static_cast<long>(s + input_len),
		                segment.begin() + static_cast<long>(s + input_len + horizon));
		w.anchor_date = add_days(segment_start, static_cast<long>(s + input_len - 1));
		out.push_back(std::move(w));
	}
	return out;
}

std::size_t patch_count(std::size_t input_len, std::size_t patch_len, std::size_t stride) {
	if (patch_len == 0 || stride == 0 || patch_len > input_len) {
		throw ConfigError(fmt::format("invalid patching: T={}, L_p={}, S={}", input_len, patch_len,
		                              stride));
	}
	return (input_len - patch_len) / stride + 2;
}

PatchSet patch(std::span<const double> input, std::size_t patch_len, std::size_t stride) {
	const std::size_t count = patch_count(input.size(), patch_len, stride);
	std::vector<double> padded(input.begin(), input.end());
	padded.insert(padded.end(), stride, input.back());
	PatchSet ps{Matrix(count, patch_len), patch_len, stride, count};
	for (std::size_t p = 0; p < count; ++p) {
		for (std::size_t j = 0; j < patch_len; ++j) {
			ps.patches(p, j) = padded[p * stride + j];
		}
	}
	return ps;
}

} // namespace pktime
