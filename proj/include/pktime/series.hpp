#pragma once

#include "pktime/date.hpp"
#include "pktime/matrix.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace pktime {

enum class Direction { gate_in, gate_out };

struct Event {
	Date date;
	Direction direction = Direction::gate_in;
};

struct EventLog {
	std::vector<Event> events;
};

/// Inclusive date interval.
struct DateRange {
	Date first;
	Date last;

	long days() const { return days_between(first, last) + 1; }
	bool contains(Date d) const { return d >= first && d <= last; }
};

/// Daily container throughput, one value per consecutive day.
struct CtSeries {
	Date start;
	std::vector<double> values;

	std::size_t size() const { return values.size(); }
	Date date_at(std::size_t i) const { return add_days(start, static_cast<long>(i)); }
	Date end() const { return date_at(values.size() - 1); }
	CtSeries slice(std::size_t begin, std::size_t end) const;
};

/// Counts events per day; both directions count once each.
CtSeries aggregate_daily(const EventLog& log, DateRange range);

struct ScalerParams {
	double mean = 0.0;
	double std = 1.0;
};

/// Population mean/std. Throws NumericError on a constant series.
ScalerParams fit_scaler(std::span<const double> train_values);
std::vector<double> apply_scaler(std::span<const double> values, const ScalerParams& p);
std::vector<double> invert_scaler(std::span<const double> values, const ScalerParams& p);

struct SplitSizes {
	std::size_t train = 0;
	std::size_t val = 0;
	std::size_t test = 0;
};

/// 50:30:20 with floor for train and val, remainder to test.
SplitSizes split_sizes(std::size_t n);

struct SeriesSplit {
	CtSeries train;
	CtSeries val;
	CtSeries test;
};

/// Contiguous temporal split. When min_segment > 0, every segment must hold
/// at least that many days; otherwise DataError states the minimum length.
SeriesSplit split(const CtSeries& series, std::size_t min_segment = 0);

struct CtWindow {
	std::vector<double> input;
	std::vector<double> target;
	/// date of the last input day
	Date anchor_date;
};

/// Sliding windows with step 1; empty when the segment is shorter than T+H.
std::vector<CtWindow> make_windows(std::span<const double> segment, Date segment_start,
                                   std::size_t input_len, std::size_t horizon);

struct PatchSet {
	Matrix patches; // count x patch_len
	std::size_t patch_len = 0;
	std::size_t stride = 0;
	std::size_t count = 0;
};

/// floor((T - L_p) / S) + 2
std::size_t patch_count(std::size_t input_len, std::size_t patch_len, std::size_t stride);

/// Right-pads the input with its last value `stride` times and cuts patches
/// at offsets 0, S, 2S, ...
PatchSet patch(std::span<const double> input, std::size_t patch_len, std::size_t stride);

} // namespace pktime
