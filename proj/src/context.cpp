#include "pktime/context.hpp"

#include "pktime/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace pktime {

std::string to_string(DayType t) {
	switch (t) {
	case DayType::working_day:
		return "working day";
	case DayType::weekend:
		return "weekend";
	case DayType::holiday:
		return "holiday";
	}
	return {};
}

DayType parse_day_type(const std::string& s) {
	if (s == "working day" || s == "working_day") {
		return DayType::working_day;
	}
	if (s == "weekend") {
		return DayType::weekend;
	}
	if (s == "holiday") {
		return DayType::holiday;
	}
	throw DataError(fmt::format("unknown day_type '{}'", s));
}

CalendarDay make_calendar_day(Date d, std::optional<std::string> holiday_name) {
	CalendarDay c{d, DayType::working_day, std::nullopt};
	if (holiday_name) {
		c.day_type = DayType::holiday;
		c.holiday_name = std::move(holiday_name);
	} else if (is_weekend(d)) {
		c.day_type = DayType::weekend;
	}
	return c;
}

void validate(const BerthDay& b) {
	if (b.n_vessels < 0 || b.import_teu < 0 || b.export_teu < 0) {
		throw DataError(fmt::format("berth {}: negative count", format_date(b.date)));
	}
	if (b.n_vessels == 0 && b.volume() != 0) {
		throw DataError(fmt::format("berth {}: volume without vessels", format_date(b.date)));
	}
}

void validate(const WeatherDay& w) {
	if (!std::isfinite(w.temperature) || !(w.precipitation >= 0.0) || !(w.wind_speed >= 0.0)) {
		throw DataError(fmt::format("weather {}: invalid reading", format_date(w.date)));
	}
}

void validate(const CalendarDay& c) {
	if ((c.day_type == DayType::holiday) != c.holiday_name.has_value()) {
		throw DataError(
			fmt::format("calendar {}: holiday name must be present iff day is a holiday",
			            format_date(c.date)));
	}
}

std::string to_string(VolumeLevel level) {
	switch (level) {
	case VolumeLevel::low:
		return "low";
	case VolumeLevel::average:
		return "average";
	case VolumeLevel::high:
		return "high";
	case VolumeLevel::very_high:
		return "very high";
	}
	return {};
}

namespace {

double percentile(const std::vector<double>& sorted, double p) {
	const double pos = p * static_cast<double>(sorted.size() - 1);
	const auto lo = static_cast<std::size_t>(std::floor(pos));
	const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
	const double frac = pos - static_cast<double>(lo);
	return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

} // namespace

VolumeBuckets fit_buckets(std::span<const BerthDay> training_days) {
	if (training_days.empty()) {
		throw DataError("fit_buckets: no training berth days");
	}
	if (training_days.size() < 4) {
		throw DataError(
			fmt::format("fit_buckets: need at least 4 training days, got {}", training_days.size()));
	}
	std::vector<double> v;
	v.reserve(training_days.size());
	for (const BerthDay& b : training_days) {
		v.push_back(static_cast<double>(b.volume()));
	}
	std::sort(v.begin(), v.end());
	return {percentile(v, 0.25), percentile(v, 0.50), percentile(v, 0.75)};
}

VolumeLevel classify_volume(double teu, const VolumeBuckets& buckets) {
	if (teu <= buckets.q1) {
		return VolumeLevel::low;
	}
	if (teu <= buckets.q2) {
		return VolumeLevel::average;
	}
	if (teu <= buckets.q3) {
		return VolumeLevel::high;
	}
	return VolumeLevel::very_high;
}

void ContextTable::add(StepContext ctx) {
	const Date d = ctx.calendar.date;
	if (ctx.berth.date != d || ctx.weather.date != d) {
		throw DataError(fmt::format("context feeds disagree on date {}", format_date(d)));
	}
	days_.insert_or_assign(d, std::move(ctx));
}

const StepContext& ContextTable::at(Date d) const {
	const auto it = days_.find(d);
	if (it == days_.end()) {
		throw DataError(fmt::format("no port context for {}", format_date(d)));
	}
	return it->second;
}

std::vector<StepContext> ContextTable::horizon(Date anchor, std::size_t horizon) const {
	std::vector<StepContext> out;
	out.reserve(horizon);
	for (std::size_t h = 1; h <= horizon; ++h) {
		const Date d = add_days(anchor, static_cast<long>(h));
		const auto it = days_.find(d);
		if (it == days_.end()) {
			throw DataError(
				fmt::format("missing port context for forecasting step {} ({})", h, format_date(d)));
		}
		out.push_back(it->second);
	}
	return out;
}

std::string format_number(double v) {
	if (v == 0.0) {
		return "0"; // also folds -0
	}
	char buf[400];
	const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed);
	return std::string(buf, res.ptr);
}

namespace {

constexpr const char* kDomainInformationPk =
	"Berth schedule data are used to identify the estimated time of arrival of vessels and the "
	"anticipated CT. CT generally increases with the number of scheduled vessel arrivals, as a "
	"higher number of vessels typically requires more operational activity. Throughput often "
	"declines on weekends, and public holidays owing to reduced road truck activity and may also "
	"decrease on days with heavy rainfall because of weather-related disruptions.";

constexpr const char* kDomainInformationStatic =
	"Berth schedule data are used to identify the estimated time of arrival of vessels and the "
	"anticipated CT. CT generally increases with the number of scheduled vessel arrivals, as a "
	"higher number of vessels typically requires more operational activity. Throughput often "
	"declines on weekends and public holidays owing to reduced road truck activity and may also "
	"decrease on days with heavy rainfall due to weather-related disruptions.";

std::string data_description(const PromptMeta& meta) {
	return fmt::format(
		"This dataset captures the daily CT, measured by gate-in and gate-out activities at a "
		"container terminal in {} Port, spanning the period from {} to {}.",
		meta.port, format_month_year(meta.period_start), format_month_year(meta.period_end));
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
	std::string out;
	for (std::size_t i = 0; i < parts.size(); ++i) {
		if (i > 0) {
			out += sep;
		}
		out += parts[i];
	}
	return out;
}

PromptBundle assemble(std::vector<std::pair<std::string, std::string>> sections,
                      std::size_t horizon, Date anchor) {
	PromptBundle b;
	std::vector<std::string> texts;
	for (const auto& s : sections) {
		texts.push_back(s.second);
	}
	b.text = join(texts, "\n");
	b.sections = std::move(sections);
	b.horizon = horizon;
	b.anchor_date = anchor;
	return b;
}

} // namespace

PromptBundle render_pk_prompt(const PromptMeta& meta, std::size_t input_len, std::size_t horizon,
                              Date anchor_date, std::span<const StepContext> steps,
                              const VolumeBuckets& buckets) {
	for (std::size_t h = 1; h <= horizon; ++h) {
		const Date expected = add_days(anchor_date, static_cast<long>(h));
		if (h > steps.size() || steps[h - 1].calendar.date != expected ||
		    steps[h - 1].berth.date != expected || steps[h - 1].weather.date != expected) {
			throw DataError(fmt::format("missing port context for forecasting step {} ({})", h,
			                            format_date(expected)));
		}
	}
	if (steps.size() != horizon) {
		throw DataError(fmt::format("expected {} context steps, got {}", horizon, steps.size()));
	}

	std::vector<std::string> berth;
	std::vector<std::string> aux;
	long total_vessels = 0;
	std::int64_t total_volume = 0;
	for (std::size_t h = 1; h <= horizon; ++h) {
		const StepContext& s = steps[h - 1];
		const std::string date = format_date(s.calendar.date);
		const std::int64_t volume = s.berth.volume();
		total_vessels += s.berth.n_vessels;
		total_volume += volume;
		berth.push_back(fmt::format(
			"Forecasting step {} ({}, {}) {} is expected to have a {} operational volume, as {} "
			"vessel(s) are scheduled to arrive, with an estimated loading/unloading volume of {} "
			"TEUs.",
			h, date, s.calendar.weekday(), date,
			to_string(classify_volume(static_cast<double>(volume), buckets)), s.berth.n_vessels,
			volume));

		std::string day = fmt::format("{} is a {}", date, to_string(s.calendar.day_type));
		if (s.calendar.day_type == DayType::holiday && s.calendar.holiday_name) {
			day += fmt::format(", and the name of the holiday is {}", *s.calendar.holiday_name);
		}
		aux.push_back(fmt::format(
			"{}. The forecasted temperature of {} port is {:.1f} °C, with a precipitation of {:.1f} "
			"mm and an expected wind speed of {:.1f} m/s.",
			day, meta.port, s.weather.temperature, s.weather.precipitation, s.weather.wind_speed));
	}
	berth.push_back(fmt::format("After next {} days, Estimated vessels to arrival are {}, Volumes "
	                            "are {}",
	                            horizon, total_vessels, total_volume));

	return assemble(
		{
			{"Data Description", data_description(meta)},
			{"Task Description",
	         fmt::format("The input data consist of historical CT. Your task is to forecast the "
	                     "next {} steps based on the previous {} steps, in collaboration with the "
	                     "provided prompting information",
	                     horizon, input_len)},
			{"Domain Information", kDomainInformationPk},
			{"Berth Schedule", join(berth, " ")},
			{"Auxiliary Information", join(aux, " ")},
		},
		horizon, anchor_date);
}

WindowStats window_stats(std::span<const double> input) {
	const std::size_t n = input.size();
	if (n < 8) {
		throw DataError(fmt::format("window_stats: need at least 8 values, got {}", n));
	}
	WindowStats st;
	std::vector<double> sorted(input.begin(), input.end());
	std::sort(sorted.begin(), sorted.end());
	st.min = sorted.front();
	st.max = sorted.back();
	st.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

	const double mean = std::accumulate(input.begin(), input.end(), 0.0) / static_cast<double>(n);
	const double t_mean = static_cast<double>(n - 1) / 2.0;
	double sxy = 0.0;
	for (std::size_t t = 0; t < n; ++t) {
		sxy += (static_cast<double>(t) - t_mean) * (input[t] - mean);
	}
	st.trend = sxy >= 0.0 ? Trend::upward : Trend::downward;

	double c0 = 0.0;
	for (double v : input) {
		c0 += (v - mean) * (v - mean);
	}
	if (!(c0 > 0.0)) {
		st.top_lags = {1, 2, 3, 4, 5};
		st.degenerate = true;
		return st;
	}
	const std::size_t max_lag = std::min<std::size_t>(n - 1, 30);
	std::vector<std::pair<double, int>> acf;
	for (std::size_t k = 1; k <= max_lag; ++k) {
		double ck = 0.0;
		for (std::size_t t = 0; t + k < n; ++t) {
			ck += (input[t] - mean) * (input[t + k] - mean);
		}
		acf.emplace_back(std::abs(ck / c0), static_cast<int>(k));
	}
	std::stable_sort(acf.begin(), acf.end(),
	                 [](const auto& a, const auto& b) { return a.first > b.first; });
	for (std::size_t i = 0; i < 5; ++i) {
		st.top_lags[i] = acf[i].second;
	}
	return st;
}

PromptBundle render_static_prompt(const PromptMeta& meta, std::size_t input_len,
                                  std::size_t horizon, Date anchor_date, const WindowStats& stats) {
	const auto& l = stats.top_lags;
	return assemble(
		{
			{"Domain", data_description(meta)},
			{"Instruction", fmt::format("Forecast the next {} steps given the previous {} steps "
	                                    "information attached.",
	                                    horizon, input_len)},
			{"Domain Information", kDomainInformationStatic},
			{"Statistics",
	         fmt::format("min value {}, max value {}, median value {}, the trend of input is {}, "
	                     "top 5 lags are {}, {}, {}, {}, {}",
	                     format_number(stats.min), format_number(stats.max),
	                     format_number(stats.median),
	                     stats.trend == Trend::upward ? "upward" : "downward", l[0], l[1], l[2],
	                     l[3], l[4])},
		},
		horizon, anchor_date);
}

} // namespace pktime
