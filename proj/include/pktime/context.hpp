#pragma once

#include "pktime/date.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pktime {

struct BerthDay {
	Date date;
	int n_vessels = 0;
	std::int64_t import_teu = 0;
	std::int64_t export_teu = 0;

	std::int64_t volume() const { return import_teu + export_teu; }
};

struct WeatherDay {
	Date date;
	double temperature = 0.0;   // degrees C
	double precipitation = 0.0; // mm
	double wind_speed = 0.0;    // m/s
};

enum class DayType { working_day, weekend, holiday };

std::string to_string(DayType t);
/// Accepts "working day", "weekend", "holiday" (also underscores).
DayType parse_day_type(const std::string& s);

struct CalendarDay {
	Date date;
	DayType day_type = DayType::working_day;
	std::optional<std::string> holiday_name;

	std::string weekday() const { return weekday_name(date); }
};

/// Weekend on Saturday/Sunday unless a holiday name is supplied.
CalendarDay make_calendar_day(Date d, std::optional<std::string> holiday_name = std::nullopt);

/// Validates the per-record invariants; throws DataError.
void validate(const BerthDay& b);
void validate(const WeatherDay& w);
void validate(const CalendarDay& c);

/// Quartile cut points of daily scheduled volume (import + export TEU).
struct VolumeBuckets {
	double q1 = 0.0;
	double q2 = 0.0;
	double q3 = 0.0;
};

enum class VolumeLevel { low, average, high, very_high };

std::string to_string(VolumeLevel level);

VolumeBuckets fit_buckets(std::span<const BerthDay> training_days);
/// Upper bounds are inclusive: teu <= q1 is low.
VolumeLevel classify_volume(double teu, const VolumeBuckets& buckets);

/// Dataset description used by the data-description section.
struct PromptMeta {
	std::string port = "Busan";
	Date period_start;
	Date period_end;
};

struct StepContext {
	CalendarDay calendar;
	BerthDay berth;
	WeatherDay weather;
};

/// Berth, weather and calendar feeds keyed by date.
class ContextTable {
public:
	void add(StepContext ctx);
	bool contains(Date d) const { return days_.contains(d); }
	const StepContext& at(Date d) const;
	std::size_t size() const { return days_.size(); }
	const std::map<Date, StepContext>& days() const { return days_; }

	/// Context for anchor+1 .. anchor+horizon; DataError names the first missing step.
	std::vector<StepContext> horizon(Date anchor, std::size_t horizon) const;

private:
	std::map<Date, StepContext> days_;
};

struct PromptBundle {
	std::string text;
	std::vector<std::pair<std::string, std::string>> sections;
	std::size_t horizon = 0;
	Date anchor_date;
};

/// Plain decimal (never scientific) shortest round-trip rendering.
std::string format_number(double v);

PromptBundle render_pk_prompt(const PromptMeta& meta, std::size_t input_len, std::size_t horizon,
                              Date anchor_date, std::span<const StepContext> steps,
                              const VolumeBuckets& buckets);

enum class Trend { upward, downward };

struct WindowStats {
	double min = 0.0;
	double max = 0.0;
	double median = 0.0;
	Trend trend = Trend::upward;
	std::array<int, 5> top_lags{};
	/// constant input: autocorrelation undefined, lags default to 1..5
	bool degenerate = false;
};

WindowStats window_stats(std::span<const double> input);

PromptBundle render_static_prompt(const PromptMeta& meta, std::size_t input_len,
                                  std::size_t horizon, Date anchor_date, const WindowStats& stats);

} // namespace pktime
