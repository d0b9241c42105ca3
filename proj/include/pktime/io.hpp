#pragma once

#include "pktime/context.hpp"
#include "pktime/series.hpp"
#include "pktime/train.hpp"

#include <optional>
#include <string>
#include <vector>

namespace pktime {

struct World;

/// Splits one CSV record; double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_csv_line(const std::string& line);
/// Quotes a field only when it needs it.
std::string csv_field(const std::string& s);

/// `date,ct`; dates must be consecutive and ct a non-negative integer.
CtSeries read_ct_csv(const std::string& path);
/// `timestamp,direction` with direction in|out, aggregated per day over the
/// span of the log (or `range` when given).
CtSeries read_events_csv(const std::string& path, std::optional<DateRange> range = std::nullopt);
std::vector<BerthDay> read_berth_csv(const std::string& path);
std::vector<WeatherDay> read_weather_csv(const std::string& path);
std::vector<CalendarDay> read_calendar_csv(const std::string& path);

struct TatDay {
	Date date;
	double minutes = 0.0;
};
std::vector<TatDay> read_tat_csv(const std::string& path);

void write_ct_csv(const CtSeries& series, const std::string& path);
void write_berth_csv(std::span<const BerthDay> days, const std::string& path);
void write_weather_csv(std::span<const WeatherDay> days, const std::string& path);
void write_calendar_csv(std::span<const CalendarDay> days, const std::string& path);
void write_tat_csv(const CtSeries& series, std::span<const double> tat, const std::string& path);

/// ct.csv, berth.csv, weather.csv, calendar.csv, tat.csv under dir.
void write_world(const World& world, const std::string& dir);

/// Joins per-day feeds into a context table; all three must cover the same dates.
ContextTable join_context(std::span<const BerthDay> berth, std::span<const WeatherDay> weather,
                          std::span<const CalendarDay> calendar);

/**
 * @brief Loads a data directory: ct.csv (or events.csv) plus optional
 * berth.csv / weather.csv / calendar.csv context.
 */
DataBundle load_bundle(const std::string& dir, const std::string& port = "Busan");

} // namespace pktime
