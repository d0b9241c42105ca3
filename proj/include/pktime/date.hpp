#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace pktime {

/// Calendar date at day resolution.
using Date = std::chrono::sys_days;

/// Parses YYYY-MM-DD. Throws DataError on malformed or impossible dates.
Date parse_date(std::string_view text);
std::string format_date(Date d);
/// "January 2022"
std::string format_month_year(Date d);
/// Full English weekday name, capitalized.
std::string weekday_name(Date d);
bool is_weekend(Date d);
int day_of_year(Date d);

inline Date add_days(Date d, long n) {
	return d + std::chrono::days(n);
}

inline long days_between(Date from, Date to) {
	return (to - from).count();
}

} // namespace pktime
