#include "pktime/date.hpp"

#include "pktime/error.hpp"

#include <array>
#include <charconv>

#include <fmt/format.h>

namespace pktime {

using namespace std::chrono;

namespace {

int parse_int(std::string_view s, std::string_view whole) {
	int v = 0;
	const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
	if (ec != std::errc() || ptr != s.data() + s.size()) {
		throw DataError(fmt::format("invalid date '{}'", whole));
	}
	return v;
}

} // namespace

Date parse_date(std::string_view text) {
	// tolerate a trailing time component, e.g. 2022-01-03T08:15:00
	std::string_view s = text.substr(0, text.find_first_of("T "));
	if (s.size() != 10 || s[4] != '-' || s[7] != '-') {
		throw DataError(fmt::format("invalid date '{}' (expected YYYY-MM-DD)", text));
	}
	const year_month_day ymd{year{parse_int(s.substr(0, 4), text)},
	                         month{static_cast<unsigned>(parse_int(s.substr(5, 2), text))},
	                         day{static_cast<unsigned>(parse_int(s.substr(8, 2), text))}};
	if (!ymd.ok()) {
		throw DataError(fmt::format("invalid date '{}'", text));
	}
	return sys_days{ymd};
}

std::string format_date(Date d) {
	const year_month_day ymd{d};
	return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()),
	                   static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
}

std::string format_month_year(Date d) {
	static constexpr std::array<const char*, 12> names = {
		"January", "February", "March",     "April",   "May",      "June",
		"July",    "August",   "September", "October", "November", "December"};
	const year_month_day ymd{d};
	return fmt::format("{} {}", names[static_cast<unsigned>(ymd.month()) - 1],
	                   static_cast<int>(ymd.year()));
}

std::string weekday_name(Date d) {
	static constexpr std::array<const char*, 7> names = {
		"Sunday", "Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday"};
	return names[weekday{d}.c_encoding()];
}

bool is_weekend(Date d) {
	const unsigned wd = weekday{d}.c_encoding();
	return wd == 0 || wd == 6;
}

int day_of_year(Date d) {
	const year_month_day ymd{d};
	return static_cast<int>((d - sys_days{ymd.year() / January / 1}).count()) + 1;
}

} // namespace pktime
