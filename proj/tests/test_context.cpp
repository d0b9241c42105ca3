#include "doctest.h"

#include "pktime/context.hpp"
#include "pktime/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

using namespace pktime;

namespace {

Date day(int y, unsigned m, unsigned d) {
	return Date{std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}};
}

std::string read_fixture(const std::string& name) {
	std::ifstream in(std::string(PKTIME_FIXTURES_DIR) + "/" + name, std::ios::binary);
	REQUIRE(in.good());
	std::stringstream ss;
	ss << in.rdbuf();
	return ss.str();
}

StepContext step(Date d, int vessels, std::int64_t imp, std::int64_t exp, double temp, double rain,
                 double wind, std::optional<std::string> holiday = std::nullopt) {
	return {make_calendar_day(d, std::move(holiday)), BerthDay{d, vessels, imp, exp},
	        WeatherDay{d, temp, rain, wind}};
}

const PromptMeta kMeta{"Busan", day(2022, 1, 1), day(2022, 12, 31)};
const VolumeBuckets kBuckets{500.0, 1000.0, 2000.0};

} // namespace

TEST_CASE("calendar days classify weekends and holidays") {
	CHECK(make_calendar_day(day(2022, 12, 24)).day_type == DayType::weekend);
	CHECK(make_calendar_day(day(2022, 12, 23)).day_type == DayType::working_day);
	const CalendarDay xmas = make_calendar_day(day(2022, 12, 25), "Christmas Day");
	CHECK(xmas.day_type == DayType::holiday);
	CHECK(xmas.weekday() == "Sunday");
	CHECK(parse_day_type("working day") == DayType::working_day);
	CHECK_THROWS_AS(parse_day_type("festival"), DataError);
	CHECK_THROWS_AS(validate(CalendarDay{day(2022, 1, 3), DayType::holiday, std::nullopt}), DataError);
	CHECK_THROWS_AS(validate(BerthDay{day(2022, 1, 3), 0, 10, 0}), DataError);
	CHECK_THROWS_AS(validate(WeatherDay{day(2022, 1, 3), 5.0, -1.0, 2.0}), DataError);
}

TEST_CASE("volume buckets are training quartiles with inclusive upper bounds") {
	std::vector<BerthDay> days;
	for (int i = 0; i < 5; ++i) {
		days.push_back(BerthDay{day(2022, 1, 1 + i), 1, 100 * i, 0});
	}
	const VolumeBuckets b = fit_buckets(days); // volumes 0..400
	CHECK(b.q1 == 100.0);
	CHECK(b.q2 == 200.0);
	CHECK(b.q3 == 300.0);
	CHECK(classify_volume(100.0, b) == VolumeLevel::low);
	CHECK(classify_volume(100.5, b) == VolumeLevel::average);
	CHECK(classify_volume(300.0, b) == VolumeLevel::high);
	CHECK(classify_volume(301.0, b) == VolumeLevel::very_high);
	CHECK(to_string(VolumeLevel::very_high) == "very high");
	CHECK_THROWS_AS(fit_buckets(std::span<const BerthDay>(days.data(), 3)), DataError);
}

TEST_CASE("PK prompt matches the two-step golden fixture") {
	const std::vector<StepContext> steps{
		step(day(2022, 12, 24), 2, 1200, 850, 3.4, 0.0, 5.1),
		step(day(2022, 12, 25), 0, 0, 0, -1.5, 12.8, 14.2, "Christmas Day"),
	};
	const PromptBundle p = render_pk_prompt(kMeta, 28, 2, day(2022, 12, 23), steps, kBuckets);
	CHECK(p.text == read_fixture("pk_prompt_h2.txt"));
	REQUIRE(p.sections.size() == 5);
	CHECK(p.sections[3].first == "Berth Schedule");
	CHECK(p.horizon == 2);
}

TEST_CASE("PK prompt matches the one-step golden fixture") {
	const std::vector<StepContext> steps{step(day(2022, 3, 2), 1, 700, 100, 10.0, 25.5, 7.7)};
	const PromptBundle p = render_pk_prompt(kMeta, 14, 1, day(2022, 3, 1), steps, kBuckets);
	CHECK(p.text == read_fixture("pk_prompt_h1.txt"));
}

TEST_CASE("PK prompt names the first missing forecasting step") {
	const std::vector<StepContext> steps{step(day(2022, 3, 2), 1, 700, 100, 10.0, 25.5, 7.7)};
	try {
		render_pk_prompt(kMeta, 14, 2, day(2022, 3, 1), steps, kBuckets);
		FAIL("expected a data error");
	} catch (const DataError& e) {
		CHECK(std::string(e.what()).find("step 2 (2022-03-03)") != std::string::npos);
	}
	ContextTable table;
	table.add(steps[0]);
	CHECK_THROWS_AS(table.horizon(day(2022, 3, 1), 2), DataError);
	CHECK(table.horizon(day(2022, 3, 1), 1).size() == 1);
}

TEST_CASE("static prompt matches the golden fixture") {
	const std::vector<double> x{12, 3, 2, 11, 4, 3, 10, 2, 3, 9, 4, 2, 8, 1};
	const WindowStats s = window_stats(x);
	CHECK(s.trend == Trend::downward);
	CHECK(s.top_lags == std::array<int, 5>{3, 6, 1, 2, 4});
	const PromptBundle p = render_static_prompt(kMeta, 14, 7, day(2022, 6, 1), s);
	CHECK(p.text == read_fixture("static_prompt.txt"));
}

TEST_CASE("window statistics agree with brute-force autocorrelation") {
	std::mt19937_64 rng(11);
	std::normal_distribution<double> n(0.0, 1.0);
	for (int rep = 0; rep < 20; ++rep) {
		std::vector<double> x(28);
		for (std::size_t t = 0; t < x.size(); ++t) {
			x[t] = std::sin(0.9 * static_cast<double>(t)) + 0.3 * n(rng);
		}
		const WindowStats s = window_stats(x);
		double mean = 0.0;
		for (double v : x) {
			mean += v;
		}
		mean /= static_cast<double>(x.size());
		std::vector<std::pair<double, int>> acf;
		double c0 = 0.0;
		for (double v : x) {
			c0 += (v - mean) * (v - mean);
		}
		for (int k = 1; k <= 27; ++k) {
			double ck = 0.0;
			for (std::size_t t = 0; t + static_cast<std::size_t>(k) < x.size(); ++t) {
				ck += (x[t] - mean) * (x[t + static_cast<std::size_t>(k)] - mean);
			}
			acf.emplace_back(-std::abs(ck / c0), k);
		}
		std::sort(acf.begin(), acf.end());
		for (int i = 0; i < 5; ++i) {
			CHECK(s.top_lags[static_cast<std::size_t>(i)] == acf[static_cast<std::size_t>(i)].second);
		}
		std::vector<double> sorted = x;
		std::sort(sorted.begin(), sorted.end());
		CHECK(s.min == sorted.front());
		CHECK(s.max == sorted.back());
		CHECK(s.median == doctest::Approx((sorted[13] + sorted[14]) / 2.0).epsilon(1e-15));
	}
}

TEST_CASE("window statistics handle constant input and reject short windows") {
	const WindowStats s = window_stats(std::vector<double>(10, 4.0));
	CHECK(s.degenerate);
	CHECK(s.top_lags == std::array<int, 5>{1, 2, 3, 4, 5});
	CHECK_THROWS_AS(window_stats(std::vector<double>(7, 1.0)), DataError);
}

TEST_CASE("numbers render in plain shortest form") {
	CHECK(format_number(0.0) == "0");
	CHECK(format_number(-0.0) == "0");
	CHECK(format_number(3.5) == "3.5");
	CHECK(format_number(1200.0) == "1200");
	CHECK(format_number(1e20) == "100000000000000000000");
}
