#include "doctest.h"

#include "pktime/error.hpp"
#include "pktime/synth.hpp"

#include <cmath>

using namespace pktime;

TEST_CASE("worlds are deterministic per seed") {
	WorldConfig c;
	c.n_days = 200;
	const World a = gen_world(c);
	const World b = gen_world(c);
	CHECK(a.ct.values == b.ct.values);
	CHECK(a.tat == b.tat);
	c.seed = 8;
	CHECK_FALSE(gen_world(c).ct.values == a.ct.values);
}

TEST_CASE("world feeds are aligned and consistent") {
	WorldConfig c;
	const World w = gen_world(c);
	REQUIRE(w.ct.size() == 730);
	CHECK(w.berth.size() == 730);
	CHECK(w.weather.size() == 730);
	CHECK(w.calendar.size() == 730);
	CHECK(w.tat.size() == 730);
	CHECK(w.context().size() == 730);
	std::size_t holidays = 0;
	for (std::size_t t = 0; t < 730; ++t) {
		const Date d = w.ct.date_at(t);
		CHECK(w.berth[t].date == d);
		CHECK(w.calendar[t].date == d);
		CHECK(w.ct.values[t] >= 0.0);
		CHECK(w.ct.values[t] == std::round(w.ct.values[t]));
		CHECK_NOTHROW(validate(w.berth[t]));
		CHECK_NOTHROW(validate(w.weather[t]));
		holidays += w.calendar[t].day_type == DayType::holiday ? 1 : 0;
	}
	CHECK(holidays == 20);
	const CtSeries from_events = aggregate_daily(w.events, DateRange{w.ct.start, w.ct.end()});
	CHECK(from_events.values == w.ct.values);
	const PromptMeta m = w.meta();
	CHECK(m.period_start == w.ct.start);
	CHECK(m.period_end == w.ct.end());
}

TEST_CASE("noise-free worlds equal the generative mean") {
	WorldConfig c;
	c.noise_std = 0.0;
	c.tat_noise_std = 0.0;
	c.n_days = 365;
	const World w = gen_world(c);
	for (std::size_t t = 0; t < w.ct.size(); ++t) {
		const double mu = expected_ct(c, w.berth[t], w.calendar[t], w.weather[t]);
		CHECK(w.ct.values[t] == std::round(std::max(0.0, mu)));
		const double tat = std::exp(c.tat_intercept + c.tat_beta * std::log(std::max(w.ct.values[t], 1.0)));
		CHECK(w.tat[t] == doctest::Approx(tat).epsilon(1e-14));
	}
	const std::vector<double> o = oracle_forecast(w, 10, 3);
	for (std::size_t h = 0; h < 3; ++h) {
		CHECK(o[h] == w.ct.values[11 + h]);
	}
	CHECK_THROWS_AS(oracle_forecast(w, 363, 2), DataError);
}

TEST_CASE("multipliers apply when their drivers trigger") {
	WorldConfig c;
	const BerthDay berth{Date{}, 1, 600, 400};
	WeatherDay calm{Date{}, 10.0, 0.0, 5.0};
	const CalendarDay work{Date{}, DayType::working_day, std::nullopt};
	const CalendarDay holiday{Date{}, DayType::holiday, std::string("Day")};
	CHECK(expected_ct(c, berth, work, calm) == 1200.0);
	CHECK(expected_ct(c, berth, holiday, calm) == 600.0);
	WeatherDay storm = calm;
	storm.precipitation = 30.0;
	storm.wind_speed = 20.0;
	CHECK(expected_ct(c, berth, work, storm) == doctest::Approx(1200.0 * 0.8 * 0.3));
}

TEST_CASE("the oracle mean is the clamped normal mean") {
	WorldConfig c;
	c.n_days = 150;
	c.noise_std = 500.0;
	const World w = gen_world(c);
	const std::vector<double> o = oracle_forecast(w, 0, 5);
	for (std::size_t h = 0; h < 5; ++h) {
		const double mu = expected_ct(c, w.berth[h + 1], w.calendar[h + 1], w.weather[h + 1]);
		// midpoint integration of max(0, x) against N(mu, sigma^2)
		double acc = 0.0;
		const double step = 0.5;
		for (double x = step / 2; x < mu + 12 * c.noise_std; x += step) {
			const double z = (x - mu) / c.noise_std;
			acc += x * std::exp(-0.5 * z * z) / (c.noise_std * std::sqrt(2 * M_PI)) * step;
		}
		CHECK(o[h] == doctest::Approx(acc).epsilon(1e-6));
	}
}

TEST_CASE("invalid world configs are rejected") {
	WorldConfig c;
	c.n_days = 50;
	CHECK_THROWS_AS(gen_world(c), ConfigError);
	c = WorldConfig{};
	c.weekend_mult = 0.0;
	CHECK_THROWS_AS(gen_world(c), ConfigError);
	c = WorldConfig{};
	c.noise_std = -1.0;
	CHECK_THROWS_AS(gen_world(c), ConfigError);
}
