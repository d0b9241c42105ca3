#include "pktime/synth.hpp"

#include "pktime/error.hpp"

#include <array>
#include <cmath>
#include <random>

#include <fmt/format.h>

namespace pktime {

namespace {

struct Holiday {
	unsigned month;
	unsigned day;
	const char* name;
};

constexpr std::array<Holiday, 10> kHolidays = {{
	{1, 1, "New Year's Day"},
	{2, 1, "Lunar New Year"},
	{3, 1, "Independence Movement Day"},
	{5, 5, "Children's Day"},
	{6, 6, "Memorial Day"},
	{8, 15, "Liberation Day"},
	{9, 10, "Chuseok"},
	{10, 3, "National Foundation Day"},
	{10, 9, "Hangul Day"},
	{12, 25, "Christmas Day"},
}};

void require(bool ok, const std::string& what) {
	if (!ok) {
		throw ConfigError("world config: " + what);
	}
}

bool in_unit_interval(double m) {
	return m > 0.0 && m <= 1.0;
}

} // namespace

void WorldConfig::validate() const {
	require(n_days >= 120, fmt::format("n_days {} < 120", n_days));
	require(in_unit_interval(weekend_mult) && in_unit_interval(holiday_mult) &&
	            in_unit_interval(rain_mult) && in_unit_interval(wind_mult),
	        "multipliers must lie in (0, 1]");
	require(rain_threshold > 0.0 && wind_threshold > 0.0, "thresholds must be positive");
	require(base_ct >= 0.0 && teu_to_ct >= 0.0, "base_ct and teu_to_ct must be non-negative");
	require(noise_std >= 0.0 && tat_noise_std >= 0.0, "noise levels must be non-negative");
	require(vessel_rate >= 0.0 && teu_min > 0.0 && teu_max >= teu_min, "invalid vessel process");
	require(rain_probability >= 0.0 && rain_probability <= 1.0 && rain_mean_mm > 0.0 &&
	            wind_base >= 0.0 && wind_mean_excess > 0.0,
	        "invalid weather process");
}

std::optional<std::string> synthetic_holiday(Date d) {
	const std::chrono::year_month_day ymd{d};
	for (const Holiday& h : kHolidays) {
		if (static_cast<unsigned>(ymd.month()) == h.month && static_cast<unsigned>(ymd.day()) == h.day) {
			return std::string(h.name);
		}
	}
	return std::nullopt;
}

double expected_ct(const WorldConfig& config, const BerthDay& berth, const CalendarDay& calendar,
                   const WeatherDay& weather) {
	double mu = config.base_ct + config.teu_to_ct * static_cast<double>(berth.volume());
	if (calendar.day_type == DayType::weekend) {
		mu *= config.weekend_mult;
	} else if (calendar.day_type == DayType::holiday) {
		mu *= config.holiday_mult;
	}
	if (weather.precipitation > config.rain_threshold) {
		mu *= config.rain_mult;
	}
	if (weather.wind_speed > config.wind_threshold) {
		mu *= config.wind_mult;
	}
	return mu;
}

World gen_world(const WorldConfig& config) {
	config.validate();
	std::mt19937_64 rng(config.seed);
	std::poisson_distribution<int> vessels(config.vessel_rate);
	std::uniform_real_distribution<double> teu(config.teu_min, config.teu_max);
	std::uniform_real_distribution<double> unit(0.0, 1.0);
	std::normal_distribution<double> normal(0.0, 1.0);
	std::exponential_distribution<double> rain_amount(1.0 / config.rain_mean_mm);
	std::exponential_distribution<double> wind_excess(1.0 / config.wind_mean_excess);

	World w;
	w.config = config;
	w.ct.start = config.start_date;
	w.ct.values.reserve(config.n_days);
	for (std::size_t t = 0; t < config.n_days; ++t) {
		const Date d = add_days(config.start_date, static_cast<long>(t));

		BerthDay b{d, config.vessel_rate > 0.0 ? vessels(rng) : 0, 0, 0};
		for (int v = 0; v < b.n_vessels; ++v) {
			const double total = std::round(teu(rng));
			const double import_share = unit(rng);
			const auto imp = static_cast<std::int64_t>(std::round(total * import_share));
			b.import_teu += imp;
			b.export_teu += static_cast<std::int64_t>(total) - imp;
		}

		const double doy = static_cast<double>(day_of_year(d));
		WeatherDay wd{d, 0.0, 0.0, 0.0};
		wd.temperature = 14.0 + 10.0 * std::sin(2.0 * M_PI * (doy - 110.0) / 365.0) + 3.0 * normal(rng);
		wd.precipitation = unit(rng) < config.rain_probability ? rain_amount(rng) : 0.0;
		wd.wind_speed = config.wind_base + wind_excess(rng);

		const CalendarDay cal =
			make_calendar_day(d, config.holidays ? synthetic_holiday(d) : std::nullopt);

		const double mu = expected_ct(config, b, cal, wd);
		const double noisy = mu + config.noise_std * normal(rng);
		const double ct = std::round(std::max(0.0, noisy));

		const auto n_events = static_cast<std::int64_t>(ct);
		std::binomial_distribution<std::int64_t> gate_in(n_events, 0.5);
		const std::int64_t n_in = n_events > 0 ? gate_in(rng) : 0;
		for (std::int64_t e = 0; e < n_events; ++e) {
			w.events.events.push_back({d, e < n_in ? Direction::gate_in : Direction::gate_out});
		}

		const double eps = config.tat_noise_std * normal(rng);
		w.tat.push_back(std::exp(config.tat_intercept + config.tat_beta * std::log(std::max(ct, 1.0)) + eps));

		w.ct.values.push_back(ct);
		w.berth.push_back(b);
		w.weather.push_back(wd);
		w.calendar.push_back(cal);
	}
	return w;
}

ContextTable World::context() const {
	ContextTable table;
	for (std::size_t t = 0; t < berth.size(); ++t) {
		table.add({calendar[t], berth[t], weather[t]});
	}
	return table;
}

PromptMeta World::meta(const std::string& port) const {
	return {port, ct.start, ct.end()};
}

std::vector<double> oracle_forecast(const World& world, std::size_t t, std::size_t horizon) {
	if (t + horizon >= world.ct.size()) {
		throw DataError(fmt::format("oracle horizon {} from day {} runs past the world end ({} days)",
		                            horizon, t, world.ct.size()));
	}
	const double sigma = world.config.noise_std;
	std::vector<double> out;
	out.reserve(horizon);
	for (std::size_t h = 1; h <= horizon; ++h) {
		const std::size_t i = t + h;
		const double mu = expected_ct(world.config, world.berth[i], world.calendar[i], world.weather[i]);
		if (sigma == 0.0) {
			out.push_back(std::round(std::max(0.0, mu)));
			continue;
		}
		// mean of max(0, N(mu, sigma^2))
		const double z = mu / sigma;
		const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
		const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
		out.push_back(mu * cdf + sigma * pdf);
	}
	return out;
}

} // namespace pktime
