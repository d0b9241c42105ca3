#pragma once

#include "pktime/context.hpp"
#include "pktime/date.hpp"
#include "pktime/series.hpp"

#include <cstdint>
#include <vector>

namespace pktime {

/**
 * @brief Generative process of the synthetic port.
 *
 * Daily throughput is base_ct + teu_to_ct * (scheduled TEU), scaled by the
 * weekend/holiday/rain/wind multipliers when triggered, plus Gaussian noise,
 * clamped at zero and rounded. Truck turnaround follows a log-log law.
 */
struct WorldConfig {
	std::uint64_t seed = 7;
	std::size_t n_days = 730;
	Date start_date = Date{std::chrono::year{2022} / 1 / 1};

	double base_ct = 800.0;
	double teu_to_ct = 0.4;
	double weekend_mult = 0.7;
	double holiday_mult = 0.5;
	double rain_threshold = 20.0; // mm
	double rain_mult = 0.8;
	double wind_threshold = 14.0; // m/s
	double wind_mult = 0.3;
	double noise_std = 60.0;

	double tat_intercept = 3.476;
	double tat_beta = 0.367;
	double tat_noise_std = 0.25;

	// vessel arrivals: Poisson(vessel_rate) per day, TEU per call ~ U[teu_min, teu_max]
	double vessel_rate = 1.2;
	double teu_min = 400.0;
	double teu_max = 2400.0;

	// weather: rainy with rain_probability, amount ~ Exp(rain_mean_mm);
	// wind = wind_base + Exp(wind_mean_excess)
	double rain_probability = 0.25;
	double rain_mean_mm = 12.0;
	double wind_base = 4.0;
	double wind_mean_excess = 3.0;

	bool holidays = true;

	/// Throws ConfigError when an invariant is violated.
	void validate() const;
};

struct World {
	WorldConfig config;
	CtSeries ct;
	EventLog events;
	std::vector<BerthDay> berth;
	std::vector<WeatherDay> weather;
	std::vector<CalendarDay> calendar;
	std::vector<double> tat; // minutes

	ContextTable context() const;
	PromptMeta meta(const std::string& port = "Busan") const;
};

/// The ten synthetic holidays falling on the given date, if any.
std::optional<std::string> synthetic_holiday(Date d);

World gen_world(const WorldConfig& config);

/// Noise-free daily mean before clamping.
double expected_ct(const WorldConfig& config, const BerthDay& berth, const CalendarDay& calendar,
                   const WeatherDay& weather);

/// Conditional mean of the next H days after day index t (the anchor).
std::vector<double> oracle_forecast(const World& world, std::size_t t, std::size_t horizon);

} // namespace pktime
