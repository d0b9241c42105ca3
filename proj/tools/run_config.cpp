#include "run_config.hpp"

#include "pktime/error.hpp"

#include <fmt/format.h>

#include <fstream>

namespace pktime::cli {

namespace {

struct WorldField {
	const char* name;
	double WorldConfig::*member;
};

constexpr WorldField kWorldFields[] = {
	{"base_ct", &WorldConfig::base_ct},
	{"teu_to_ct", &WorldConfig::teu_to_ct},
	{"weekend_mult", &WorldConfig::weekend_mult},
	{"holiday_mult", &WorldConfig::holiday_mult},
	{"rain_threshold", &WorldConfig::rain_threshold},
	{"rain_mult", &WorldConfig::rain_mult},
	{"wind_threshold", &WorldConfig::wind_threshold},
	{"wind_mult", &WorldConfig::wind_mult},
	{"noise_std", &WorldConfig::noise_std},
	{"tat_intercept", &WorldConfig::tat_intercept},
	{"tat_beta", &WorldConfig::tat_beta},
	{"tat_noise_std", &WorldConfig::tat_noise_std},
	{"vessel_rate", &WorldConfig::vessel_rate},
	{"teu_min", &WorldConfig::teu_min},
	{"teu_max", &WorldConfig::teu_max},
	{"rain_probability", &WorldConfig::rain_probability},
	{"rain_mean_mm", &WorldConfig::rain_mean_mm},
	{"wind_base", &WorldConfig::wind_base},
	{"wind_mean_excess", &WorldConfig::wind_mean_excess},
};

void require_object(const nlohmann::json& j, const std::string& what) {
	if (!j.is_object()) {
		throw ConfigError(fmt::format("{} must be a JSON object", what));
	}
}

std::size_t count(const nlohmann::json& v, const std::string& key) {
	if (!v.is_number_unsigned()) {
		throw ConfigError(fmt::format("{} must be a non-negative integer", key));
	}
	return v.get<std::size_t>();
}

std::vector<std::size_t> counts(const nlohmann::json& v, const std::string& key) {
	if (!v.is_array() || v.empty()) {
		throw ConfigError(fmt::format("{} must be a non-empty array", key));
	}
	std::vector<std::size_t> out;
	for (const auto& x : v) {
		out.push_back(count(x, key));
	}
	return out;
}

AnalysisOptions analysis_from_json(const nlohmann::json& j) {
	require_object(j, "analysis");
	AnalysisOptions a;
	for (const auto& [key, v] : j.items()) {
		if (key == "k") {
			a.k = count(v, "analysis.k");
		} else if (key == "mode") {
			a.mode = parse_activation_mode(v.get<std::string>());
		} else if (key == "svg") {
			a.svg = v.get<bool>();
		} else {
			throw ConfigError(fmt::format("unknown analysis key '{}'", key));
		}
	}
	if (a.k == 0) {
		throw ConfigError("analysis.k must be positive");
	}
	return a;
}

AblateOptions ablate_from_json(const nlohmann::json& j) {
	require_object(j, "ablate");
	AblateOptions a;
	for (const auto& [key, v] : j.items()) {
		if (key == "input_lens") {
			a.input_lens = counts(v, "ablate.input_lens");
		} else if (key == "horizons") {
			a.horizons = counts(v, "ablate.horizons");
		} else {
			throw ConfigError(fmt::format("unknown ablate key '{}'", key));
		}
	}
	return a;
}

GridOptions grid_from_json(const nlohmann::json& j) {
	require_object(j, "grid");
	GridOptions g;
	for (const auto& [key, v] : j.items()) {
		if (key == "workers") {
			g.workers = count(v, "grid.workers");
		} else if (key == "axes") {
			require_object(v, "grid.axes");
			for (const auto& [name, values] : v.items()) {
				if (!values.is_array() || values.empty()) {
					throw ConfigError(fmt::format("grid axis {} must be a non-empty array", name));
				}
				// rejects unknown field names early
				TrainConfig probe;
				set_config_field(probe, name, values.front().get<double>());
				g.space.axes.emplace_back(name, values.get<std::vector<double>>());
			}
		} else {
			throw ConfigError(fmt::format("unknown grid key '{}'", key));
		}
	}
	return g;
}

} // namespace

WorldConfig world_config_from_json(const nlohmann::json& j, WorldConfig base) {
	require_object(j, "world");
	for (const auto& [key, v] : j.items()) {
		try {
			bool known = false;
			for (const auto& f : kWorldFields) {
				if (key == f.name) {
					base.*f.member = v.get<double>();
					known = true;
				}
			}
			if (known) {
				continue;
			}
			if (key == "seed") {
				base.seed = v.get<std::uint64_t>();
			} else if (key == "n_days") {
				base.n_days = count(v, "world.n_days");
			} else if (key == "start_date") {
				base.start_date = parse_date(v.get<std::string>());
			} else if (key == "holidays") {
				base.holidays = v.get<bool>();
			} else {
				throw ConfigError(fmt::format("unknown world key '{}'", key));
			}
		} catch (const nlohmann::json::exception& e) {
			throw ConfigError(fmt::format("world key '{}': {}", key, e.what()));
		} catch (const DataError& e) {
			throw ConfigError(fmt::format("world key '{}': {}", key, e.what()));
		}
	}
	return base;
}

nlohmann::json to_json(const WorldConfig& c) {
	nlohmann::json j;
	j["seed"] = c.seed;
	j["n_days"] = c.n_days;
	j["start_date"] = format_date(c.start_date);
	j["holidays"] = c.holidays;
	for (const auto& f : kWorldFields) {
		j[f.name] = c.*f.member;
	}
	return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
	require_object(j, "run config");
	RunConfig c;
	for (const auto& [key, v] : j.items()) {
		try {
			if (key == "command") {
				c.command = v.get<std::string>();
			} else if (key == "out") {
				c.out = v.get<std::string>();
			} else if (key == "data") {
				c.data = v.get<std::string>();
			} else if (key == "port") {
				c.port = v.get<std::string>();
			} else if (key == "checkpoint") {
				c.checkpoint = v.get<std::string>();
			} else if (key == "split") {
				c.split = parse_split_name(v.get<std::string>());
			} else if (key == "anchor") {
				c.anchor = parse_date(v.get<std::string>());
			} else if (key == "eval_prompt_mode") {
				c.eval_prompt_mode = parse_prompt_mode(v.get<std::string>());
			} else if (key == "world") {
				c.world = world_config_from_json(v);
			} else if (key == "train") {
				c.train = train_config_from_json(v);
			} else if (key == "analysis") {
				c.analysis = analysis_from_json(v);
			} else if (key == "ablate") {
				c.ablate = ablate_from_json(v);
			} else if (key == "grid") {
				c.grid = grid_from_json(v);
			} else {
				throw ConfigError(fmt::format("unknown config key '{}'", key));
			}
		} catch (const nlohmann::json::exception& e) {
			throw ConfigError(fmt::format("config key '{}': {}", key, e.what()));
		} catch (const DataError& e) {
			throw ConfigError(fmt::format("config key '{}': {}", key, e.what()));
		}
	}
	return c;
}

nlohmann::json to_json(const RunConfig& c) {
	nlohmann::json j;
	j["command"] = c.command;
	j["out"] = c.out;
	j["data"] = c.data;
	j["port"] = c.port;
	j["checkpoint"] = c.checkpoint;
	j["split"] = to_string(c.split);
	if (c.anchor) {
		j["anchor"] = format_date(*c.anchor);
	}
	if (c.eval_prompt_mode) {
		j["eval_prompt_mode"] = to_string(*c.eval_prompt_mode);
	}
	j["world"] = to_json(c.world);
	j["train"] = to_json(c.train);
	j["analysis"] = {{"k", c.analysis.k}, {"mode", to_string(c.analysis.mode)}, {"svg", c.analysis.svg}};
	j["ablate"] = {{"input_lens", c.ablate.input_lens}, {"horizons", c.ablate.horizons}};
	nlohmann::json axes = nlohmann::json::object();
	for (const auto& [name, values] : c.grid.space.axes) {
		axes[name] = values;
	}
	j["grid"] = {{"workers", c.grid.workers}, {"axes", axes}};
	return j;
}

RunConfig load_run_config(const std::string& path) {
	std::ifstream in(path);
	if (!in) {
		throw ConfigError(fmt::format("cannot read config file {}", path));
	}
	nlohmann::json j;
	try {
		j = nlohmann::json::parse(in);
	} catch (const nlohmann::json::exception& e) {
		throw ConfigError(fmt::format("{}: invalid JSON: {}", path, e.what()));
	}
	return run_config_from_json(j);
}

} // namespace pktime::cli
