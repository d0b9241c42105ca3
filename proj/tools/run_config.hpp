#pragma once

#include "pktime/analyze.hpp"
#include "pktime/config.hpp"
#include "pktime/synth.hpp"
#include "pktime/train.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

namespace pktime::cli {

struct AnalysisOptions {
	std::size_t k = 5;
	ActivationMode mode = ActivationMode::signed_weight;
	bool svg = false;
};

struct AblateOptions {
	std::vector<std::size_t> input_lens;
	std::vector<std::size_t> horizons;
};

struct GridOptions {
	/// empty: the TimeLLM search space
	GridSpace space;
	std::size_t workers = 1;
};

/**
 * @brief Everything a command needs, read from one JSON file and then
 * overridden by flags.
 */
struct RunConfig {
	std::string command;
	std::string out;
	std::string data;
	std::string port = "Busan";
	std::string checkpoint;
	SplitName split = SplitName::test;
	std::optional<Date> anchor;
	std::optional<PromptMode> eval_prompt_mode;
	WorldConfig world;
	TrainConfig train;
	AnalysisOptions analysis;
	AblateOptions ablate;
	GridOptions grid;
};

/// Throws ConfigError on unknown keys or ill-typed values.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);

WorldConfig world_config_from_json(const nlohmann::json& j, WorldConfig base = {});
nlohmann::json to_json(const WorldConfig& c);

RunConfig load_run_config(const std::string& path);

} // namespace pktime::cli
