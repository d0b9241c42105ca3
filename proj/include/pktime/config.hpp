#pragma once

#include "pktime/context.hpp"
#include "pktime/model.hpp"
#include "pktime/series.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>

namespace pktime {

enum class PromptMode { none, static_stats, pk };

std::string to_string(PromptMode m);
/// "none" | "static" | "pk"
PromptMode parse_prompt_mode(const std::string& s);

enum class SplitName { train, val, test };

std::string to_string(SplitName s);
SplitName parse_split_name(const std::string& s);

struct TrainConfig {
	std::size_t input_len = 28;    // T
	std::size_t horizon = 7;       // H
	std::size_t patch_len = 7;     // L_p
	std::size_t stride = 3;        // S
	std::size_t vocab_size = 0;    // V; 0 keeps the corpus vocabulary, larger pads it
	std::size_t n_prototypes = 100; // V*
	std::size_t embed_dim = 64;    // D
	std::size_t model_dim = 32;    // d_m
	std::size_t n_heads = 4;       // reprogramming heads
	std::size_t ff_dim = 128;
	std::size_t n_layers = 2;
	std::size_t decoder_heads = 4;
	double learning_rate = 1e-3;
	std::size_t max_epochs = 200;
	std::size_t patience = 10;
	std::size_t batch_size = 0;    // 0 = full split
	std::uint64_t seed = 1;
	std::uint64_t backbone_seed = 0x5eed0001;
	PromptMode prompt_mode = PromptMode::pk;
	std::size_t probe_windows = 8;

	/// Throws ConfigError.
	void validate() const;
	ModelDims dims() const;
};

nlohmann::json to_json(const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected with ConfigError.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

/// Scalar fields by name, as used by grid search and the results table.
void set_config_field(TrainConfig& c, const std::string& name, double value);
double get_config_field(const TrainConfig& c, const std::string& name);

/// Statistics that are fitted on the training split only.
struct FittedStats {
	ScalerParams scaler;
	VolumeBuckets buckets;
};

} // namespace pktime
