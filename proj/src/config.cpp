#include "pktime/config.hpp"

#include "pktime/error.hpp"

#include <cmath>
#include <set>

#include <fmt/format.h>

namespace pktime {

std::string to_string(PromptMode m) {
	switch (m) {
	case PromptMode::none:
		return "none";
	case PromptMode::static_stats:
		return "static";
	case PromptMode::pk:
		return "pk";
	}
	return {};
}

PromptMode parse_prompt_mode(const std::string& s) {
	if (s == "none") {
		return PromptMode::none;
	}
	if (s == "static") {
		return PromptMode::static_stats;
	}
	if (s == "pk") {
		return PromptMode::pk;
	}
	throw ConfigError(fmt::format("unknown prompt mode '{}' (expected none|static|pk)", s));
}

std::string to_string(SplitName s) {
	switch (s) {
	case SplitName::train:
		return "train";
	case SplitName::val:
		return "val";
	case SplitName::test:
		return "test";
	}
	return {};
}

SplitName parse_split_name(const std::string& s) {
	if (s == "train") {
		return SplitName::train;
	}
	if (s == "val") {
		return SplitName::val;
	}
	if (s == "test") {
		return SplitName::test;
	}
	throw ConfigError(fmt::format("unknown split '{}' (expected train|val|test)", s));
}

void TrainConfig::validate() const {
	auto require = [](bool ok, const std::string& what) {
		if (!ok) {
			throw ConfigError("train config: " + what);
		}
	};
	require(input_len >= 1 && horizon >= 1, "T and H must be positive");
	require(patch_len >= 1 && patch_len <= input_len,
	        fmt::format("patch_len {} must lie in [1, T={}]", patch_len, input_len));
	require(stride >= 1, "stride must be positive");
	require(n_prototypes >= 1, "n_prototypes must be positive");
	require(vocab_size == 0 || n_prototypes <= vocab_size,
	        fmt::format("n_prototypes {} exceeds vocab_size {}", n_prototypes, vocab_size));
	require(embed_dim >= 1 && decoder_heads >= 1 && embed_dim % decoder_heads == 0,
	        fmt::format("decoder_heads {} must divide embed_dim {}", decoder_heads, embed_dim));
	require(model_dim >= 1 && n_heads >= 1 && model_dim % n_heads == 0,
	        fmt::format("n_heads {} must divide model_dim {}", n_heads, model_dim));
	require(ff_dim >= 1 && n_layers >= 1, "ff_dim and n_layers must be positive");
	require(std::isfinite(learning_rate) && learning_rate > 0.0, "learning_rate must be positive");
	require(max_epochs >= 1 && patience >= 1, "max_epochs and patience must be positive");
	require(probe_windows >= 1, "probe_windows must be positive");
}

ModelDims TrainConfig::dims() const {
	ModelDims d;
	d.input_len = input_len;
	d.horizon = horizon;
	d.patch_len = patch_len;
	d.stride = stride;
	d.n_prototypes = n_prototypes;
	d.model_dim = model_dim;
	d.n_heads = n_heads;
	d.decoder = DecoderConfig{embed_dim, n_layers, decoder_heads, ff_dim, backbone_seed};
	return d;
}

namespace {

// name -> member, for the scalar count fields
struct CountField {
	const char* name;
	std::size_t TrainConfig::*member;
};

constexpr CountField kCountFields[] = {
	{"input_len", &TrainConfig::input_len},     {"horizon", &TrainConfig::horizon},
	{"patch_len", &TrainConfig::patch_len},     {"stride", &TrainConfig::stride},
	{"vocab_size", &TrainConfig::vocab_size},   {"n_prototypes", &TrainConfig::n_prototypes},
	{"embed_dim", &TrainConfig::embed_dim},     {"model_dim", &TrainConfig::model_dim},
	{"n_heads", &TrainConfig::n_heads},         {"ff_dim", &TrainConfig::ff_dim},
	{"n_layers", &TrainConfig::n_layers},       {"decoder_heads", &TrainConfig::decoder_heads},
	{"max_epochs", &TrainConfig::max_epochs},   {"patience", &TrainConfig::patience},
	{"batch_size", &TrainConfig::batch_size},   {"probe_windows", &TrainConfig::probe_windows},
};

std::size_t to_count(double v, const std::string& name) {
	if (!(v >= 0.0) || v != std::floor(v)) {
		throw ConfigError(fmt::format("{} must be a non-negative integer, got {}", name, v));
	}
	return static_cast<std::size_t>(v);
}

} // namespace

nlohmann::json to_json(const TrainConfig& c) {
	nlohmann::json j;
	for (const auto& f : kCountFields) {
		j[f.name] = c.*f.member;
	}
	j["learning_rate"] = c.learning_rate;
	j["seed"] = c.seed;
	j["backbone_seed"] = c.backbone_seed;
	j["prompt_mode"] = to_string(c.prompt_mode);
	return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base) {
	if (!j.is_object()) {
		throw ConfigError("train config must be a JSON object");
	}
	for (const auto& [key, value] : j.items()) {
		try {
			bool known = false;
			for (const auto& f : kCountFields) {
				if (key == f.name) {
					base.*f.member = to_count(value.get<double>(), key);
					known = true;
				}
			}
			if (known) {
				continue;
			}
			if (key == "learning_rate") {
				base.learning_rate = value.get<double>();
			} else if (key == "seed") {
				base.seed = value.get<std::uint64_t>();
			} else if (key == "backbone_seed") {
				base.backbone_seed = value.get<std::uint64_t>();
			} else if (key == "prompt_mode") {
				base.prompt_mode = parse_prompt_mode(value.get<std::string>());
			} else {
				throw ConfigError(fmt::format("unknown train config key '{}'", key));
			}
		} catch (const nlohmann::json::exception& e) {
			throw ConfigError(fmt::format("train config key '{}': {}", key, e.what()));
		}
	}
	base.validate();
	return base;
}

void set_config_field(TrainConfig& c, const std::string& name, double value) {
	for (const auto& f : kCountFields) {
		if (name == f.name) {
			c.*f.member = to_count(value, name);
			return;
		}
	}
	if (name == "learning_rate") {
		c.learning_rate = value;
	} else if (name == "seed") {
		c.seed = to_count(value, name);
	} else {
		throw ConfigError(fmt::format("unknown config field '{}'", name));
	}
}

double get_config_field(const TrainConfig& c, const std::string& name) {
	for (const auto& f : kCountFields) {
		if (name == f.name) {
			return static_cast<double>(c.*f.member);
		}
	}
	if (name == "learning_rate") {
		return c.learning_rate;
	}
	if (name == "seed") {
		return static_cast<double>(c.seed);
	}
	throw ConfigError(fmt::format("unknown config field '{}'", name));
}

} // namespace pktime
