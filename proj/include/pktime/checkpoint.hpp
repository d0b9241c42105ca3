#pragma once

#include "pktime/context.hpp"
#include "pktime/embed.hpp"
#include "pktime/model.hpp"
#include "pktime/series.hpp"
#include "pktime/config.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pktime {

/**
 * @brief Everything needed to reproduce a trained model's forecasts.
 *
 * On disk: magic "PKTC", u32 format version, u64 header length, UTF-8 JSON
 * header (config, vocabulary, scaler, buckets, tensor directory), then raw
 * little-endian doubles in directory order.
 */
struct Checkpoint {
	static constexpr std::uint32_t kFormatVersion = 1;

	std::uint32_t version = kFormatVersion;
	TrainConfig config;
	Vocabulary vocab;
	ScalerParams scaler;
	VolumeBuckets buckets;
	PromptMeta meta;
	std::vector<Param> tensors;
	double best_val_loss = 0.0;
	std::size_t epochs = 0;
	std::size_t best_epoch = 0;

	const Param& tensor(const std::string& name) const;
};

Checkpoint make_checkpoint(const Model& model, const TrainConfig& config, const FittedStats& stats,
                           const PromptMeta& meta);
Model restore_model(const Checkpoint& checkpoint);

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

} // namespace pktime
