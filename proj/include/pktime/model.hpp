#pragma once

#include "pktime/backbone.hpp"
#include "pktime/embed.hpp"
#include "pktime/matrix.hpp"
#include "pktime/reprogram.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace pktime {

struct ModelDims {
	std::size_t input_len = 28;   // T
	std::size_t horizon = 7;      // H
	std::size_t patch_len = 7;    // L_p
	std::size_t stride = 3;       // S
	std::size_t n_prototypes = 100; // V*
	std::size_t model_dim = 32;   // d_m
	std::size_t n_heads = 4;      // reprogramming heads
	DecoderConfig decoder;        // D, layers, heads, ff, frozen seed

	std::size_t embed_dim() const { return decoder.model_dim; }
	std::size_t n_patches() const;
};

/// Every intermediate of one uncached forward pass.
struct PipelineTrace {
	Matrix prototypes;      // V* x D
	Matrix xhat;            // P x d_m
	ReprogramResult reprogrammed; // z: P x d_m
	Matrix patch_embedding; // P x D
	Matrix prompt_embedding; // N_T x D
	Matrix r;               // (N_T + P) x D
	Matrix hidden;          // (N_T + P) x D
	Matrix forecast;        // 1 x H
};

/// One training/evaluation example: its patches, decoded prompt prefix and target.
struct Sample {
	Matrix patches;
	std::shared_ptr<const PrefixCache> prefix;
	Matrix target; // 1 x H, may be empty for pure forecasting
};

/**
 * @brief The assembled forecaster: frozen embedding and decoder, trainable
 * prototypes, reprogramming projections and head.
 */
class Model {
public:
	/// Fresh model. The embedding and decoder derive from dims.decoder.seed;
	/// trainable weights from init_seed.
	Model(const ModelDims& dims, Vocabulary vocab, std::uint64_t init_seed);
	Model(const ModelDims& dims, Vocabulary vocab, Param embedding, TextPrototypeLayer prototypes,
	      ReprogramHeads heads, FrozenDecoder decoder, ForecastHead head);

	const ModelDims& dims() const { return dims_; }
	const Vocabulary& vocab() const { return vocab_; }
	const Param& embedding() const { return embedding_; }
	const TextPrototypeLayer& prototype_layer() const { return prototypes_; }
	const ReprogramHeads& heads() const { return heads_; }
	const FrozenDecoder& decoder() const { return decoder_; }
	const ForecastHead& head() const { return head_; }

	std::vector<Param*> params();
	std::vector<const Param*> params() const;
	std::vector<Param*> trainable_params();

	Matrix embed_text(const std::string& text) const;
	std::shared_ptr<const PrefixCache> encode_prompt(const std::string& text) const;

	/// Uncached pass over R = [prompt; patches] through the full decoder.
	PipelineTrace forward(const Matrix& patches, const Matrix& prompt_embedding) const;

	/// Cached pass; bitwise equal to forward(...).forecast for the same prompt.
	Matrix predict(const Sample& sample) const;
	std::vector<Matrix> predict(std::span<const Sample> samples) const;

	/// Mean squared error over the batch (all windows and steps). With
	/// with_grad, gradients are accumulated into the trainable params.
	double loss(std::span<const Sample> batch, bool with_grad);

	/// Reprogramming attention averaged over heads and samples, P x V*.
	Matrix probe_attention(std::span<const Sample> samples) const;

private:
	ModelDims dims_;
	Vocabulary vocab_;
	Param embedding_;
	TextPrototypeLayer prototypes_;
	ReprogramHeads heads_;
	FrozenDecoder decoder_;
	ForecastHead head_;
};

} // namespace pktime
