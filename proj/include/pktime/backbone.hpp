#pragma once

#include "pktime/matrix.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace pktime {

struct DecoderConfig {
	std::size_t model_dim = 64;
	std::size_t n_layers = 2;
	std::size_t n_heads = 4;
	std::size_t ff_dim = 128;
	std::uint64_t seed = 0x5eed0001;
};

/// One pre-norm block: x + Attn(LN(x)), then x + FF(LN(x)).
struct DecoderLayer {
	Param ln1_gain, ln1_bias;
	Param w_q, w_k, w_v, w_o;
	Param ln2_gain, ln2_bias;
	Param w_1, b_1, w_2, b_2;

	std::vector<Param*> params();
	std::vector<const Param*> params() const;
};

/// Per-layer attention keys and values of an already decoded prefix.
struct PrefixCache {
	std::vector<Matrix> keys;
	std::vector<Matrix> values;
	std::size_t length = 0;
};

struct LayerTrace {
	Matrix x_in;
	Matrix norm1;   // (x - mu) * rstd
	std::vector<double> rstd1;
	Matrix h1;
	Matrix q, k, v;
	std::vector<Matrix> weights; // per head, m x (prefix + m)
	Matrix attn;                 // concatenated head outputs before w_o
	Matrix x1;
	Matrix norm2;
	std::vector<double> rstd2;
	Matrix h2;
	Matrix u; // pre-activation of the feed-forward
	Matrix g; // gelu(u)
};

struct DecodeTrace {
	std::size_t offset = 0; // absolute position of the first new row
	std::vector<LayerTrace> layers;
	Matrix hidden;
};

/**
 * @brief Fixed-seed causal decoder whose weights are never trained.
 *
 * Sinusoidal positions (scaled by 1/sqrt(D)) are added to the input rows.
 * Gradients flow through to the input rows only.
 */
class FrozenDecoder {
public:
	explicit FrozenDecoder(const DecoderConfig& config);
	FrozenDecoder(const DecoderConfig& config, std::vector<DecoderLayer> layers);

	const DecoderConfig& config() const { return config_; }
	const std::vector<DecoderLayer>& layers() const { return layers_; }

	/// Full causal decode of an n x D sequence.
	Matrix decode(const Matrix& r) const;

	/// Decodes rows that follow `cache` (which may be null). With
	/// keep_trace the intermediates needed by backward are retained.
	DecodeTrace forward(const Matrix& rows, const PrefixCache* cache, bool keep_trace) const;

	/// Gradient with respect to the decoded rows of `trace`. Gradient into the
	/// cached prefix is discarded; decoder weights receive nothing.
	Matrix backward(const DecodeTrace& trace, const PrefixCache* cache, const Matrix& d_hidden) const;

	PrefixCache build_cache(const Matrix& prefix) const;
	PrefixCache extend_cache(const PrefixCache& base, const Matrix& rows) const;

	std::vector<Param*> params();
	std::vector<const Param*> params() const;

private:
	DecodeTrace run(const Matrix& rows, const PrefixCache* cache, bool keep_trace,
	                PrefixCache* out_cache) const;

	DecoderConfig config_;
	std::vector<DecoderLayer> layers_;
};

/// ŷ = flatten(last P hidden rows) W_H + b_H
struct ForecastHead {
	Param w_h; // (P*D) x H
	Param b_h; // 1 x H
};

ForecastHead make_forecast_head(std::size_t n_patches, std::size_t model_dim, std::size_t horizon,
                                std::mt19937_64& rng);

/// Prompt rows first, then patch rows.
Matrix concat_prefix(const Matrix& prompt_emb, const Matrix& patch_emb);

/// Returns a 1 x H row.
Matrix head_forward(const Matrix& hidden, std::size_t n_patches, const ForecastHead& head);

/// Accumulates into W_H, b_H and returns dL/d(last P hidden rows), P x D.
Matrix head_backward(const Matrix& hidden, std::size_t n_patches, const Matrix& dy,
                     ForecastHead& head);

} // namespace pktime
