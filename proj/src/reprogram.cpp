#include "pktime/reprogram.hpp"

#include "pktime/error.hpp"

#include <cmath>

#include <fmt/format.h>

namespace pktime {

namespace {

Matrix init(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
	return random_normal(rows, cols, 1.0 / std::sqrt(static_cast<double>(rows)), rng);
}

void check_heads(std::size_t model_dim, std::size_t n_heads) {
	if (n_heads == 0 || model_dim % n_heads != 0) {
		throw ShapeError(
			fmt::format("reprogram: n_heads {} does not divide d_m {}", n_heads, model_dim));
	}
}

} // namespace

TextPrototypeLayer make_text_prototype_layer(std::size_t n_prototypes, std::size_t vocab_size,
                                             std::mt19937_64& rng) {
	if (n_prototypes == 0 || n_prototypes > vocab_size) {
		throw ConfigError(fmt::format("prototype count {} must lie in [1, V={}]", n_prototypes,
		                              vocab_size));
	}
	return {Param("w_e", init(n_prototypes, vocab_size, rng))};
}

ReprogramHeads make_reprogram_heads(std::size_t patch_len, std::size_t embed_dim,
                                    std::size_t model_dim, std::size_t n_heads,
                                    std::mt19937_64& rng) {
	check_heads(model_dim, n_heads);
	ReprogramHeads h;
	// fan-in of W_Q, W_K, W_V is its row count; W_O likewise
	h.w_q = Param("w_q", init(patch_len, model_dim, rng));
	h.w_k = Param("w_k", init(embed_dim, model_dim, rng));
	h.w_v = Param("w_v", init(embed_dim, model_dim, rng));
	h.w_o = Param("w_o", init(model_dim, embed_dim, rng));
	h.n_heads = n_heads;
	return h;
}

Matrix text_prototypes(const Matrix& embedding, const TextPrototypeLayer& layer) {
	return matmul(layer.w_e.value, embedding);
}

Matrix embed_patches(const Matrix& patches, const ReprogramHeads& heads) {
	return matmul(patches, heads.w_q.value);
}

PrototypeKeys prototype_keys(const Matrix& prototypes, const ReprogramHeads& heads) {
	return {matmul(prototypes, heads.w_k.value), matmul(prototypes, heads.w_v.value)};
}

ReprogramResult reprogram(const Matrix& xhat, const PrototypeKeys& kv, std::size_t n_heads) {
	if (xhat.cols() != kv.keys.cols() || kv.keys.rows() != kv.values.rows() ||
	    kv.values.cols() != xhat.cols()) {
		throw ShapeError(fmt::format("reprogram: X_hat {} vs K {} / V {}", xhat.shape(),
		                             kv.keys.shape(), kv.values.shape()));
	}
	check_heads(xhat.cols(), n_heads);
	const std::size_t dh = xhat.cols() / n_heads;
	ReprogramResult r;
	r.z = Matrix(xhat.rows(), xhat.cols());
	for (std::size_t h = 0; h < n_heads; ++h) {
		const std::size_t b = h * dh;
		Attention a = attention(slice_cols(xhat, b, b + dh), slice_cols(kv.keys, b, b + dh),
		                        slice_cols(kv.values, b, b + dh));
		set_cols(r.z, b, a.out);
		r.attention.push_back(std::move(a.weights));
		r.head_outputs.push_back(std::move(a.out));
	}
	return r;
}

ReprogramResult reprogram(const Matrix& xhat, const Matrix& prototypes,
                          const ReprogramHeads& heads) {
	return reprogram(xhat, prototype_keys(prototypes, heads), heads.n_heads);
}

Matrix mean_attention(const ReprogramResult& r) {
	Matrix m = r.attention.front();
	for (std::size_t h = 1; h < r.attention.size(); ++h) {
		add_inplace(m, r.attention[h]);
	}
	return scale(m, 1.0 / static_cast<double>(r.attention.size()));
}

Matrix project_tokens(const Matrix& z, const ReprogramHeads& heads) {
	return matmul(z, heads.w_o.value);
}

ReprogramGrads reprogram_backward(const Matrix& xhat, const PrototypeKeys& kv,
                                  const ReprogramResult& fwd, const Matrix& dz,
                                  std::size_t n_heads) {
	const std::size_t dh = xhat.cols() / n_heads;
	ReprogramGrads g{Matrix(xhat.rows(), xhat.cols()), Matrix(kv.keys.rows(), kv.keys.cols()),
	                 Matrix(kv.values.rows(), kv.values.cols())};
	for (std::size_t h = 0; h < n_heads; ++h) {
		const std::size_t b = h * dh;
		const Attention a{fwd.attention[h], fwd.head_outputs[h]};
		AttentionGrads ag =
			attention_backward(slice_cols(xhat, b, b + dh), slice_cols(kv.keys, b, b + dh),
		                       slice_cols(kv.values, b, b + dh), a, slice_cols(dz, b, b + dh));
		set_cols(g.dxhat, b, ag.dq);
		set_cols(g.dkeys, b, ag.dk);
		set_cols(g.dvalues, b, ag.dv);
	}
	return g;
}

void prototype_backward(const Matrix& embedding, const Matrix& prototypes, const Matrix& dkeys,
                        const Matrix& dvalues, TextPrototypeLayer& layer, ReprogramHeads& heads) {
	heads.w_k.accumulate(matmul_tn(prototypes, dkeys));
	heads.w_v.accumulate(matmul_tn(prototypes, dvalues));
	Matrix dproto = matmul_nt(dkeys, heads.w_k.value);
	add_inplace(dproto, matmul_nt(dvalues, heads.w_v.value));
	layer.w_e.accumulate(matmul_nt(dproto, embedding));
}

} // namespace pktime
