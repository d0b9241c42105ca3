#pragma once

#include "pktime/matrix.hpp"

#include <cstddef>
#include <random>
#include <vector>

namespace pktime {

/// Learned V* x V map that distils the word embeddings into V* prototypes.
struct TextPrototypeLayer {
	Param w_e;

	std::size_t count() const { return w_e.value.rows(); }
};

TextPrototypeLayer make_text_prototype_layer(std::size_t n_prototypes, std::size_t vocab_size,
                                             std::mt19937_64& rng);

/**
 * @brief Cross-attention projections of the reprogramming layer.
 *
 * Patches (P x L_p) are queries through w_q (L_p x d_m); prototypes
 * (V* x D) are keys and values through w_k, w_v (D x d_m); w_o (d_m x D)
 * lifts the result into the decoder's token space.
 */
struct ReprogramHeads {
	Param w_q;
	Param w_k;
	Param w_v;
	Param w_o;
	std::size_t n_heads = 1;

	std::size_t model_dim() const { return w_q.value.cols(); }
};

ReprogramHeads make_reprogram_heads(std::size_t patch_len, std::size_t embed_dim,
                                    std::size_t model_dim, std::size_t n_heads,
                                    std::mt19937_64& rng);

/// E* = W_E E
Matrix text_prototypes(const Matrix& embedding, const TextPrototypeLayer& layer);

/// X_hat = patches W_Q
Matrix embed_patches(const Matrix& patches, const ReprogramHeads& heads);

/// K = E* W_K and V = E* W_V; shared by every window of a batch.
struct PrototypeKeys {
	Matrix keys;
	Matrix values;
};

PrototypeKeys prototype_keys(const Matrix& prototypes, const ReprogramHeads& heads);

struct ReprogramResult {
	Matrix z;                       // P x d_m
	std::vector<Matrix> attention;  // per head, P x V*
	std::vector<Matrix> head_outputs;
};

/// Multi-head cross-attention; per head softmax(X_h K_h^T / sqrt(d_head)) V_h.
ReprogramResult reprogram(const Matrix& xhat, const PrototypeKeys& kv, std::size_t n_heads);
ReprogramResult reprogram(const Matrix& xhat, const Matrix& prototypes,
                          const ReprogramHeads& heads);

/// Head-averaged attention, P x V*.
Matrix mean_attention(const ReprogramResult& r);

/// patch embedding = Z W_O
Matrix project_tokens(const Matrix& z, const ReprogramHeads& heads);

struct ReprogramGrads {
	Matrix dxhat;
	Matrix dkeys;
	Matrix dvalues;
};

ReprogramGrads reprogram_backward(const Matrix& xhat, const PrototypeKeys& kv,
                                  const ReprogramResult& fwd, const Matrix& dz,
                                  std::size_t n_heads);

/// Pushes accumulated dK, dV back to W_K, W_V and W_E.
void prototype_backward(const Matrix& embedding, const Matrix& prototypes, const Matrix& dkeys,
                        const Matrix& dvalues, TextPrototypeLayer& layer, ReprogramHeads& heads);

} // namespace pktime
