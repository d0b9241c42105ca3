#pragma once

#include "pktime/embed.hpp"
#include "pktime/matrix.hpp"
#include "pktime/model.hpp"
#include "pktime/synth.hpp"
#include "pktime/train.hpp"

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

namespace pktime::test {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double sd = 1.0) {
	std::mt19937_64 rng(seed);
	return random_normal(rows, cols, sd, rng);
}

/// Textbook triple loop.
inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
	Matrix out(a.rows(), b.cols());
	for (std::size_t i = 0; i < a.rows(); ++i) {
		for (std::size_t j = 0; j < b.cols(); ++j) {
			double s = 0.0;
			for (std::size_t k = 0; k < a.cols(); ++k) {
				s += a(i, k) * b(k, j);
			}
			out(i, j) = s;
		}
	}
	return out;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
	double m = 0.0;
	for (std::size_t i = 0; i < a.size(); ++i) {
		m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
	}
	return m;
}

/// Fresh empty directory under the system temp dir.
inline std::string temp_dir(const std::string& name) {
	const auto dir = std::filesystem::temp_directory_path() / ("pktime_" + name);
	std::filesystem::remove_all(dir);
	std::filesystem::create_directories(dir);
	return dir.string();
}

/// `<unk>` plus n-1 distinct words.
inline Vocabulary toy_vocab(std::size_t n) {
	std::vector<std::string> tokens{Vocabulary::kUnknown};
	for (std::size_t i = 1; i < n; ++i) {
		tokens.push_back("w" + std::string(1, static_cast<char>('a' + i % 26)) + std::to_string(i));
	}
	return Vocabulary(std::move(tokens));
}

/// V=12, V*=4, D=8, d_m=8, L_p=4, S=2, T=10, H=2.
inline ModelDims gradcheck_dims() {
	ModelDims d;
	d.input_len = 10;
	d.horizon = 2;
	d.patch_len = 4;
	d.stride = 2;
	d.n_prototypes = 4;
	d.model_dim = 8;
	d.n_heads = 2;
	d.decoder.model_dim = 8;
	d.decoder.n_layers = 2;
	d.decoder.n_heads = 2;
	d.decoder.ff_dim = 16;
	d.decoder.seed = 99;
	return d;
}

/// A short synthetic world for training tests.
inline DataBundle small_bundle(std::size_t days = 200, std::uint64_t seed = 7) {
	WorldConfig wc;
	wc.n_days = days;
	wc.seed = seed;
	return bundle_from_world(gen_world(wc));
}

/// Tiny model that trains in well under a second per epoch.
inline TrainConfig tiny_config() {
	TrainConfig c;
	c.input_len = 14;
	c.horizon = 2;
	c.patch_len = 4;
	c.stride = 2;
	c.n_prototypes = 8;
	c.embed_dim = 8;
	c.model_dim = 8;
	c.n_heads = 2;
	c.ff_dim = 16;
	c.n_layers = 1;
	c.decoder_heads = 2;
	c.max_epochs = 6;
	c.patience = 3;
	c.learning_rate = 1e-2;
	c.prompt_mode = PromptMode::none;
	c.probe_windows = 4;
	return c;
}

} // namespace pktime::test
