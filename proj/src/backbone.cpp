#include "pktime/backbone.hpp"

#include "pktime/error.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace pktime {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654; // sqrt(2/pi)

double gelu(double u) {
	return 0.5 * u * (1.0 + std::tanh(kGeluC * (u + 0.044715 * u * u * u)));
}

double gelu_grad(double u) {
	const double t = std::tanh(kGeluC * (u + 0.044715 * u * u * u));
	return 0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * 0.044715 * u * u);
}

void layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, Matrix& norm,
                std::vector<double>& rstd, Matrix& out) {
	const std::size_t d = x.cols();
	norm = Matrix(x.rows(), d);
	out = Matrix(x.rows(), d);
	rstd.assign(x.rows(), 0.0);
	for (std::size_t i = 0; i < x.rows(); ++i) {
		auto xr = x.row(i);
		double mu = 0.0;
		for (double v : xr) {
			mu += v;
		}
		mu /= static_cast<double>(d);
		double var = 0.0;
		for (double v : xr) {
			var += (v - mu) * (v - mu);
		}
		var /= static_cast<double>(d);
		const double rs = 1.0 / std::sqrt(var + kLayerNormEps);
		rstd[i] = rs;
		auto nr = norm.row(i);
		auto orow = out.row(i);
		for (std::size_t j = 0; j < d; ++j) {
			nr[j] = (xr[j] - mu) * rs;
			orow[j] = nr[j] * gain(0, j) + bias(0, j);
		}
	}
}

Matrix layer_norm_backward(const Matrix& dout, const Matrix& norm, const std::vector<double>& rstd,
                           const Matrix& gain) {
	const std::size_t d = dout.cols();
	Matrix dx(dout.rows(), d);
	std::vector<double> dn(d);
	for (std::size_t i = 0; i < dout.rows(); ++i) {
		double mean_dn = 0.0;
		double mean_dn_n = 0.0;
		for (std::size_t j = 0; j < d; ++j) {
			dn[j] = dout(i, j) * gain(0, j);
			mean_dn += dn[j];
			mean_dn_n += dn[j] * norm(i, j);
		}
		mean_dn /= static_cast<double>(d);
		mean_dn_n /= static_cast<double>(d);
		for (std::size_t j = 0; j < d; ++j) {
			dx(i, j) = rstd[i] * (dn[j] - mean_dn - norm(i, j) * mean_dn_n);
		}
	}
	return dx;
}

void add_row_bias(Matrix& m, const Matrix& bias) {
	for (std::size_t i = 0; i < m.rows(); ++i) {
		auto r = m.row(i);
		for (std::size_t j = 0; j < r.size(); ++j) {
			r[j] += bias(0, j);
		}
	}
}

double positional(std::size_t pos, std::size_t j, std::size_t dim) {
	const double even = static_cast<double>(j - j % 2);
	const double angle = static_cast<double>(pos) / std::pow(10000.0, even / static_cast<double>(dim));
	const double v = j % 2 == 0 ? std::sin(angle) : std::cos(angle);
	return v / std::sqrt(static_cast<double>(dim));
}

// Row j of the concatenation [cached keys; new keys].
struct KeyRows {
	const Matrix* cached;
	const Matrix& fresh;
	std::size_t offset;

	const double* operator()(std::size_t j) const {
		return j < offset ? cached->row(j).data() : fresh.row(j - offset).data();
	}
};

DecoderLayer make_layer(std::size_t d, std::size_t ff, std::mt19937_64& rng) {
	const double sd = 1.0 / std::sqrt(static_cast<double>(d));
	const double sf = 1.0 / std::sqrt(static_cast<double>(ff));
	DecoderLayer l;
	l.ln1_gain = Param("ln1_gain", Matrix(1, d, 1.0), true);
	l.ln1_bias = Param("ln1_bias", Matrix(1, d), true);
	l.w_q = Param("w_q", random_normal(d, d, sd, rng), true);
	l.w_k = Param("w_k", random_normal(d, d, sd, rng), true);
	l.w_v = Param("w_v", random_normal(d, d, sd, rng), true);
	l.w_o = Param("w_o", random_normal(d, d, sd, rng), true);
	l.ln2_gain = Param("ln2_gain", Matrix(1, d, 1.0), true);
	l.ln2_bias = Param("ln2_bias", Matrix(1, d), true);
	l.w_1 = Param("w_1", random_normal(d, ff, sd, rng), true);
	l.b_1 = Param("b_1", Matrix(1, ff), true);
	l.w_2 = Param("w_2", random_normal(ff, d, sf, rng), true);
	l.b_2 = Param("b_2", Matrix(1, d), true);
	return l;
}

} // namespace

std::vector<Param*> DecoderLayer::params() {
	return {&ln1_gain, &ln1_bias, &w_q, &w_k, &w_v, &w_o, &ln2_gain, &ln2_bias, &w_1, &b_1, &w_2, &b_2};
}

std::vector<const Param*> DecoderLayer::params() const {
	return {&ln1_gain, &ln1_bias, &w_q, &w_k, &w_v, &w_o, &ln2_gain, &ln2_bias, &w_1, &b_1, &w_2, &b_2};
}

FrozenDecoder::FrozenDecoder(const DecoderConfig& config) : config_(config) {
	if (config.model_dim == 0 || config.n_heads == 0 || config.model_dim % config.n_heads != 0) {
		throw ConfigError(fmt::format("decoder: {} heads do not divide model dim {}",
		                              config.n_heads, config.model_dim));
	}
	if (config.n_layers == 0 || config.ff_dim == 0) {
		throw ConfigError("decoder: n_layers and ff_dim must be positive");
	}
	std::mt19937_64 rng(config.seed);
	for (std::size_t l = 0; l < config.n_layers; ++l) {
		layers_.push_back(make_layer(config.model_dim, config.ff_dim, rng));
	}
}

FrozenDecoder::FrozenDecoder(const DecoderConfig& config, std::vector<DecoderLayer> layers)
	: config_(config), layers_(std::move(layers)) {
	if (layers_.size() != config_.n_layers) {
		throw ConfigError("decoder: layer count does not match config");
	}
	for (auto& l : layers_) {
		for (Param* p : l.params()) {
			p->frozen = true;
		}
	}
}

std::vector<Param*> FrozenDecoder::params() {
	std::vector<Param*> out;
	for (auto& l : layers_) {
		for (Param* p : l.params()) {
			out.push_back(p);
		}
	}
	return out;
}

std::vector<const Param*> FrozenDecoder::params() const {
	std::vector<const Param*> out;
	for (const auto& l : layers_) {
		for (const Param* p : l.params()) {
			out.push_back(p);
		}
	}
	return out;
}

Matrix FrozenDecoder::decode(const Matrix& r) const {
	return run(r, nullptr, false, nullptr).hidden;
}

DecodeTrace FrozenDecoder::forward(const Matrix& rows, const PrefixCache* cache,
                                   bool keep_trace) const {
	return run(rows, cache, keep_trace, nullptr);
}

PrefixCache FrozenDecoder::build_cache(const Matrix& prefix) const {
	return extend_cache(PrefixCache{}, prefix);
}

PrefixCache FrozenDecoder::extend_cache(const PrefixCache& base, const Matrix& rows) const {
	PrefixCache fresh;
	run(rows, base.length > 0 ? &base : nullptr, false, &fresh);
	PrefixCache out;
	out.length = base.length + rows.rows();
	for (std::size_t l = 0; l < layers_.size(); ++l) {
		if (base.length == 0) {
			out.keys.push_back(std::move(fresh.keys[l]));
			out.values.push_back(std::move(fresh.values[l]));
		} else {
			out.keys.push_back(vconcat(base.keys[l], fresh.keys[l]));
			out.values.push_back(vconcat(base.values[l], fresh.values[l]));
		}
	}
	return out;
}

DecodeTrace FrozenDecoder::run(const Matrix& rows, const PrefixCache* cache, bool keep_trace,
                               PrefixCache* out_cache) const {
	const std::size_t d = config_.model_dim;
	if (rows.cols() != d) {
		throw ShapeError(fmt::format("decode: input {} does not have width D={}", rows.shape(), d));
	}
	const std::size_t c = cache ? cache->length : 0;
	const std::size_t m = rows.rows();
	const std::size_t n_heads = config_.n_heads;
	const std::size_t dh = d / n_heads;
	const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

	DecodeTrace trace;
	trace.offset = c;
	Matrix x = rows;
	for (std::size_t i = 0; i < m; ++i) {
		auto r = x.row(i);
		for (std::size_t j = 0; j < d; ++j) {
			r[j] += positional(c + i, j, d);
		}
	}

	std::vector<double> scores(c + m);
	for (std::size_t li = 0; li < layers_.size(); ++li) {
		const DecoderLayer& layer = layers_[li];
		LayerTrace t;
		layer_norm(x, layer.ln1_gain.value, layer.ln1_bias.value, t.norm1, t.rstd1, t.h1);
		t.q = matmul(t.h1, layer.w_q.value);
		t.k = matmul(t.h1, layer.w_k.value);
		t.v = matmul(t.h1, layer.w_v.value);

		const KeyRows key{cache ? &cache->keys[li] : nullptr, t.k, c};
		const KeyRows val{cache ? &cache->values[li] : nullptr, t.v, c};
		t.attn = Matrix(m, d);
		if (keep_trace) {
			t.weights.assign(n_heads, Matrix(m, c + m));
		}
		for (std::size_t h = 0; h < n_heads; ++h) {
			const std::size_t b = h * dh;
			for (std::size_t i = 0; i < m; ++i) {
				const std::size_t visible = c + i + 1;
				const double* qi = t.q.row(i).data() + b;
				double mx = -INFINITY;
				for (std::size_t j = 0; j < visible; ++j) {
					const double* kj = key(j) + b;
					double s = 0.0;
					for (std::size_t e = 0; e < dh; ++e) {
						s += qi[e] * kj[e];
					}
					scores[j] = s * inv_sqrt;
					mx = std::max(mx, scores[j]);
				}
				double sum = 0.0;
				for (std::size_t j = 0; j < visible; ++j) {
					scores[j] = std::exp(scores[j] - mx);
					sum += scores[j];
				}
				double* oi = t.attn.row(i).data() + b;
				for (std::size_t j = 0; j < visible; ++j) {
					const double w = scores[j] / sum;
					const double* vj = val(j) + b;
					for (std::size_t e = 0; e < dh; ++e) {
						oi[e] += w * vj[e];
					}
					if (keep_trace) {
						t.weights[h](i, j) = w;
					}
				}
			}
		}

		t.x1 = add(x, matmul(t.attn, layer.w_o.value));
		layer_norm(t.x1, layer.ln2_gain.value, layer.ln2_bias.value, t.norm2, t.rstd2, t.h2);
		t.u = matmul(t.h2, layer.w_1.value);
		add_row_bias(t.u, layer.b_1.value);
		t.g = t.u;
		for (double& v : t.g.values()) {
			v = gelu(v);
		}
		Matrix f = matmul(t.g, layer.w_2.value);
		add_row_bias(f, layer.b_2.value);
		Matrix x2 = add(t.x1, f);
		if (!all_finite(x2)) {
			throw NumericError(fmt::format("decoder: non-finite activation in layer {}", li));
		}

		if (out_cache) {
			out_cache->keys.push_back(t.k);
			out_cache->values.push_back(t.v);
		}
		if (keep_trace) {
			t.x_in = std::move(x);
			trace.layers.push_back(std::move(t));
		}
		x = std::move(x2);
	}
	if (out_cache) {
		out_cache->length = m;
	}
	trace.hidden = std::move(x);
	return trace;
}

Matrix FrozenDecoder::backward(const DecodeTrace& trace, const PrefixCache* cache,
                               const Matrix& d_hidden) const {
	if (trace.layers.size() != layers_.size()) {
		throw ShapeError("decoder backward: forward was run without keep_trace");
	}
	const std::size_t d = config_.model_dim;
	const std::size_t c = trace.offset;
	if ((cache ? cache->length : 0) != c) {
		throw ShapeError("decoder backward: cache does not match the traced forward");
	}
	const std::size_t m = d_hidden.rows();
	const std::size_t n_heads = config_.n_heads;
	const std::size_t dh = d / n_heads;
	const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

	Matrix dx = d_hidden;
	std::vector<double> da(c + m);
	for (std::size_t li = layers_.size(); li-- > 0;) {
		const DecoderLayer& layer = layers_[li];
		const LayerTrace& t = trace.layers[li];

		// feed-forward branch
		Matrix dg = matmul_nt(dx, layer.w_2.value);
		for (std::size_t i = 0; i < dg.size(); ++i) {
			dg.values()[i] *= gelu_grad(t.u.values()[i]);
		}
		Matrix dh2 = matmul_nt(dg, layer.w_1.value);
		Matrix dx1 = add(dx, layer_norm_backward(dh2, t.norm2, t.rstd2, layer.ln2_gain.value));

		// attention branch
		Matrix dattn = matmul_nt(dx1, layer.w_o.value);
		Matrix dq(m, d);
		Matrix dk(m, d);
		Matrix dv(m, d);
		const KeyRows key{cache ? &cache->keys[li] : nullptr, t.k, c};
		const KeyRows val{cache ? &cache->values[li] : nullptr, t.v, c};
		for (std::size_t h = 0; h < n_heads; ++h) {
			const std::size_t b = h * dh;
			const Matrix& w = t.weights[h];
			for (std::size_t i = 0; i < m; ++i) {
				const std::size_t visible = c + i + 1;
				const double* doi = dattn.row(i).data() + b;
				double dot = 0.0;
				for (std::size_t j = 0; j < visible; ++j) {
					const double* vj = val(j) + b;
					double s = 0.0;
					for (std::size_t e = 0; e < dh; ++e) {
						s += doi[e] * vj[e];
					}
					da[j] = s;
					dot += w(i, j) * s;
				}
				const double* qi = t.q.row(i).data() + b;
				double* dqi = dq.row(i).data() + b;
				for (std::size_t j = 0; j < visible; ++j) {
					const double wij = w(i, j);
					const double ds = wij * (da[j] - dot) * inv_sqrt;
					const double* kj = key(j) + b;
					for (std::size_t e = 0; e < dh; ++e) {
						dqi[e] += ds * kj[e];
					}
					if (j >= c) {
						double* dkj = dk.row(j - c).data() + b;
						double* dvj = dv.row(j - c).data() + b;
						for (std::size_t e = 0; e < dh; ++e) {
							dkj[e] += ds * qi[e];
							dvj[e] += wij * doi[e];
						}
					}
				}
			}
		}
		Matrix dh1 = matmul_nt(dq, layer.w_q.value);
		add_inplace(dh1, matmul_nt(dk, layer.w_k.value));
		add_inplace(dh1, matmul_nt(dv, layer.w_v.value));
		dx = add(dx1, layer_norm_backward(dh1, t.norm1, t.rstd1, layer.ln1_gain.value));
	}
	return dx;
}

ForecastHead make_forecast_head(std::size_t n_patches, std::size_t model_dim, std::size_t horizon,
                                std::mt19937_64& rng) {
	const std::size_t fan_in = n_patches * model_dim;
	return {Param("w_h", random_normal(fan_in, horizon, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng)),
	        Param("b_h", Matrix(1, horizon))};
}

Matrix concat_prefix(const Matrix& prompt_emb, const Matrix& patch_emb) {
	if (prompt_emb.rows() > 0 && prompt_emb.cols() != patch_emb.cols()) {
		throw ShapeError(fmt::format("concat_prefix: prompt {} vs patches {}", prompt_emb.shape(),
		                             patch_emb.shape()));
	}
	if (prompt_emb.rows() == 0) {
		return patch_emb;
	}
	return vconcat(prompt_emb, patch_emb);
}

namespace {

Matrix flatten_tail(const Matrix& hidden, std::size_t n_patches) {
	if (hidden.rows() < n_patches) {
		throw ShapeError(fmt::format("head: hidden {} has fewer than P={} rows", hidden.shape(),
		                             n_patches));
	}
	Matrix tail = slice_rows(hidden, hidden.rows() - n_patches, hidden.rows());
	return Matrix(1, tail.size(), std::vector<double>(tail.values().begin(), tail.values().end()));
}

} // namespace

Matrix head_forward(const Matrix& hidden, std::size_t n_patches, const ForecastHead& head) {
	const Matrix flat = flatten_tail(hidden, n_patches);
	if (flat.cols() != head.w_h.value.rows()) {
		throw ShapeError(fmt::format("head: flattened {} vs W_H {}", flat.shape(),
		                             head.w_h.value.shape()));
	}
	return add(matmul(flat, head.w_h.value), head.b_h.value);
}

Matrix head_backward(const Matrix& hidden, std::size_t n_patches, const Matrix& dy,
                     ForecastHead& head) {
	const Matrix flat = flatten_tail(hidden, n_patches);
	head.w_h.accumulate(matmul_tn(flat, dy));
	head.b_h.accumulate(dy);
	const Matrix dflat = matmul_nt(dy, head.w_h.value);
	return Matrix(n_patches, hidden.cols(),
	              std::vector<double>(dflat.values().begin(), dflat.values().end()));
}

} // namespace pktime
