#include "pktime/model.hpp"

#include "pktime/error.hpp"
#include "pktime/series.hpp"

#include <fmt/format.h>

namespace pktime {

namespace {

constexpr std::uint64_t kEmbeddingSeedSalt = 0x9e3779b97f4a7c15ULL;

} // namespace

std::size_t ModelDims::n_patches() const {
	return patch_count(input_len, patch_len, stride);
}

Model::Model(const ModelDims& dims, Vocabulary vocab, std::uint64_t init_seed)
	: dims_(dims), vocab_(std::move(vocab)),
	  embedding_(make_embedding(vocab_.size(), dims.embed_dim(), dims.decoder.seed ^ kEmbeddingSeedSalt)),
	  decoder_(dims.decoder) {
	std::mt19937_64 rng(init_seed);
	prototypes_ = make_text_prototype_layer(dims.n_prototypes, vocab_.size(), rng);
	heads_ = make_reprogram_heads(dims.patch_len, dims.embed_dim(), dims.model_dim, dims.n_heads, rng);
	head_ = make_forecast_head(dims.n_patches(), dims.embed_dim(), dims.horizon, rng);
}

Model::Model(const ModelDims& dims, Vocabulary vocab, Param embedding,
             TextPrototypeLayer prototypes, ReprogramHeads heads, FrozenDecoder decoder,
             ForecastHead head)
	: dims_(dims), vocab_(std::move(vocab)), embedding_(std::move(embedding)),
	  prototypes_(std::move(prototypes)), heads_(std::move(heads)), decoder_(std::move(decoder)),
	  head_(std::move(head)) {
	embedding_.frozen = true;
	const std::size_t d = dims_.embed_dim();
	const std::size_t p = dims_.n_patches();
	const bool ok = embedding_.value.rows() == vocab_.size() && embedding_.value.cols() == d &&
	                prototypes_.w_e.value.rows() == dims_.n_prototypes &&
	                prototypes_.w_e.value.cols() == vocab_.size() &&
	                heads_.w_q.value.rows() == dims_.patch_len &&
	                heads_.w_q.value.cols() == dims_.model_dim && heads_.w_k.value.rows() == d &&
	                heads_.w_o.value.cols() == d && head_.w_h.value.rows() == p * d &&
	                head_.w_h.value.cols() == dims_.horizon && heads_.n_heads == dims_.n_heads;
	if (!ok) {
		throw ShapeError("model: stored tensors do not match the configured dimensions");
	}
}

std::vector<Param*> Model::params() {
	std::vector<Param*> out{&embedding_, &prototypes_.w_e, &heads_.w_q, &heads_.w_k,
	                        &heads_.w_v, &heads_.w_o};
	for (Param* p : decoder_.params()) {
		out.push_back(p);
	}
	out.push_back(&head_.w_h);
	out.push_back(&head_.b_h);
	return out;
}

std::vector<const Param*> Model::params() const {
	std::vector<const Param*> out{&embedding_, &prototypes_.w_e, &heads_.w_q, &heads_.w_k,
	                              &heads_.w_v, &heads_.w_o};
	for (const Param* p : decoder_.params()) {
		out.push_back(p);
	}
	out.push_back(&head_.w_h);
	out.push_back(&head_.b_h);
	return out;
}

std::vector<Param*> Model::trainable_params() {
	std::vector<Param*> out;
	for (Param* p : params()) {
		if (!p->frozen) {
			out.push_back(p);
		}
	}
	return out;
}

Matrix Model::embed_text(const std::string& text) const {
	const std::vector<std::string> tokens = tokenize(text);
	return embed_prompt(tokens, vocab_, embedding_.value);
}

std::shared_ptr<const PrefixCache> Model::encode_prompt(const std::string& text) const {
	return std::make_shared<const PrefixCache>(decoder_.build_cache(embed_text(text)));
}

PipelineTrace Model::forward(const Matrix& patches, const Matrix& prompt_embedding) const {
	PipelineTrace t;
	t.prototypes = text_prototypes(embedding_.value, prototypes_);
	t.xhat = embed_patches(patches, heads_);
	t.reprogrammed = reprogram(t.xhat, t.prototypes, heads_);
	t.patch_embedding = project_tokens(t.reprogrammed.z, heads_);
	t.prompt_embedding = prompt_embedding.rows() == 0 ? Matrix(0, dims_.embed_dim())
	                                                  : prompt_embedding;
	t.r = concat_prefix(t.prompt_embedding, t.patch_embedding);
	t.hidden = decoder_.decode(t.r);
	t.forecast = head_forward(t.hidden, dims_.n_patches(), head_);
	return t;
}

Matrix Model::predict(const Sample& sample) const {
	return predict(std::span<const Sample>(&sample, 1)).front();
}

std::vector<Matrix> Model::predict(std::span<const Sample> samples) const {
	const Matrix prototypes = text_prototypes(embedding_.value, prototypes_);
	const PrototypeKeys kv = prototype_keys(prototypes, heads_);
	std::vector<Matrix> out;
	out.reserve(samples.size());
	for (const Sample& s : samples) {
		const ReprogramResult rp = reprogram(embed_patches(s.patches, heads_), kv, heads_.n_heads);
		const Matrix pe = project_tokens(rp.z, heads_);
		const PrefixCache* prefix = s.prefix && s.prefix->length > 0 ? s.prefix.get() : nullptr;
		const DecodeTrace tr = decoder_.forward(pe, prefix, false);
		out.push_back(head_forward(tr.hidden, dims_.n_patches(), head_));
	}
	return out;
}

double Model::loss(std::span<const Sample> batch, bool with_grad) {
	if (batch.empty()) {
		throw DataError("loss: empty batch");
	}
	const Matrix prototypes = text_prototypes(embedding_.value, prototypes_);
	const PrototypeKeys kv = prototype_keys(prototypes, heads_);
	Matrix dkeys(kv.keys.rows(), kv.keys.cols());
	Matrix dvalues(kv.values.rows(), kv.values.cols());
	const double denom = static_cast<double>(batch.size() * dims_.horizon);
	const std::size_t n_patches = dims_.n_patches();

	double total = 0.0;
	for (const Sample& s : batch) {
		const Matrix xhat = embed_patches(s.patches, heads_);
		const ReprogramResult rp = reprogram(xhat, kv, heads_.n_heads);
		const Matrix pe = project_tokens(rp.z, heads_);
		const PrefixCache* prefix = s.prefix && s.prefix->length > 0 ? s.prefix.get() : nullptr;
		const DecodeTrace tr = decoder_.forward(pe, prefix, with_grad);
		const Matrix yhat = head_forward(tr.hidden, n_patches, head_);
		if (yhat.cols() != s.target.cols()) {
			throw ShapeError(fmt::format("loss: forecast {} vs target {}", yhat.shape(), s.target.shape()));
		}
		Matrix dy(1, dims_.horizon);
		for (std::size_t h = 0; h < dims_.horizon; ++h) {
			const double e = yhat(0, h) - s.target(0, h);
			total += e * e;
			dy(0, h) = 2.0 * e / denom;
		}
		if (!with_grad) {
			continue;
		}
		const Matrix dtail = head_backward(tr.hidden, n_patches, dy, head_);
		const Matrix dpe = decoder_.backward(tr, prefix, dtail);
		heads_.w_o.accumulate(matmul_tn(rp.z, dpe));
		const Matrix dz = matmul_nt(dpe, heads_.w_o.value);
		const ReprogramGrads rg = reprogram_backward(xhat, kv, rp, dz, heads_.n_heads);
		heads_.w_q.accumulate(matmul_tn(s.patches, rg.dxhat));
		add_inplace(dkeys, rg.dkeys);
		add_inplace(dvalues, rg.dvalues);
	}
	if (with_grad) {
		prototype_backward(embedding_.value, prototypes, dkeys, dvalues, prototypes_, heads_);
	}
	return total / denom;
}

Matrix Model::probe_attention(std::span<const Sample> samples) const {
	if (samples.empty()) {
		throw DataError("probe_attention: no samples");
	}
	const Matrix prototypes = text_prototypes(embedding_.value, prototypes_);
	const PrototypeKeys kv = prototype_keys(prototypes, heads_);
	Matrix acc;
	for (const Sample& s : samples) {
		const ReprogramResult rp = reprogram(embed_patches(s.patches, heads_), kv, heads_.n_heads);
		Matrix m = mean_attention(rp);
		if (acc.empty()) {
			acc = std::move(m);
		} else {
			add_inplace(acc, m);
		}
	}
	return scale(acc, 1.0 / static_cast<double>(samples.size()));
}

} // namespace pktime
