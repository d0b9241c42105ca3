#include "pktime/checkpoint.hpp"

#include "pktime/error.hpp"

#include <fmt/format.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace pktime {

namespace {

constexpr char kMagic[4] = {'P', 'K', 'T', 'C'};

using LayerMember = Param DecoderLayer::*;

constexpr std::pair<const char*, LayerMember> kLayerFields[] = {
	{"ln1_gain", &DecoderLayer::ln1_gain}, {"ln1_bias", &DecoderLayer::ln1_bias},
	{"w_q", &DecoderLayer::w_q},           {"w_k", &DecoderLayer::w_k},
	{"w_v", &DecoderLayer::w_v},           {"w_o", &DecoderLayer::w_o},
	{"ln2_gain", &DecoderLayer::ln2_gain}, {"ln2_bias", &DecoderLayer::ln2_bias},
	{"w_1", &DecoderLayer::w_1},           {"b_1", &DecoderLayer::b_1},
	{"w_2", &DecoderLayer::w_2},           {"b_2", &DecoderLayer::b_2},
};

Param named(const std::string& name, const Param& p) {
	Param out(name, p.value, p.frozen);
	return out;
}

std::string layer_tensor(std::size_t layer, const char* field) {
	return fmt::format("decoder.{}.{}", layer, field);
}

template <class T>
void put(std::string& out, T v) {
	static_assert(std::endian::native == std::endian::little, "little-endian host required");
	char buf[sizeof(T)];
	std::memcpy(buf, &v, sizeof(T));
	out.append(buf, sizeof(T));
}

template <class T>
T take(const std::string& in, std::size_t& pos) {
	if (pos + sizeof(T) > in.size()) {
		throw DataError("checkpoint: file is truncated");
	}
	T v;
	std::memcpy(&v, in.data() + pos, sizeof(T));
	pos += sizeof(T);
	return v;
}

} // namespace

const Param& Checkpoint::tensor(const std::string& name) const {
	for (const Param& p : tensors) {
		if (p.name == name) {
			return p;
		}
	}
	throw DataError(fmt::format("checkpoint: missing tensor '{}'", name));
}

Checkpoint make_checkpoint(const Model& model, const TrainConfig& config, const FittedStats& stats,
                           const PromptMeta& meta) {
	Checkpoint c;
	c.config = config;
	c.vocab = model.vocab();
	c.scaler = stats.scaler;
	c.buckets = stats.buckets;
	c.meta = meta;
	c.tensors.push_back(named("embedding", model.embedding()));
	c.tensors.push_back(named("prototypes.w_e", model.prototype_layer().w_e));
	const ReprogramHeads& h = model.heads();
	c.tensors.push_back(named("reprogram.w_q", h.w_q));
	c.tensors.push_back(named("reprogram.w_k", h.w_k));
	c.tensors.push_back(named("reprogram.w_v", h.w_v));
	c.tensors.push_back(named("reprogram.w_o", h.w_o));
	const auto& layers = model.decoder().layers();
	for (std::size_t l = 0; l < layers.size(); ++l) {
		for (const auto& [field, member] : kLayerFields) {
			c.tensors.push_back(named(layer_tensor(l, field), layers[l].*member));
		}
	}
	c.tensors.push_back(named("head.w_h", model.head().w_h));
	c.tensors.push_back(named("head.b_h", model.head().b_h));
	return c;
}

Model restore_model(const Checkpoint& checkpoint) {
	const ModelDims dims = checkpoint.config.dims();
	auto take_param = [&](const std::string& name, const std::string& local) {
		Param p = checkpoint.tensor(name);
		p.name = local;
		p.grad = Matrix(p.value.rows(), p.value.cols());
		return p;
	};

	const FrozenDecoder reference(dims.decoder);
	std::vector<DecoderLayer> layers(dims.decoder.n_layers);
	for (std::size_t l = 0; l < layers.size(); ++l) {
		for (const auto& [field, member] : kLayerFields) {
			Param p = take_param(layer_tensor(l, field), field);
			const Matrix& expect = (reference.layers()[l].*member).value;
			if (p.value.shape() != expect.shape()) {
				throw ShapeError(fmt::format("checkpoint: tensor {} has the wrong shape",
				                             layer_tensor(l, field)));
			}
			layers[l].*member = std::move(p);
		}
	}

	TextPrototypeLayer prototypes{take_param("prototypes.w_e", "w_e")};
	ReprogramHeads heads;
	heads.w_q = take_param("reprogram.w_q", "w_q");
	heads.w_k = take_param("reprogram.w_k", "w_k");
	heads.w_v = take_param("reprogram.w_v", "w_v");
	heads.w_o = take_param("reprogram.w_o", "w_o");
	heads.n_heads = dims.n_heads;
	ForecastHead head{take_param("head.w_h", "w_h"), take_param("head.b_h", "b_h")};
	Param embedding = take_param("embedding", "embedding");
	embedding.frozen = true;
	prototypes.w_e.frozen = false;
	for (Param* p : {&heads.w_q, &heads.w_k, &heads.w_v, &heads.w_o, &head.w_h, &head.b_h}) {
		p->frozen = false;
	}
	return Model(dims, checkpoint.vocab, std::move(embedding), std::move(prototypes),
	             std::move(heads), FrozenDecoder(dims.decoder, std::move(layers)), std::move(head));
}

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
	nlohmann::json header;
	header["config"] = to_json(checkpoint.config);
	header["vocabulary"] = checkpoint.vocab.tokens();
	header["scaler"] = {{"mean", checkpoint.scaler.mean}, {"std", checkpoint.scaler.std}};
	header["buckets"] = {checkpoint.buckets.q1, checkpoint.buckets.q2, checkpoint.buckets.q3};
	header["meta"] = {{"port", checkpoint.meta.port},
	                  {"period_start", format_date(checkpoint.meta.period_start)},
	                  {"period_end", format_date(checkpoint.meta.period_end)}};
	header["best_val_loss"] = checkpoint.best_val_loss;
	header["epochs"] = checkpoint.epochs;
	header["best_epoch"] = checkpoint.best_epoch;
	nlohmann::json dir = nlohmann::json::array();
	std::size_t offset = 0;
	for (const Param& p : checkpoint.tensors) {
		dir.push_back({{"name", p.name},
		               {"rows", p.value.rows()},
		               {"cols", p.value.cols()},
		               {"frozen", p.frozen},
		               {"offset", offset}});
		offset += p.value.values().size();
	}
	header["tensors"] = dir;
	const std::string text = header.dump();

	std::string out(kMagic, sizeof(kMagic));
	put<std::uint32_t>(out, checkpoint.version);
	put<std::uint64_t>(out, text.size());
	out += text;
	for (const Param& p : checkpoint.tensors) {
		for (double v : p.value.values()) {
			put<double>(out, v);
		}
	}
	return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
	if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
		throw DataError("checkpoint: not a checkpoint file (bad magic)");
	}
	std::size_t pos = sizeof(kMagic);
	Checkpoint c;
	c.version = take<std::uint32_t>(bytes, pos);
	if (c.version != Checkpoint::kFormatVersion) {
		throw DataError(fmt::format("checkpoint: unsupported format version {} (expected {})",
		                            c.version, Checkpoint::kFormatVersion));
	}
	const auto header_len = take<std::uint64_t>(bytes, pos);
	if (pos + header_len > bytes.size()) {
		throw DataError("checkpoint: file is truncated");
	}
	nlohmann::json header;
	try {
		header = nlohmann::json::parse(bytes.substr(pos, header_len));
		pos += header_len;
		c.config = train_config_from_json(header.at("config"));
		c.vocab = Vocabulary(header.at("vocabulary").get<std::vector<std::string>>());
		c.scaler = {header.at("scaler").at("mean").get<double>(),
		            header.at("scaler").at("std").get<double>()};
		const auto& b = header.at("buckets");
		c.buckets = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>()};
		const auto& m = header.at("meta");
		c.meta = {m.at("port").get<std::string>(), parse_date(m.at("period_start").get<std::string>()),
		          parse_date(m.at("period_end").get<std::string>())};
		c.best_val_loss = header.at("best_val_loss").get<double>();
		c.epochs = header.at("epochs").get<std::size_t>();
		c.best_epoch = header.at("best_epoch").get<std::size_t>();
		for (const auto& t : header.at("tensors")) {
			const auto rows = t.at("rows").get<std::size_t>();
			const auto cols = t.at("cols").get<std::size_t>();
			Matrix value(rows, cols);
			for (double& v : value.values()) {
				v = take<double>(bytes, pos);
			}
			c.tensors.emplace_back(t.at("name").get<std::string>(), std::move(value),
			                       t.at("frozen").get<bool>());
		}
	} catch (const nlohmann::json::exception& e) {
		throw DataError(fmt::format("checkpoint: malformed header: {}", e.what()));
	}
	if (pos != bytes.size()) {
		throw DataError("checkpoint: trailing bytes after the last tensor");
	}
	return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
	std::ofstream out(path, std::ios::binary);
	if (!out) {
		throw DataError(fmt::format("cannot write {}", path));
	}
	const std::string bytes = serialize_checkpoint(checkpoint);
	out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::string& path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) {
		throw DataError(fmt::format("cannot read {}", path));
	}
	const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
	return deserialize_checkpoint(bytes);
}

} // namespace pktime
