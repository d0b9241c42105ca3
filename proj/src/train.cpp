#include "pktime/train.hpp"

#include "pktime/error.hpp"
#include "pktime/synth.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

namespace pktime {

double mse(std::span<const double> pred, std::span<const double> truth) {
	if (pred.size() != truth.size() || pred.empty()) {
		throw ShapeError("mse: prediction and truth must be non-empty and equally long");
	}
	double acc = 0.0;
	for (std::size_t i = 0; i < pred.size(); ++i) {
		const double e = pred[i] - truth[i];
		acc += e * e;
	}
	return acc / static_cast<double>(pred.size());
}

double mae(std::span<const double> pred, std::span<const double> truth) {
	if (pred.size() != truth.size() || pred.empty()) {
		throw ShapeError("mae: prediction and truth must be non-empty and equally long");
	}
	double acc = 0.0;
	for (std::size_t i = 0; i < pred.size(); ++i) {
		acc += std::abs(pred[i] - truth[i]);
	}
	return acc / static_cast<double>(pred.size());
}

Metrics compute_metrics(std::span<const double> pred, std::span<const double> truth) {
	return Metrics{mse(pred, truth), mae(pred, truth), pred.size()};
}

Adam::Adam(std::vector<Param*> params, double learning_rate, double beta1, double beta2, double eps)
	: params_(std::move(params)), lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
	for (const Param* p : params_) {
		m_.emplace_back(p->value.rows(), p->value.cols());
		v_.emplace_back(p->value.rows(), p->value.cols());
	}
}

void Adam::step() {
	++t_;
	const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
	const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
	for (std::size_t i = 0; i < params_.size(); ++i) {
		Param& p = *params_[i];
		if (p.frozen) {
			continue;
		}
		auto w = p.value.values();
		auto g = p.grad.values();
		auto m = m_[i].values();
		auto v = v_[i].values();
		for (std::size_t j = 0; j < w.size(); ++j) {
			m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
			v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
			const double mhat = m[j] / c1;
			const double vhat = v[j] / c2;
			w[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
		}
	}
}

bool EarlyStopping::update(double val_loss) {
	++epochs_;
	if (std::isfinite(val_loss) && (best_epoch_ == 0 || val_loss < best_)) {
		best_ = val_loss;
		best_epoch_ = epochs_;
		stale_ = 0;
		return true;
	}
	++stale_;
	return false;
}

DataBundle bundle_from_world(const World& world, const std::string& port) {
	return DataBundle{world.ct, world.context(), world.meta(port)};
}

const WordSets& default_word_sets() {
	static const WordSets sets{
		{"apple", "guitar", "purple", "elephant", "mountain", "pencil", "river", "violin",
		 "sandwich", "planet"},
		{"berth", "container", "loading", "vessel", "terminal", "port", "cargo", "holiday",
		 "weekend", "precipitation"},
		{"timestamp", "trend", "forecasting", "lags", "median", "steps", "horizon", "seasonal",
		 "history", "input"},
	};
	return sets;
}

Vocabulary build_bundle_vocabulary(const DataBundle& bundle) {
	std::vector<std::string> corpus;
	const VolumeBuckets buckets{0.0, 0.0, 0.0};
	for (const auto& [date, ctx] : bundle.context.days()) {
		const StepContext step = ctx;
		corpus.push_back(
			render_pk_prompt(bundle.meta, 1, 1, add_days(date, -1), std::span(&step, 1), buckets).text);
	}
	for (Trend trend : {Trend::upward, Trend::downward}) {
		WindowStats stats;
		stats.trend = trend;
		stats.top_lags = {1, 2, 3, 4, 5};
		corpus.push_back(render_static_prompt(bundle.meta, 1, 1, bundle.meta.period_start, stats).text);
	}
	std::string lexicon = "low average high very upward downward working day weekend holiday 0123456789";
	const WordSets& sets = default_word_sets();
	for (const auto* group : {&sets.random, &sets.domain, &sets.time_series}) {
		for (const std::string& w : *group) {
			lexicon += ' ';
			lexicon += w;
		}
	}
	corpus.push_back(lexicon);
	return Vocabulary::build(corpus);
}

std::string render_prompt(PromptMode mode, const DataBundle& bundle, const VolumeBuckets& buckets,
                          std::size_t input_len, std::size_t horizon, Date anchor,
                          std::span<const double> raw_input) {
	switch (mode) {
	case PromptMode::none:
		return {};
	case PromptMode::static_stats:
		return render_static_prompt(bundle.meta, input_len, horizon, anchor, window_stats(raw_input))
			.text;
	case PromptMode::pk: {
		const std::vector<StepContext> steps = bundle.context.horizon(anchor, horizon);
		return render_pk_prompt(bundle.meta, input_len, horizon, anchor, steps, buckets).text;
	}
	}
	throw ConfigError("render_prompt: unknown prompt mode");
}

namespace {

const CtSeries& segment_of(const SeriesSplit& s, SplitName which) {
	switch (which) {
	case SplitName::train:
		return s.train;
	case SplitName::val:
		return s.val;
	case SplitName::test:
		return s.test;
	}
	return s.test;
}

} // namespace

FittedStats fit_statistics(const DataBundle& bundle, std::size_t input_len, std::size_t horizon) {
	const SeriesSplit parts = split(bundle.series, input_len + horizon);
	FittedStats stats;
	stats.scaler = fit_scaler(parts.train.values);
	std::vector<BerthDay> days;
	for (std::size_t i = 0; i < parts.train.size(); ++i) {
		const Date d = parts.train.date_at(i);
		if (bundle.context.contains(d)) {
			days.push_back(bundle.context.at(d).berth);
		}
	}
	if (days.size() >= 4) {
		stats.buckets = fit_buckets(days);
	}
	return stats;
}

PreparedSplit prepare_split(const Model& model, const DataBundle& bundle, const FittedStats& stats,
                            SplitName which, PromptMode mode) {
	const ModelDims& dims = model.dims();
	const std::size_t t_len = dims.input_len;
	const std::size_t h_len = dims.horizon;
	const SeriesSplit parts = split(bundle.series, t_len + h_len);
	const CtSeries& segment = segment_of(parts, which);
	const std::vector<CtWindow> raw = make_windows(segment.values, segment.start, t_len, h_len);

	PreparedSplit out;
	std::vector<std::vector<std::size_t>> ids;
	ids.reserve(raw.size());
	for (const CtWindow& w : raw) {
		CtWindow scaled{apply_scaler(w.input, stats.scaler), apply_scaler(w.target, stats.scaler),
		                w.anchor_date};
		const std::string text =
			render_prompt(mode, bundle, stats.buckets, t_len, h_len, w.anchor_date, w.input);
		const std::vector<std::string> tokens = tokenize(text);
		ids.push_back(model.vocab().encode(tokens));
		out.max_prompt_tokens = std::max(out.max_prompt_tokens, tokens.size());
		out.windows.push_back(std::move(scaled));
	}

	// Prompts share long identical openings; decode that part once.
	std::size_t common = ids.empty() ? 0 : ids.front().size();
	for (const auto& seq : ids) {
		const auto mismatch = std::mismatch(seq.begin(), seq.end(), ids.front().begin(),
		                                    ids.front().begin() + static_cast<long>(common));
		common = std::min<std::size_t>(common, static_cast<std::size_t>(mismatch.first - seq.begin()));
	}
	const Matrix& table = model.embedding().value;
	const FrozenDecoder& decoder = model.decoder();
	PrefixCache base;
	if (common > 0) {
		base = decoder.build_cache(embed_ids(std::span(ids.front()).first(common), table));
	}

	for (std::size_t i = 0; i < out.windows.size(); ++i) {
		const CtWindow& w = out.windows[i];
		Sample s;
		s.patches = patch(w.input, dims.patch_len, dims.stride).patches;
		s.target = Matrix::row_vector(w.target);
		const std::span<const std::size_t> tail = std::span(ids[i]).subspan(common);
		if (ids[i].empty()) {
			s.prefix = nullptr;
		} else if (common == 0) {
			s.prefix = std::make_shared<const PrefixCache>(decoder.build_cache(embed_ids(tail, table)));
		} else if (tail.empty()) {
			s.prefix = std::make_shared<const PrefixCache>(base);
		} else {
			s.prefix =
				std::make_shared<const PrefixCache>(decoder.extend_cache(base, embed_ids(tail, table)));
		}
		out.samples.push_back(std::move(s));
	}
	return out;
}

namespace {

double split_mse(const Model& model, std::span<const Sample> samples) {
	const std::vector<Matrix> preds = model.predict(samples);
	double acc = 0.0;
	std::size_t n = 0;
	for (std::size_t i = 0; i < samples.size(); ++i) {
		const auto p = preds[i].values();
		const auto t = samples[i].target.values();
		for (std::size_t j = 0; j < p.size(); ++j) {
			const double e = p[j] - t[j];
			acc += e * e;
			++n;
		}
	}
	return n == 0 ? std::numeric_limits<double>::quiet_NaN() : acc / static_cast<double>(n);
}

Vocabulary config_vocabulary(const TrainConfig& config, const DataBundle& bundle) {
	Vocabulary vocab = build_bundle_vocabulary(bundle);
	if (config.vocab_size != 0) {
		if (config.vocab_size < vocab.size()) {
			throw ConfigError(fmt::format("vocab_size {} is smaller than the {} tokens the prompts use",
			                              config.vocab_size, vocab.size()));
		}
		vocab.pad_to(config.vocab_size);
	}
	if (config.n_prototypes > vocab.size()) {
		throw ConfigError(fmt::format("n_prototypes {} exceeds the vocabulary size {}",
		                              config.n_prototypes, vocab.size()));
	}
	return vocab;
}

} // namespace

TrainingData prepare_training_data(const TrainConfig& config, const DataBundle& bundle) {
	config.validate();
	TrainingData data;
	data.config = config;
	data.vocab = config_vocabulary(config, bundle);
	const Model encoder(config.dims(), data.vocab, config.seed);
	data.stats = fit_statistics(bundle, config.input_len, config.horizon);
	data.train = prepare_split(encoder, bundle, data.stats, SplitName::train, config.prompt_mode);
	data.val = prepare_split(encoder, bundle, data.stats, SplitName::val, config.prompt_mode);
	if (data.train.samples.empty() || data.val.samples.empty()) {
		throw DataError("train: the training and validation splits must each hold at least one window");
	}
	return data;
}

TrainResult train(const TrainConfig& config, const DataBundle& bundle) {
	return train(config, bundle, prepare_training_data(config, bundle));
}

TrainResult train(const TrainConfig& config, const DataBundle& bundle, const TrainingData& data) {
	config.validate();
	const TrainConfig& p = data.config;
	const bool compatible = p.input_len == config.input_len && p.horizon == config.horizon &&
	                        p.patch_len == config.patch_len && p.stride == config.stride &&
	                        p.vocab_size == config.vocab_size && p.embed_dim == config.embed_dim &&
	                        p.ff_dim == config.ff_dim && p.n_layers == config.n_layers &&
	                        p.decoder_heads == config.decoder_heads &&
	                        p.backbone_seed == config.backbone_seed &&
	                        p.prompt_mode == config.prompt_mode;
	if (!compatible) {
		throw ConfigError("train: prepared data was built for a different window, prompt or backbone setup");
	}
	if (config.n_prototypes > data.vocab.size()) {
		throw ConfigError(fmt::format("n_prototypes {} exceeds the vocabulary size {}",
		                              config.n_prototypes, data.vocab.size()));
	}
	Model model(config.dims(), data.vocab, config.seed);
	const FittedStats& stats = data.stats;
	const PreparedSplit& train_split = data.train;
	const PreparedSplit& val_split = data.val;

	std::vector<Param*> trainable = model.trainable_params();
	Adam adam(trainable, config.learning_rate);
	EarlyStopping stopper(config.patience);

	const std::size_t n = train_split.samples.size();
	const std::size_t batch = config.batch_size == 0 ? n : std::min(config.batch_size, n);
	std::vector<std::size_t> order(n);
	std::iota(order.begin(), order.end(), 0);
	std::mt19937_64 shuffle_rng(config.seed ^ 0x5a17ab1eULL);

	const std::size_t n_probe = std::min(config.probe_windows, val_split.samples.size());
	const std::span<const Sample> probe(val_split.samples.data(), n_probe);

	TrainResult result;
	std::vector<Matrix> best_values;
	for (const Param* p : trainable) {
		best_values.push_back(p->value);
	}
	std::vector<Sample> batch_samples;
	for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
		if (batch < n) {
			std::shuffle(order.begin(), order.end(), shuffle_rng);
		}
		double loss_sum = 0.0;
		std::size_t n_batches = 0;
		for (std::size_t b0 = 0; b0 < n; b0 += batch) {
			const std::size_t b1 = std::min(n, b0 + batch);
			batch_samples.clear();
			for (std::size_t i = b0; i < b1; ++i) {
				batch_samples.push_back(train_split.samples[order[i]]);
			}
			for (Param* p : trainable) {
				p->zero_grad();
			}
			double loss = 0.0;
			try {
				loss = model.loss(batch_samples, true);
			} catch (const NumericError& e) {
				throw NumericError(
					fmt::format("train: epoch {} batch {}: {}", epoch, n_batches + 1, e.what()));
			}
			if (!std::isfinite(loss)) {
				throw NumericError(
					fmt::format("train: non-finite loss at epoch {} batch {}", epoch, n_batches + 1));
			}
			adam.step();
			loss_sum += loss;
			++n_batches;
		}
		const double val = split_mse(model, val_split.samples);
		if (!std::isfinite(val)) {
			throw NumericError(fmt::format("train: non-finite validation loss at epoch {}", epoch));
		}
		result.history.push_back({epoch, loss_sum / static_cast<double>(n_batches), val});
		if (n_probe > 0) {
			result.alignment.push_back(model.probe_attention(probe));
		}
		if (stopper.update(val)) {
			for (std::size_t i = 0; i < trainable.size(); ++i) {
				best_values[i] = trainable[i]->value;
			}
		}
		if (stopper.should_stop()) {
			break;
		}
	}
	for (std::size_t i = 0; i < trainable.size(); ++i) {
		trainable[i]->value = best_values[i];
	}

	result.best_epoch = stopper.best_epoch();
	result.checkpoint = make_checkpoint(model, config, stats, bundle.meta);
	result.checkpoint.best_val_loss = stopper.best_loss();
	result.checkpoint.epochs = stopper.epochs();
	result.checkpoint.best_epoch = stopper.best_epoch();
	return result;
}

Evaluation evaluate(const Checkpoint& checkpoint, const DataBundle& bundle, SplitName which,
                    PromptMode mode) {
	const Model model = restore_model(checkpoint);
	DataBundle local = bundle;
	local.meta = checkpoint.meta;
	const FittedStats stats{checkpoint.scaler, checkpoint.buckets};
	const PreparedSplit prepared = prepare_split(model, local, stats, which, mode);
	if (prepared.samples.empty()) {
		throw DataError(fmt::format("evaluate: the {} split holds no complete window", to_string(which)));
	}
	const std::vector<Matrix> preds = model.predict(prepared.samples);

	Evaluation ev;
	std::vector<double> pred_flat;
	std::vector<double> truth_flat;
	for (std::size_t i = 0; i < prepared.samples.size(); ++i) {
		const CtWindow& w = prepared.windows[i];
		const auto p = preds[i].values();
		const std::vector<double> p_raw = invert_scaler(p, checkpoint.scaler);
		const std::vector<double> t_raw = invert_scaler(w.target, checkpoint.scaler);
		for (std::size_t h = 0; h < p.size(); ++h) {
			pred_flat.push_back(p[h]);
			truth_flat.push_back(w.target[h]);
			ev.forecasts.push_back(ForecastRow{w.anchor_date, h + 1,
			                                   add_days(w.anchor_date, static_cast<long>(h + 1)), p[h],
			                                   w.target[h], p_raw[h], t_raw[h]});
		}
	}
	ev.metrics = compute_metrics(pred_flat, truth_flat);
	return ev;
}

std::vector<ForecastRow> forecast_at(const Checkpoint& checkpoint, const DataBundle& bundle, Date anchor,
                                     PromptMode mode) {
	const Model model = restore_model(checkpoint);
	const std::size_t t_len = checkpoint.config.input_len;
	const std::size_t h_len = checkpoint.config.horizon;
	const CtSeries& series = bundle.series;
	const long end = days_between(series.start, anchor);
	if (series.size() == 0 || end < 0 || end >= static_cast<long>(series.size())) {
		throw DataError(fmt::format("forecast: anchor {} lies outside the series", format_date(anchor)));
	}
	if (static_cast<std::size_t>(end) + 1 < t_len) {
		throw DataError(fmt::format("forecast: anchor {} has fewer than T={} days of history",
		                            format_date(anchor), t_len));
	}
	const auto first = series.values.begin() + (end + 1 - static_cast<long>(t_len));
	const std::vector<double> raw(first, first + static_cast<long>(t_len));
	DataBundle local = bundle;
	local.meta = checkpoint.meta;
	const std::string text = render_prompt(mode, local, checkpoint.buckets, t_len, h_len, anchor, raw);

	Sample s;
	s.patches = patch(apply_scaler(raw, checkpoint.scaler), model.dims().patch_len, model.dims().stride).patches;
	s.prefix = model.encode_prompt(text);
	const Matrix pred = model.predict(s);
	const std::vector<double> p_raw = invert_scaler(pred.values(), checkpoint.scaler);

	std::vector<ForecastRow> rows;
	for (std::size_t h = 1; h <= h_len; ++h) {
		ForecastRow r{anchor, h, add_days(anchor, static_cast<long>(h)), pred(0, h - 1),
		              std::numeric_limits<double>::quiet_NaN(), p_raw[h - 1],
		              std::numeric_limits<double>::quiet_NaN()};
		const std::size_t idx = static_cast<std::size_t>(end) + h;
		if (idx < series.size()) {
			r.truth = series.values[idx];
			r.truth_scaled = (r.truth - checkpoint.scaler.mean) / checkpoint.scaler.std;
		}
		rows.push_back(r);
	}
	return rows;
}

void write_forecasts_csv(const std::vector<ForecastRow>& rows, const std::string& path) {
	std::ofstream out(path);
	if (!out) {
		throw DataError(fmt::format("cannot write {}", path));
	}
	out << "anchor_date,step,date,forecast_scaled,truth_scaled,forecast,truth\n";
	for (const ForecastRow& r : rows) {
		out << fmt::format("{},{},{},{:.17g},{:.17g},{:.17g},{:.17g}\n", format_date(r.anchor), r.step,
		                   format_date(r.date), r.forecast_scaled, r.truth_scaled, r.forecast,
		                   r.truth);
	}
}

std::vector<TrainConfig> GridSpace::enumerate(const TrainConfig& base) const {
	auto sorted = axes;
	std::sort(sorted.begin(), sorted.end(),
	          [](const auto& a, const auto& b) { return a.first < b.first; });
	for (auto& [name, values] : sorted) {
		if (values.empty()) {
			throw ConfigError(fmt::format("grid axis {} has no values", name));
		}
		std::sort(values.begin(), values.end());
		values.erase(std::unique(values.begin(), values.end()), values.end());
	}
	std::vector<TrainConfig> out{base};
	for (const auto& [name, values] : sorted) {
		std::vector<TrainConfig> next;
		for (const TrainConfig& c : out) {
			for (double v : values) {
				TrainConfig copy = c;
				set_config_field(copy, name, v);
				next.push_back(copy);
			}
		}
		out = std::move(next);
	}
	return out;
}

GridSpace GridSpace::timellm() {
	return GridSpace{{
		{"ff_dim", {128, 256}},
		{"model_dim", {32, 64}},
		{"n_heads", {4, 8}},
		{"n_prototypes", {100, 1000}},
	}};
}

GridResult grid_search(const GridSpace& space, const TrainConfig& base, const DataBundle& bundle,
                       const Trainer& trainer, std::size_t workers) {
	const std::vector<TrainConfig> configs = space.enumerate(base);
	GridResult result;
	result.rows.resize(configs.size());
	std::vector<std::optional<TrainResult>> runs(configs.size());

	auto run_one = [&](std::size_t i) {
		GridRow& row = result.rows[i];
		row.config = configs[i];
		try {
			TrainResult tr = trainer ? trainer(configs[i], bundle) : train(configs[i], bundle);
			row.val_mse = tr.checkpoint.best_val_loss;
			const Evaluation ev =
				evaluate(tr.checkpoint, bundle, SplitName::test, configs[i].prompt_mode);
			row.test_mse = ev.metrics.mse;
			row.test_mae = ev.metrics.mae;
			runs[i] = std::move(tr);
		} catch (const std::exception& e) {
			row.error = e.what();
			row.val_mse = row.test_mse = row.test_mae = std::numeric_limits<double>::quiet_NaN();
		}
	};

	workers = std::max<std::size_t>(1, std::min(workers, configs.size()));
	if (workers == 1) {
		for (std::size_t i = 0; i < configs.size(); ++i) {
			run_one(i);
		}
	} else {
		std::atomic<std::size_t> next{0};
		std::vector<std::jthread> pool;
		for (std::size_t w = 0; w < workers; ++w) {
			pool.emplace_back([&] {
				for (std::size_t i = next++; i < configs.size(); i = next++) {
					run_one(i);
				}
			});
		}
	}

	for (std::size_t i = 0; i < result.rows.size(); ++i) {
		const GridRow& row = result.rows[i];
		if (!row.error.empty()) {
			continue;
		}
		if (!result.best || row.val_mse < result.rows[*result.best].val_mse) {
			result.best = i;
		}
	}
	if (result.best) {
		result.best_run = std::move(runs[*result.best]);
	}
	return result;
}

void write_grid_csv(const GridResult& result, const std::string& path) {
	std::ofstream out(path);
	if (!out) {
		throw DataError(fmt::format("cannot write {}", path));
	}
	out << "input_len,horizon,n_prototypes,embed_dim,model_dim,n_heads,ff_dim,n_layers,"
	       "learning_rate,seed,prompt_mode,val_mse,test_mse,test_mae,best,error\n";
	for (std::size_t i = 0; i < result.rows.size(); ++i) {
		const GridRow& r = result.rows[i];
		const TrainConfig& c = r.config;
		std::string error = r.error;
		std::replace(error.begin(), error.end(), ',', ';');
		std::replace(error.begin(), error.end(), '\n', ' ');
		out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{:.17g},{:.17g},{:.17g},{},{}\n",
		                   c.input_len, c.horizon, c.n_prototypes, c.embed_dim, c.model_dim,
		                   c.n_heads, c.ff_dim, c.n_layers, c.learning_rate, c.seed,
		                   to_string(c.prompt_mode), r.val_mse, r.test_mse, r.test_mae,
		                   result.best == i ? 1 : 0, error);
	}
}

} // namespace pktime
