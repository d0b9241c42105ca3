#include "doctest.h"

#include "helpers.hpp"

#include "pktime/error.hpp"
#include "pktime/synth.hpp"
#include "pktime/train.hpp"

#include <cmath>
#include <fstream>

using namespace pktime;
using pktime::test::small_bundle;
using pktime::test::tiny_config;

TEST_CASE("metrics agree with a brute-force oracle") {
	std::mt19937_64 rng(1);
	std::normal_distribution<double> n(0.0, 3.0);
	for (int rep = 0; rep < 50; ++rep) {
		std::vector<double> a(1 + static_cast<std::size_t>(rep));
		std::vector<double> b(a.size());
		long double se = 0.0L;
		long double ae = 0.0L;
		for (std::size_t i = 0; i < a.size(); ++i) {
			a[i] = n(rng);
			b[i] = n(rng);
			const long double e = static_cast<long double>(a[i]) - b[i];
			se += e * e;
			ae += e < 0 ? -e : e;
		}
		const Metrics m = compute_metrics(a, b);
		CHECK(std::abs(m.mse - static_cast<double>(se / a.size())) <= 1e-12);
		CHECK(std::abs(m.mae - static_cast<double>(ae / a.size())) <= 1e-12);
		CHECK(m.n == a.size());
	}
	CHECK_THROWS_AS(mse(std::vector<double>{1.0}, std::vector<double>{}), ShapeError);
	CHECK_THROWS_AS(mae(std::vector<double>{}, std::vector<double>{}), ShapeError);
}

TEST_CASE("early stopping fires after exactly patience stale epochs") {
	EarlyStopping es(10);
	const std::vector<double> losses{5, 4, 4, 4.5, 4, 6, 4, 4, 4, 4, 4, 4, 1};
	std::size_t stopped_at = 0;
	for (double l : losses) {
		es.update(l);
		if (es.should_stop()) {
			stopped_at = es.epochs();
			break;
		}
	}
	CHECK(stopped_at == 12);
	CHECK(es.best_epoch() == 2);
	CHECK(es.best_loss() == 4.0);

	EarlyStopping improving(2);
	for (double l : {3.0, 2.0, 1.0, 0.5}) {
		improving.update(l);
		CHECK_FALSE(improving.should_stop());
	}
	EarlyStopping nan_first(3);
	CHECK_FALSE(nan_first.update(std::nan("")));
	CHECK(nan_first.update(2.0));
	CHECK(nan_first.best_epoch() == 2);
}

TEST_CASE("Adam follows the bias-corrected update and leaves frozen params alone") {
	Param w("w", Matrix::from_rows({{1.0, -2.0}}));
	Param frozen("f", Matrix::from_rows({{3.0}}), true);
	Adam adam({&w, &frozen}, 0.1);
	w.grad = Matrix::from_rows({{0.5, -4.0}});
	frozen.grad = Matrix::from_rows({{7.0}});
	adam.step();
	// first step moves each weight by lr * sign(g) up to eps
	CHECK(w.value(0, 0) == doctest::Approx(0.9).epsilon(1e-7));
	CHECK(w.value(0, 1) == doctest::Approx(-1.9).epsilon(1e-7));
	CHECK(frozen.value(0, 0) == 3.0);

	const double after_first = w.value(0, 0);
	w.grad = Matrix::from_rows({{0.5, 0.0}});
	adam.step();
	const double m = 0.9 * 0.05 + 0.1 * 0.5;
	const double v = 0.999 * 0.00025 + 0.001 * 0.25;
	const double step = 0.1 * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.999 * 0.999)) + 1e-8);
	CHECK(w.value(0, 0) == doctest::Approx(after_first - step).epsilon(1e-12));
	CHECK(adam.steps() == 2);
}

TEST_CASE("bundle vocabulary covers prompts and analysis words") {
	const DataBundle b = small_bundle(150);
	const Vocabulary v = build_bundle_vocabulary(b);
	for (const auto* set : {&default_word_sets().random, &default_word_sets().domain,
	                        &default_word_sets().time_series}) {
		for (const std::string& w : *set) {
			CHECK(v.contains(w));
		}
	}
	const FittedStats stats = fit_statistics(b, 14, 2);
	const Date anchor = b.series.date_at(20);
	const std::vector<double> raw(b.series.values.begin() + 7, b.series.values.begin() + 21);
	for (PromptMode mode : {PromptMode::pk, PromptMode::static_stats}) {
		const std::string text = render_prompt(mode, b, stats.buckets, 14, 2, anchor, raw);
		for (const std::string& t : tokenize(text)) {
			CHECK(v.contains(t));
		}
	}
	CHECK(render_prompt(PromptMode::none, b, stats.buckets, 14, 2, anchor, raw).empty());
}

TEST_CASE("training is deterministic, decreases loss and keeps frozen weights") {
	const DataBundle b = small_bundle();
	TrainConfig c = tiny_config();
	c.prompt_mode = PromptMode::pk;
	const TrainResult r1 = train(c, b);
	const TrainResult r2 = train(c, b);
	REQUIRE(!r1.history.empty());
	CHECK(r1.history.size() == r2.history.size());
	for (std::size_t i = 0; i < r1.history.size(); ++i) {
		CHECK(r1.history[i].val_mse == r2.history[i].val_mse);
	}
	CHECK(r1.history.back().train_loss < r1.history.front().train_loss);
	CHECK(r1.alignment.size() == r1.history.size());
	CHECK(r1.checkpoint.best_epoch == r1.best_epoch);

	const Model fresh(c.dims(), r1.checkpoint.vocab, c.seed);
	const Model trained = restore_model(r1.checkpoint);
	CHECK(trained.embedding().value == fresh.embedding().value);
	const auto fp = fresh.decoder().params();
	const auto tp = trained.decoder().params();
	for (std::size_t i = 0; i < fp.size(); ++i) {
		CHECK(fp[i]->value == tp[i]->value);
	}
	CHECK_FALSE(trained.head().w_h.value == fresh.head().w_h.value);

	TrainConfig other = c;
	other.seed = 2;
	CHECK_FALSE(train(other, b).history.front().val_mse == r1.history.front().val_mse);
}

TEST_CASE("a small model overfits a handful of windows") {
	WorldConfig wc;
	wc.n_days = 150;
	wc.noise_std = 0.0;
	const DataBundle b = bundle_from_world(gen_world(wc));
	TrainConfig c = tiny_config();
	c.max_epochs = 150;
	c.patience = 150;
	const TrainResult r = train(c, b);
	CHECK(r.history.back().train_loss < 0.25 * r.history.front().train_loss);
}

TEST_CASE("prepared data is reused across seeds and rejects incompatible configs") {
	const DataBundle b = small_bundle();
	const TrainConfig c = tiny_config();
	const TrainingData data = prepare_training_data(c, b);
	CHECK(data.train.samples.size() == data.train.windows.size());
	CHECK(data.val.samples.size() == 60 - 16 + 1);
	const TrainResult direct = train(c, b);
	const TrainResult reused = train(c, b, data);
	CHECK(direct.history.back().val_mse == reused.history.back().val_mse);
	TrainConfig bad = c;
	bad.horizon = 3;
	CHECK_THROWS_AS(train(bad, b, data), ConfigError);
	TrainConfig reseeded = c;
	reseeded.seed = 9;
	CHECK_NOTHROW(train(reseeded, b, data));
}

TEST_CASE("evaluation reports inverse-scaled forecasts") {
	const DataBundle b = small_bundle();
	const TrainConfig c = tiny_config();
	const TrainResult r = train(c, b);
	const Evaluation e = evaluate(r.checkpoint, b, SplitName::test, PromptMode::none);
	const std::size_t windows = 40 - 16 + 1;
	REQUIRE(e.forecasts.size() == windows * 2);
	const ScalerParams& s = r.checkpoint.scaler;
	std::vector<double> p;
	std::vector<double> t;
	for (const ForecastRow& row : e.forecasts) {
		CHECK(row.forecast == doctest::Approx(row.forecast_scaled * s.std + s.mean).epsilon(1e-12));
		CHECK(row.date == add_days(row.anchor, static_cast<long>(row.step)));
		const auto idx = static_cast<std::size_t>(days_between(b.series.start, row.date));
		CHECK(row.truth == b.series.values[idx]);
		p.push_back(row.forecast_scaled);
		t.push_back(row.truth_scaled);
	}
	CHECK(e.metrics.mse == compute_metrics(p, t).mse);
	CHECK(e.metrics.n == windows * 2);
}

TEST_CASE("grid search enumerates, records failures and selects the lowest validation loss") {
	const DataBundle b = small_bundle();
	GridSpace space;
	space.axes = {{"n_heads", {2, 4}}, {"model_dim", {8, 16}}};
	const auto configs = space.enumerate(tiny_config());
	REQUIRE(configs.size() == 4);
	CHECK(configs[0].model_dim == 8);
	CHECK(configs[1].model_dim == 8);
	CHECK(configs[1].n_heads == 4);

	const Trainer scripted = [&](const TrainConfig& c, const DataBundle& bundle) {
		if (c.model_dim == 16 && c.n_heads == 2) {
			throw NumericError("diverged");
		}
		TrainConfig quick = c;
		quick.max_epochs = 1;
		TrainResult r = train(quick, bundle);
		// a planted perfect configuration
		r.checkpoint.best_val_loss = c.model_dim == 16 && c.n_heads == 4 ? 0.0 : 1.0 + c.n_heads;
		return r;
	};
	const GridResult g = grid_search(space, tiny_config(), b, scripted, 2);
	REQUIRE(g.rows.size() == 4);
	REQUIRE(g.best.has_value());
	CHECK(g.rows[*g.best].config.model_dim == 16);
	CHECK(g.rows[*g.best].config.n_heads == 4);
	CHECK(g.rows[2].error.find("diverged") != std::string::npos);
	CHECK(std::isnan(g.rows[2].val_mse));
	CHECK(std::isfinite(g.rows[0].test_mse));

	const std::string path = pktime::test::temp_dir("grid") + "/grid.csv";
	write_grid_csv(g, path);
	std::ifstream in(path);
	std::string header;
	std::getline(in, header);
	CHECK(header.rfind("input_len,horizon,", 0) == 0);
	std::size_t lines = 0;
	for (std::string line; std::getline(in, line);) {
		++lines;
	}
	CHECK(lines == 4);
}

TEST_CASE("the paper grid holds sixteen configurations") {
	const auto configs = GridSpace::timellm().enumerate(TrainConfig{});
	CHECK(configs.size() == 16);
}

TEST_CASE("baselines on exact generators") {
	DataBundle periodic;
	periodic.series.start = Date{std::chrono::year{2022} / 1 / 1};
	const double week[7] = {3, 8, 1, 9, 4, 6, 2};
	for (std::size_t i = 0; i < 300; ++i) {
		periodic.series.values.push_back(week[i % 7]);
	}
	for (std::size_t h : {1u, 7u, 10u}) {
		CHECK(run_baseline(Baseline::seasonal_naive, periodic, 14, h).mse == 0.0);
	}
	CHECK(run_baseline(Baseline::dlinear_style, periodic, 14, 7).mse <= 1e-10);
	CHECK_THROWS_AS(run_baseline(Baseline::seasonal_naive, periodic, 6, 1), ConfigError);

	DataBundle affine;
	affine.series.start = periodic.series.start;
	for (std::size_t i = 0; i < 300; ++i) {
		affine.series.values.push_back(5.0 + 0.25 * static_cast<double>(i));
	}
	CHECK(run_baseline(Baseline::dlinear_style, affine, 14, 3).mse <= 1e-10);
	CHECK(run_baseline(Baseline::mean, affine, 14, 3).mse > 0.0);
	CHECK(parse_baseline("dlinear") == Baseline::dlinear_style);
	CHECK_THROWS_AS(parse_baseline("arima"), ConfigError);
}
