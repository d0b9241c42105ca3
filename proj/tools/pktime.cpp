#include "run_config.hpp"

#include "pktime/analyze.hpp"
#include "pktime/checkpoint.hpp"
#include "pktime/error.hpp"
#include "pktime/io.hpp"
#include "pktime/synth.hpp"
#include "pktime/train.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

using namespace pktime;
namespace fs = std::filesystem;

namespace {

/// Flag values; unset ones leave the config file untouched.
struct Flags {
	std::string config;
	std::optional<std::string> out;
	std::optional<std::uint64_t> seed;
	std::optional<std::string> prompt_mode;
	std::optional<std::size_t> input_len;
	std::optional<std::size_t> horizon;
	std::optional<std::size_t> days;
	std::optional<std::string> data;
	std::optional<std::string> checkpoint;
	std::optional<std::string> split;
	std::optional<std::string> anchor;
	std::optional<std::size_t> epochs;
	std::optional<std::size_t> workers;
	std::optional<std::size_t> k;
	std::optional<std::string> mode;
	bool svg = false;
	std::vector<std::size_t> input_lens;
	std::vector<std::size_t> horizons;
};

void write_json(const nlohmann::json& j, const fs::path& path) {
	std::ofstream out(path);
	if (!out) {
		throw DataError(fmt::format("cannot write {}", path.string()));
	}
	out << j.dump(2) << '\n';
}

void require(bool ok, const std::string& what) {
	if (!ok) {
		throw ConfigError(what);
	}
}

cli::RunConfig resolve(const std::string& command, const Flags& f) {
	cli::RunConfig c = f.config.empty() ? cli::RunConfig{} : cli::load_run_config(f.config);
	if (!c.command.empty() && c.command != command) {
		throw ConfigError(fmt::format("config file is for '{}', not '{}'", c.command, command));
	}
	c.command = command;
	if (f.out) {
		c.out = *f.out;
	}
	if (f.seed) {
		c.world.seed = *f.seed;
		c.train.seed = *f.seed;
	}
	if (f.prompt_mode) {
		c.train.prompt_mode = parse_prompt_mode(*f.prompt_mode);
		c.eval_prompt_mode = c.train.prompt_mode;
	}
	if (f.input_len) {
		c.train.input_len = *f.input_len;
	}
	if (f.horizon) {
		c.train.horizon = *f.horizon;
	}
	if (f.days) {
		c.world.n_days = *f.days;
	}
	if (f.data) {
		c.data = *f.data;
	}
	if (f.checkpoint) {
		c.checkpoint = *f.checkpoint;
	}
	if (f.split) {
		c.split = parse_split_name(*f.split);
	}
	if (f.anchor) {
		try {
			c.anchor = parse_date(*f.anchor);
		} catch (const DataError& e) {
			throw ConfigError(fmt::format("--anchor: {}", e.what()));
		}
	}
	if (f.epochs) {
		c.train.max_epochs = *f.epochs;
	}
	if (f.workers) {
		c.grid.workers = *f.workers;
	}
	if (f.k) {
		c.analysis.k = *f.k;
	}
	if (f.mode) {
		c.analysis.mode = parse_activation_mode(*f.mode);
	}
	if (f.svg) {
		c.analysis.svg = true;
	}
	if (!f.input_lens.empty()) {
		c.ablate.input_lens = f.input_lens;
	}
	if (!f.horizons.empty()) {
		c.ablate.horizons = f.horizons;
	}

	require(!c.out.empty(), "an output directory is required (--out)");
	c.train.validate();
	c.world.validate();
	require(c.analysis.k > 0, "k must be positive");
	const bool needs_data = command == "train" || command == "eval" || command == "forecast" ||
	                        command == "ablate" || command == "gridsearch" || command == "regress";
	require(!needs_data || !c.data.empty(), fmt::format("{} needs a data directory (--data)", command));
	const bool needs_checkpoint = command == "eval" || command == "forecast" || command == "analyze";
	require(!needs_checkpoint || !c.checkpoint.empty(),
	        fmt::format("{} needs a checkpoint (--checkpoint)", command));
	for (std::size_t t : c.ablate.input_lens) {
		require(t >= 1, "ablation input lengths must be positive");
	}
	for (std::size_t h : c.ablate.horizons) {
		require(h >= 1, "ablation horizons must be positive");
	}
	return c;
}

fs::path prepare_out(const cli::RunConfig& c) {
	const fs::path out(c.out);
	fs::create_directories(out);
	write_json(cli::to_json(c), out / "effective_config.json");
	return out;
}

void write_loss_trace(const TrainResult& r, const fs::path& path) {
	std::ofstream out(path);
	if (!out) {
		throw DataError(fmt::format("cannot write {}", path.string()));
	}
	out << "epoch,train_loss,val_mse\n";
	for (const EpochRecord& e : r.history) {
		out << fmt::format("{},{:.17g},{:.17g}\n", e.epoch, e.train_loss, e.val_mse);
	}
}

nlohmann::json metrics_json(const Metrics& m, SplitName split, PromptMode mode) {
	return {{"split", to_string(split)}, {"prompt_mode", to_string(mode)}, {"mse", m.mse},
	        {"mae", m.mae}, {"n", m.n}};
}

int cmd_synth(const cli::RunConfig& c) {
	const World world = gen_world(c.world);
	const fs::path out = prepare_out(c);
	write_world(world, out.string());
	fmt::print("wrote {} days to {}\n", world.ct.size(), out.string());
	return 0;
}

int cmd_train(const cli::RunConfig& c) {
	const DataBundle bundle = load_bundle(c.data, c.port);
	const fs::path out = prepare_out(c);
	const TrainResult r = train(c.train, bundle);
	save_checkpoint(r.checkpoint, (out / "checkpoint.pktc").string());
	write_loss_trace(r, out / "loss_trace.csv");
	export_alignment(alignment_trace(r.alignment), (out / "alignment").string(), false);
	fmt::print("trained {} epochs, best epoch {} with validation MSE {:.6g}\n", r.history.size(),
	           r.best_epoch, r.checkpoint.best_val_loss);
	return 0;
}

int cmd_eval(const cli::RunConfig& c) {
	const Checkpoint ck = load_checkpoint(c.checkpoint);
	const DataBundle bundle = load_bundle(c.data, c.port);
	const PromptMode mode = c.eval_prompt_mode.value_or(ck.config.prompt_mode);
	const fs::path out = prepare_out(c);
	const Evaluation ev = evaluate(ck, bundle, c.split, mode);
	write_json(metrics_json(ev.metrics, c.split, mode), out / "metrics.json");
	write_forecasts_csv(ev.forecasts, (out / "eval_forecasts.csv").string());
	fmt::print("{} MSE {:.6g} MAE {:.6g} over {} values\n", to_string(c.split), ev.metrics.mse,
	           ev.metrics.mae, ev.metrics.n);
	return 0;
}

int cmd_forecast(const cli::RunConfig& c) {
	const Checkpoint ck = load_checkpoint(c.checkpoint);
	const DataBundle bundle = load_bundle(c.data, c.port);
	const PromptMode mode = c.eval_prompt_mode.value_or(ck.config.prompt_mode);
	const Date anchor = c.anchor.value_or(bundle.series.end());
	const std::vector<ForecastRow> rows = forecast_at(ck, bundle, anchor, mode);
	const fs::path out = prepare_out(c);
	write_forecasts_csv(rows, (out / "forecasts.csv").string());
	fmt::print("forecast {} days after {}\n", rows.size(), format_date(anchor));
	return 0;
}

int cmd_ablate(const cli::RunConfig& c) {
	const DataBundle bundle = load_bundle(c.data, c.port);
	const std::vector<std::size_t> inputs =
		c.ablate.input_lens.empty() ? std::vector<std::size_t>{c.train.input_len} : c.ablate.input_lens;
	const std::vector<std::size_t> horizons =
		c.ablate.horizons.empty() ? std::vector<std::size_t>{c.train.horizon} : c.ablate.horizons;
	const fs::path out = prepare_out(c);
	std::ofstream csv(out / "ablation.csv");
	if (!csv) {
		throw DataError(fmt::format("cannot write {}", (out / "ablation.csv").string()));
	}
	csv << "input_len,horizon,prompt_mode,mse,mae,imp_ratio_to_pk_pct\n";
	for (std::size_t t : inputs) {
		for (std::size_t h : horizons) {
			std::map<PromptMode, Metrics> results;
			for (PromptMode mode : {PromptMode::none, PromptMode::static_stats, PromptMode::pk}) {
				TrainConfig tc = c.train;
				tc.input_len = t;
				tc.horizon = h;
				tc.prompt_mode = mode;
				tc.validate();
				const TrainResult r = train(tc, bundle);
				results[mode] = evaluate(r.checkpoint, bundle, SplitName::test, mode).metrics;
			}
			const double pk = results[PromptMode::pk].mse;
			for (PromptMode mode : {PromptMode::none, PromptMode::static_stats, PromptMode::pk}) {
				const Metrics& m = results[mode];
				const std::string ratio =
					mode == PromptMode::pk ? "" : fmt::format("{:.6g}", 100.0 * (m.mse - pk) / pk);
				csv << fmt::format("{},{},{},{:.17g},{:.17g},{}\n", t, h, to_string(mode), m.mse, m.mae, ratio);
			}
			fmt::print("T={} H={}: none {:.4f} static {:.4f} pk {:.4f}\n", t, h,
			           results[PromptMode::none].mse, results[PromptMode::static_stats].mse, pk);
		}
	}
	return 0;
}

int cmd_gridsearch(const cli::RunConfig& c) {
	const DataBundle bundle = load_bundle(c.data, c.port);
	const GridSpace space = c.grid.space.axes.empty() ? GridSpace::timellm() : c.grid.space;
	for (const TrainConfig& tc : space.enumerate(c.train)) {
		tc.validate();
	}
	const fs::path out = prepare_out(c);
	const GridResult g = grid_search(space, c.train, bundle, {}, c.grid.workers);
	write_grid_csv(g, (out / "grid.csv").string());
	if (!g.best_run) {
		throw NumericError("grid search: every configuration failed");
	}
	save_checkpoint(g.best_run->checkpoint, (out / "best.pktc").string());
	const GridRow& best = g.rows[*g.best];
	fmt::print("{} configurations, best validation MSE {:.6g} (test MSE {:.6g})\n", g.rows.size(),
	           best.val_mse, best.test_mse);
	return 0;
}

int cmd_analyze(const cli::RunConfig& c) {
	const Checkpoint ck = load_checkpoint(c.checkpoint);
	const WordSets& sets = default_word_sets();
	const WordGroups groups{{"random", sets.random}, {"domain", sets.domain},
	                        {"time_series", sets.time_series}};
	const ActivationReport report =
		prototype_activations(ck.tensor("prototypes.w_e").value, groups, ck.vocab, c.analysis.k, c.analysis.mode);
	const fs::path out = prepare_out(c);

	std::vector<std::string> rows;
	for (std::size_t p : report.prototypes) {
		rows.push_back(fmt::format("prototype_{}", p));
	}
	std::vector<std::string> cols;
	nlohmann::json words = nlohmann::json::array();
	for (const WordActivation& w : report.words) {
		cols.push_back(w.word);
		words.push_back({{"word", w.word}, {"group", w.group}, {"token_id", w.token_id}, {"oov", w.oov},
		                 {"multi_token", w.multi_token}, {"top_prototypes", w.top_prototypes}});
	}
	export_heatmap(report.grid, (out / "activations.csv").string(), rows, cols);
	write_json({{"mode", to_string(report.mode)}, {"k", report.k}, {"words", words}},
	           out / "activations.json");
	if (c.analysis.svg) {
		export_heatmap_svg(report.grid, (out / "activations.svg").string());
	}

	if (!c.data.empty()) {
		const DataBundle bundle = load_bundle(c.data, c.port);
		const Model model = restore_model(ck);
		DataBundle local = bundle;
		local.meta = ck.meta;
		const PreparedSplit val = prepare_split(model, local, FittedStats{ck.scaler, ck.buckets},
		                                        SplitName::val, ck.config.prompt_mode);
		if (val.samples.empty()) {
			throw DataError("analyze: the validation split holds no complete window");
		}
		const std::size_t n = std::min(ck.config.probe_windows, val.samples.size());
		const Matrix a = model.probe_attention(std::span(val.samples).first(n));
		AlignmentTrace trace = alignment_trace({a});
		trace.epochs = {ck.epochs};
		export_alignment(trace, (out / "alignment").string(), c.analysis.svg);
	}
	fmt::print("activation report for {} words over {} prototypes\n", report.words.size(),
	           report.prototypes.size());
	return 0;
}

int cmd_regress(const cli::RunConfig& c) {
	const fs::path dir(c.data);
	const CtSeries ct = read_ct_csv((dir / "ct.csv").string());
	const std::vector<TatDay> tat = read_tat_csv((dir / "tat.csv").string());
	std::map<Date, double> by_date;
	for (const TatDay& d : tat) {
		by_date[d.date] = d.minutes;
	}
	std::vector<double> x;
	std::vector<double> y;
	for (std::size_t i = 0; i < ct.size(); ++i) {
		const auto it = by_date.find(ct.date_at(i));
		if (it != by_date.end()) {
			x.push_back(ct.values[i]);
			y.push_back(it->second);
		}
	}
	const RegressionResult r = loglog_regress(x, y);
	const fs::path out = prepare_out(c);
	write_json(to_json(r), out / "regression.json");
	fmt::print("beta {:.6g} (SE {:.3g}), intercept {:.6g}, n {}\n", r.beta, r.se, r.intercept, r.n);
	return 0;
}

std::string one_line(std::string s) {
	for (char& ch : s) {
		if (ch == '\n' || ch == '\r') {
			ch = ' ';
		}
	}
	return s;
}

int fail(const char* kind, int code, const std::string& message) {
	const nlohmann::json j{{"error", kind}, {"exit_code", code}, {"message", one_line(message)}};
	std::cerr << j.dump() << '\n';
	return code;
}

} // namespace

int main(int argc, char** argv) {
	CLI::App app{"Container throughput forecasting with port-knowledge prompts"};
	app.require_subcommand(1);
	Flags f;

	auto common = [&](CLI::App* sub) {
		sub->add_option("--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
		sub->add_option("--out", f.out, "output directory");
		sub->add_option("--seed", f.seed, "random seed");
		sub->add_option("--prompt-mode", f.prompt_mode, "none, static or pk");
		sub->add_option("--T", f.input_len, "input length in days");
		sub->add_option("--H", f.horizon, "forecast horizon in days");
	};
	auto data_opt = [&](CLI::App* sub) { sub->add_option("--data", f.data, "data directory"); };
	auto ckpt_opt = [&](CLI::App* sub) { sub->add_option("--checkpoint", f.checkpoint, "checkpoint file"); };
	auto epochs_opt = [&](CLI::App* sub) { sub->add_option("--epochs", f.epochs, "maximum training epochs"); };

	CLI::App* synth = app.add_subcommand("synth", "generate a synthetic port world");
	common(synth);
	synth->add_option("--days", f.days, "number of days");

	CLI::App* train_cmd = app.add_subcommand("train", "train a model");
	common(train_cmd);
	data_opt(train_cmd);
	epochs_opt(train_cmd);

	CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
	common(eval);
	data_opt(eval);
	ckpt_opt(eval);
	eval->add_option("--split", f.split, "train, val or test");

	CLI::App* forecast = app.add_subcommand("forecast", "forecast from an anchor date");
	common(forecast);
	data_opt(forecast);
	ckpt_opt(forecast);
	forecast->add_option("--anchor", f.anchor, "last observed date (default: series end)");

	CLI::App* ablate = app.add_subcommand("ablate", "compare none, static and pk prompts");
	common(ablate);
	data_opt(ablate);
	epochs_opt(ablate);
	ablate->add_option("--inputs", f.input_lens, "input lengths, comma separated")->delimiter(',');
	ablate->add_option("--horizons", f.horizons, "horizons, comma separated")->delimiter(',');

	CLI::App* grid = app.add_subcommand("gridsearch", "search the hyperparameter grid");
	common(grid);
	data_opt(grid);
	epochs_opt(grid);
	grid->add_option("--workers", f.workers, "parallel training runs");

	CLI::App* analyze = app.add_subcommand("analyze", "prototype activations and alignment");
	common(analyze);
	data_opt(analyze);
	ckpt_opt(analyze);
	analyze->add_option("--k", f.k, "top prototypes per word");
	analyze->add_option("--mode", f.mode, "signed or absolute");
	analyze->add_flag("--svg", f.svg, "also write SVG heatmaps");

	CLI::App* regress = app.add_subcommand("regress", "log-log regression of turnaround on throughput");
	common(regress);
	data_opt(regress);

	try {
		app.parse(argc, argv);
	} catch (const CLI::CallForHelp& e) {
		return app.exit(e);
	} catch (const CLI::CallForAllHelp& e) {
		return app.exit(e);
	} catch (const CLI::ParseError& e) {
		return fail("config", 2, e.what());
	}

	const std::map<CLI::App*, std::pair<std::string, int (*)(const cli::RunConfig&)>> commands{
		{synth, {"synth", cmd_synth}},        {train_cmd, {"train", cmd_train}},
		{eval, {"eval", cmd_eval}},           {forecast, {"forecast", cmd_forecast}},
		{ablate, {"ablate", cmd_ablate}},     {grid, {"gridsearch", cmd_gridsearch}},
		{analyze, {"analyze", cmd_analyze}}, {regress, {"regress", cmd_regress}},
	};
	try {
		for (const auto& [sub, entry] : commands) {
			if (sub->parsed()) {
				return entry.second(resolve(entry.first, f));
			}
		}
		return fail("config", 2, "no command given");
	} catch (const ConfigError& e) {
		return fail("config", 2, e.what());
	} catch (const DataError& e) {
		return fail("data", 3, e.what());
	} catch (const ShapeError& e) {
		return fail("data", 3, e.what());
	} catch (const NumericError& e) {
		return fail("numeric", 4, e.what());
	} catch (const std::exception& e) {
		return fail("internal", 1, e.what());
	}
}
