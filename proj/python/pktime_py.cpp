#include "pktime/analyze.hpp"
#include "pktime/checkpoint.hpp"
#include "pktime/context.hpp"
#include "pktime/error.hpp"
#include "pktime/io.hpp"
#include "pktime/series.hpp"
#include "pktime/synth.hpp"
#include "pktime/train.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "json.hpp"

namespace py = pybind11;
using namespace pktime;

namespace {

std::vector<std::string> dates_of(const CtSeries& s) {
	std::vector<std::string> out;
	for (std::size_t i = 0; i < s.size(); ++i) {
		out.push_back(format_date(s.date_at(i)));
	}
	return out;
}

py::dict metrics_dict(const Metrics& m) {
	py::dict d;
	d["mse"] = m.mse;
	d["mae"] = m.mae;
	d["n"] = m.n;
	return d;
}

py::list forecast_rows(const std::vector<ForecastRow>& rows) {
	py::list out;
	for (const ForecastRow& r : rows) {
		py::dict d;
		d["anchor"] = format_date(r.anchor);
		d["step"] = r.step;
		d["date"] = format_date(r.date);
		d["forecast_scaled"] = r.forecast_scaled;
		d["truth_scaled"] = r.truth_scaled;
		d["forecast"] = r.forecast;
		d["truth"] = r.truth;
		out.append(d);
	}
	return out;
}

TrainConfig config_from(const std::string& json_text) {
	try {
		return train_config_from_json(nlohmann::json::parse(json_text));
	} catch (const nlohmann::json::exception& e) {
		throw ConfigError(e.what());
	}
}

WorldConfig world_from(py::kwargs kwargs) {
	WorldConfig c;
	for (const auto& [key, value] : kwargs) {
		const std::string k = py::str(key);
		if (k == "seed") {
			c.seed = value.cast<std::uint64_t>();
		} else if (k == "n_days") {
			c.n_days = value.cast<std::size_t>();
		} else if (k == "noise_std") {
			c.noise_std = value.cast<double>();
		} else if (k == "tat_noise_std") {
			c.tat_noise_std = value.cast<double>();
		} else if (k == "holidays") {
			c.holidays = value.cast<bool>();
		} else {
			throw ConfigError("unknown world option '" + k + "'");
		}
	}
	return c;
}

} // namespace

PYBIND11_MODULE(_pktime, m) {
	m.doc() = "Container throughput forecasting with port-knowledge prompts";

	py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
	py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
	py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
	py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);

	py::class_<World>(m, "World")
		.def_property_readonly("ct", [](const World& w) { return w.ct.values; })
		.def_property_readonly("tat", [](const World& w) { return w.tat; })
		.def_property_readonly("dates", [](const World& w) { return dates_of(w.ct); })
		.def("save", [](const World& w, const std::string& dir) { write_world(w, dir); }, py::arg("dir"))
		.def("__len__", [](const World& w) { return w.ct.size(); });

	m.def("gen_world", [](py::kwargs kwargs) { return gen_world(world_from(kwargs)); },
	      "Generate a synthetic port world; options: seed, n_days, noise_std, tat_noise_std, holidays.");

	py::class_<DataBundle>(m, "Bundle")
		.def_property_readonly("ct", [](const DataBundle& b) { return b.series.values; })
		.def_property_readonly("dates", [](const DataBundle& b) { return dates_of(b.series); })
		.def_property_readonly("has_context", [](const DataBundle& b) { return b.context.size() > 0; })
		.def("__len__", [](const DataBundle& b) { return b.series.size(); });

	m.def("bundle_from_world", [](const World& w, const std::string& port) { return bundle_from_world(w, port); },
	      py::arg("world"), py::arg("port") = "Busan");
	m.def("load_bundle", &load_bundle, py::arg("dir"), py::arg("port") = "Busan");

	py::class_<Checkpoint>(m, "Checkpoint")
		.def_property_readonly("config", [](const Checkpoint& c) { return to_json(c.config).dump(); })
		.def_property_readonly("best_val_loss", [](const Checkpoint& c) { return c.best_val_loss; })
		.def_property_readonly("epochs", [](const Checkpoint& c) { return c.epochs; })
		.def_property_readonly("vocabulary", [](const Checkpoint& c) { return c.vocab.tokens(); })
		.def("save", [](const Checkpoint& c, const std::string& path) { save_checkpoint(c, path); },
		     py::arg("path"));
	m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

	py::class_<TrainResult>(m, "TrainResult")
		.def_property_readonly("checkpoint", [](const TrainResult& r) { return r.checkpoint; })
		.def_property_readonly("best_epoch", [](const TrainResult& r) { return r.best_epoch; })
		.def_property_readonly("history", [](const TrainResult& r) {
			py::list out;
			for (const EpochRecord& e : r.history) {
				out.append(py::make_tuple(e.epoch, e.train_loss, e.val_mse));
			}
			return out;
		});

	m.def("train", [](const std::string& config_json, const DataBundle& bundle) {
		const TrainConfig c = config_from(config_json);
		py::gil_scoped_release release;
		return train(c, bundle);
	}, py::arg("config_json"), py::arg("bundle"));

	m.def("evaluate", [](const Checkpoint& c, const DataBundle& b, const std::string& split,
	                     const std::string& mode) {
		const PromptMode pm = mode.empty() ? c.config.prompt_mode : parse_prompt_mode(mode);
		const Evaluation ev = evaluate(c, b, parse_split_name(split), pm);
		py::dict d = metrics_dict(ev.metrics);
		d["forecasts"] = forecast_rows(ev.forecasts);
		return d;
	}, py::arg("checkpoint"), py::arg("bundle"), py::arg("split") = "test", py::arg("prompt_mode") = "");

	m.def("forecast", [](const Checkpoint& c, const DataBundle& b, const std::string& anchor,
	                     const std::string& mode) {
		const PromptMode pm = mode.empty() ? c.config.prompt_mode : parse_prompt_mode(mode);
		const Date a = anchor.empty() ? b.series.end() : parse_date(anchor);
		return forecast_rows(forecast_at(c, b, a, pm));
	}, py::arg("checkpoint"), py::arg("bundle"), py::arg("anchor") = "", py::arg("prompt_mode") = "");

	m.def("render_prompt", [](const DataBundle& b, const std::string& mode, std::size_t input_len,
	                          std::size_t horizon, const std::string& anchor) {
		const Date a = parse_date(anchor);
		const long end = days_between(b.series.start, a);
		if (end < 0 || end >= static_cast<long>(b.series.size()) || static_cast<std::size_t>(end) + 1 < input_len) {
			throw DataError("anchor " + anchor + " does not close a full input window");
		}
		const auto first = b.series.values.begin() + (end + 1 - static_cast<long>(input_len));
		const std::vector<double> raw(first, first + static_cast<long>(input_len));
		const FittedStats stats = fit_statistics(b, input_len, horizon);
		return render_prompt(parse_prompt_mode(mode), b, stats.buckets, input_len, horizon, a, raw);
	}, py::arg("bundle"), py::arg("prompt_mode"), py::arg("input_len"), py::arg("horizon"), py::arg("anchor"));

	m.def("run_baseline", [](const std::string& name, const DataBundle& b, std::size_t t, std::size_t h) {
		return metrics_dict(run_baseline(parse_baseline(name), b, t, h));
	}, py::arg("name"), py::arg("bundle"), py::arg("input_len"), py::arg("horizon"));

	m.def("loglog_regress", [](const std::vector<double>& ct, const std::vector<double>& tat) {
		return to_json(loglog_regress(ct, tat)).dump();
	}, py::arg("ct"), py::arg("tat"));

	m.def("patch_count", &patch_count, py::arg("input_len"), py::arg("patch_len"), py::arg("stride"));
	m.def("patch", [](const std::vector<double>& x, std::size_t patch_len, std::size_t stride) {
		const PatchSet p = patch(x, patch_len, stride);
		std::vector<std::vector<double>> rows;
		for (std::size_t i = 0; i < p.count; ++i) {
			rows.emplace_back(p.patches.row(i).begin(), p.patches.row(i).end());
		}
		return rows;
	}, py::arg("values"), py::arg("patch_len"), py::arg("stride"));

	m.def("split_sizes", [](std::size_t n) {
		const SplitSizes s = split_sizes(n);
		return py::make_tuple(s.train, s.val, s.test);
	}, py::arg("n"));

	m.def("prototype_activations", [](const Checkpoint& c, std::size_t k, const std::string& mode) {
		const WordSets& sets = default_word_sets();
		const WordGroups groups{{"random", sets.random}, {"domain", sets.domain}, {"time_series", sets.time_series}};
		const ActivationReport r =
			prototype_activations(c.tensor("prototypes.w_e").value, groups, c.vocab, k, parse_activation_mode(mode));
		py::dict out;
		for (const WordActivation& w : r.words) {
			out[py::str(w.word)] = w.top_prototypes;
		}
		return out;
	}, py::arg("checkpoint"), py::arg("k") = 5, py::arg("mode") = "signed");
}
