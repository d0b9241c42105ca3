#include "pktime/analyze.hpp"

#include "pktime/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace pktime {

std::string to_string(ActivationMode m) {
	return m == ActivationMode::absolute ? "absolute" : "signed";
}

ActivationMode parse_activation_mode(const std::string& s) {
	if (s == "signed") {
		return ActivationMode::signed_weight;
	}
	if (s == "absolute") {
		return ActivationMode::absolute;
	}
	throw ConfigError(fmt::format("unknown activation mode '{}' (expected signed or absolute)", s));
}

ActivationReport prototype_activations(const Matrix& w_e, const WordGroups& groups,
                                       const Vocabulary& vocab, std::size_t k, ActivationMode mode) {
	if (w_e.cols() != vocab.size()) {
		throw ShapeError(fmt::format("activations: W_E has {} columns but the vocabulary holds {} tokens",
		                             w_e.cols(), vocab.size()));
	}
	ActivationReport report;
	report.mode = mode;
	report.k = std::min(k, w_e.rows());
	auto value = [&](std::size_t j, std::size_t id) {
		const double v = w_e(j, id);
		return mode == ActivationMode::absolute ? std::abs(v) : v;
	};

	for (const auto& [group, words] : groups) {
		for (const std::string& word : words) {
			WordActivation wa;
			wa.word = word;
			wa.group = group;
			const std::vector<std::string> tokens = tokenize(word);
			wa.multi_token = tokens.size() > 1;
			wa.oov = tokens.empty() || !vocab.contains(tokens.front());
			wa.token_id = tokens.empty() ? 0 : vocab.id(tokens.front());
			std::vector<std::size_t> order(w_e.rows());
			std::iota(order.begin(), order.end(), 0);
			std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
				return value(a, wa.token_id) > value(b, wa.token_id);
			});
			order.resize(report.k);
			wa.top_prototypes = std::move(order);
			report.words.push_back(std::move(wa));
		}
	}
	if (report.words.empty()) {
		throw DataError("activations: the word set is empty");
	}

	std::set<std::size_t> chosen;
	for (const WordActivation& wa : report.words) {
		chosen.insert(wa.top_prototypes.begin(), wa.top_prototypes.end());
	}
	report.prototypes.assign(chosen.begin(), chosen.end());
	report.grid = Matrix(report.prototypes.size(), report.words.size());
	for (std::size_t r = 0; r < report.prototypes.size(); ++r) {
		for (std::size_t c = 0; c < report.words.size(); ++c) {
			report.grid(r, c) = value(report.prototypes[r], report.words[c].token_id);
		}
	}
	return report;
}

AlignmentTrace alignment_trace(const std::vector<Matrix>& snapshots, double tol) {
	if (snapshots.empty()) {
		throw DataError("alignment: no attention snapshots were recorded");
	}
	AlignmentTrace trace;
	for (std::size_t e = 0; e < snapshots.size(); ++e) {
		const Matrix& m = snapshots[e];
		for (std::size_t i = 0; i < m.rows(); ++i) {
			double sum = 0.0;
			for (double v : m.row(i)) {
				sum += v;
			}
			if (std::abs(sum - 1.0) > tol) {
				throw NumericError(
					fmt::format("alignment: epoch {} row {} sums to {:.12g}", e + 1, i, sum));
			}
		}
		trace.epochs.push_back(e + 1);
		trace.matrices.push_back(m);
	}
	return trace;
}

std::vector<std::string> export_alignment(const AlignmentTrace& trace, const std::string& dir,
                                          bool svg) {
	std::filesystem::create_directories(dir);
	std::vector<std::string> paths;
	for (std::size_t i = 0; i < trace.matrices.size(); ++i) {
		const std::string stem = fmt::format("{}/alignment_epoch_{:03}", dir, trace.epochs[i]);
		std::vector<std::string> rows;
		std::vector<std::string> cols;
		for (std::size_t r = 0; r < trace.matrices[i].rows(); ++r) {
			rows.push_back(fmt::format("patch_{}", r));
		}
		for (std::size_t c = 0; c < trace.matrices[i].cols(); ++c) {
			cols.push_back(fmt::format("prototype_{}", c));
		}
		export_heatmap(trace.matrices[i], stem + ".csv", rows, cols);
		paths.push_back(stem + ".csv");
		if (svg) {
			export_heatmap_svg(trace.matrices[i], stem + ".svg");
		}
	}
	return paths;
}

RegressionResult loglog_regress(std::span<const double> ct, std::span<const double> tat) {
	if (ct.size() != tat.size()) {
		throw DataError(fmt::format("regression: {} CT values but {} TAT values", ct.size(), tat.size()));
	}
	RegressionResult r;
	std::vector<double> x;
	std::vector<double> y;
	for (std::size_t i = 0; i < ct.size(); ++i) {
		if (!(ct[i] > 0.0) || !(tat[i] > 0.0)) {
			++r.dropped;
			continue;
		}
		x.push_back(std::log(ct[i]));
		y.push_back(std::log(tat[i]));
	}
	r.n = x.size();
	if (r.n < 3) {
		throw DataError(fmt::format("regression: need at least 3 positive pairs, got {}", r.n));
	}
	const double nd = static_cast<double>(r.n);
	const double xbar = std::accumulate(x.begin(), x.end(), 0.0) / nd;
	const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / nd;
	double sxx = 0.0;
	double sxy = 0.0;
	for (std::size_t i = 0; i < r.n; ++i) {
		sxx += (x[i] - xbar) * (x[i] - xbar);
		sxy += (x[i] - xbar) * (y[i] - ybar);
	}
	if (!(sxx > 0.0)) {
		throw DataError("regression: ln(CT) has zero variance");
	}
	r.beta = sxy / sxx;
	r.intercept = ybar - r.beta * xbar;
	double ssr = 0.0;
	for (std::size_t i = 0; i < r.n; ++i) {
		const double e = y[i] - r.intercept - r.beta * x[i];
		ssr += e * e;
	}
	r.se = std::sqrt(ssr / (nd - 2.0) / sxx);
	r.ci_low = r.beta - 1.96 * r.se;
	r.ci_high = r.beta + 1.96 * r.se;
	if (r.se > 0.0) {
		r.z = r.beta / r.se;
		r.p_value = std::erfc(std::abs(r.z) / std::sqrt(2.0));
	} else {
		r.z = r.beta == 0.0 ? 0.0 : std::copysign(HUGE_VAL, r.beta);
		r.p_value = r.beta == 0.0 ? 1.0 : 0.0;
	}
	return r;
}

nlohmann::json to_json(const RegressionResult& r) {
	return {{"beta", r.beta},     {"intercept", r.intercept}, {"se", r.se},
	        {"ci_low", r.ci_low}, {"ci_high", r.ci_high},     {"z", r.z},
	        {"p_value", r.p_value}, {"n", r.n},               {"dropped", r.dropped}};
}

void export_heatmap(const Matrix& m, const std::string& path, std::vector<std::string> row_labels,
                    std::vector<std::string> col_labels) {
	ensure_finite(m, "heatmap");
	if (row_labels.empty()) {
		for (std::size_t i = 0; i < m.rows(); ++i) {
			row_labels.push_back(std::to_string(i));
		}
	}
	if (col_labels.empty()) {
		for (std::size_t j = 0; j < m.cols(); ++j) {
			col_labels.push_back(std::to_string(j));
		}
	}
	if (row_labels.size() != m.rows() || col_labels.size() != m.cols()) {
		throw ShapeError("heatmap: label count does not match the matrix shape");
	}
	std::ofstream out(path);
	if (!out) {
		throw DataError(fmt::format("cannot write {}", path));
	}
	for (const std::string& c : col_labels) {
		out << ',' << c;
	}
	out << '\n';
	for (std::size_t i = 0; i < m.rows(); ++i) {
		out << row_labels[i];
		for (std::size_t j = 0; j < m.cols(); ++j) {
			out << fmt::format(",{:.17g}", m(i, j));
		}
		out << '\n';
	}
	if (!out) {
		throw DataError(fmt::format("failed writing {}", path));
	}
}

Matrix read_heatmap(const std::string& path) {
	std::ifstream in(path);
	if (!in) {
		throw DataError(fmt::format("cannot read {}", path));
	}
	std::string line;
	if (!std::getline(in, line)) {
		throw DataError(fmt::format("{}: empty heatmap", path));
	}
	const std::size_t cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
	std::vector<double> values;
	std::size_t rows = 0;
	while (std::getline(in, line)) {
		if (line.empty()) {
			continue;
		}
		std::stringstream ss(line);
		std::string cell;
		std::getline(ss, cell, ',');
		std::size_t n = 0;
		while (std::getline(ss, cell, ',')) {
			try {
				values.push_back(std::stod(cell));
			} catch (const std::exception&) {
				throw DataError(fmt::format("{}: row {} holds a non-numeric cell '{}'", path, rows + 1, cell));
			}
			++n;
		}
		if (n != cols) {
			throw DataError(fmt::format("{}: row {} has {} values, expected {}", path, rows + 1, n, cols));
		}
		++rows;
	}
	Matrix m(rows, cols);
	std::copy(values.begin(), values.end(), m.values().begin());
	return m;
}

std::string heatmap_svg(const Matrix& m) {
	ensure_finite(m, "heatmap");
	constexpr int kCell = 16;
	double lo = 0.0;
	double hi = 0.0;
	if (!m.values().empty()) {
		const auto [mn, mx] = std::minmax_element(m.values().begin(), m.values().end());
		lo = *mn;
		hi = *mx;
	}
	auto colour = [&](double v) {
		const double t = hi > lo ? (v - lo) / (hi - lo) : 0.5;
		// blue (59,76,192) -> white -> red (180,4,38)
		auto mix = [](double a, double b, double s) { return static_cast<int>(std::lround(a + (b - a) * s)); };
		if (t < 0.5) {
			const double s = t / 0.5;
			return fmt::format("rgb({},{},{})", mix(59, 247, s), mix(76, 247, s), mix(192, 247, s));
		}
		const double s = (t - 0.5) / 0.5;
		return fmt::format("rgb({},{},{})", mix(247, 180, s), mix(247, 4, s), mix(247, 38, s));
	};
	std::string out = fmt::format(
		"<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
		"<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\">\n",
		m.cols() * kCell, m.rows() * kCell);
	for (std::size_t i = 0; i < m.rows(); ++i) {
		for (std::size_t j = 0; j < m.cols(); ++j) {
			out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
			                   j * kCell, i * kCell, kCell, kCell, colour(m(i, j)));
		}
	}
	out += "</svg>\n";
	return out;
}

void export_heatmap_svg(const Matrix& m, const std::string& path) {
	std::ofstream out(path);
	if (!out) {
		throw DataError(fmt::format("cannot write {}", path));
	}
	out << heatmap_svg(m);
}

} // namespace pktime
