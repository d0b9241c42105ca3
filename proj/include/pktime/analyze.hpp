#pragma once

#include "pktime/embed.hpp"
#include "pktime/matrix.hpp"

#include "json.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pktime {

enum class ActivationMode { signed_weight, absolute };

std::string to_string(ActivationMode m);
/// "signed" | "absolute"
ActivationMode parse_activation_mode(const std::string& s);

struct WordActivation {
	std::string word;
	std::string group;
	std::size_t token_id = 0;
	bool oov = false;
	bool multi_token = false;
	/// selected prototypes, strongest first
	std::vector<std::size_t> top_prototypes;
};

/**
 * @brief Which text prototypes each probe word feeds most strongly.
 *
 * `grid` has one row per prototype in `prototypes` (the union of every
 * word's top-k, ascending) and one column per word.
 */
struct ActivationReport {
	ActivationMode mode = ActivationMode::signed_weight;
	std::size_t k = 0;
	std::vector<WordActivation> words;
	std::vector<std::size_t> prototypes;
	Matrix grid;
};

using WordGroups = std::vector<std::pair<std::string, std::vector<std::string>>>;

/// Reads W_E[j, id(word)] (or its magnitude). k is clamped to V*.
ActivationReport prototype_activations(const Matrix& w_e, const WordGroups& groups,
                                       const Vocabulary& vocab, std::size_t k, ActivationMode mode);

/// Per-epoch P x V* attention averaged over heads and probe windows.
struct AlignmentTrace {
	std::vector<std::size_t> epochs;
	std::vector<Matrix> matrices;
};

/// Throws DataError when nothing was recorded, NumericError when a row does
/// not sum to one within tol.
AlignmentTrace alignment_trace(const std::vector<Matrix>& snapshots, double tol = 1e-6);

/// Writes alignment_epoch_NNN.csv per epoch; returns the paths.
std::vector<std::string> export_alignment(const AlignmentTrace& trace, const std::string& dir,
                                          bool svg = false);

struct RegressionResult {
	double beta = 0.0;
	double intercept = 0.0;
	double se = 0.0;
	double ci_low = 0.0;
	double ci_high = 0.0;
	double z = 0.0;
	double p_value = 0.0;
	std::size_t n = 0;
	/// pairs removed because either value was not positive
	std::size_t dropped = 0;
};

/// OLS of ln(tat) on ln(ct) with a normal-approximation 95% interval.
RegressionResult loglog_regress(std::span<const double> ct, std::span<const double> tat);

nlohmann::json to_json(const RegressionResult& r);

/// CSV with column labels in the first row and row labels in the first column.
/// Empty label lists default to the indices.
void export_heatmap(const Matrix& m, const std::string& path,
                    std::vector<std::string> row_labels = {},
                    std::vector<std::string> col_labels = {});

/// Values of a CSV written by export_heatmap.
Matrix read_heatmap(const std::string& path);

/// Standalone SVG, one rect per cell, blue (low) to red (high).
std::string heatmap_svg(const Matrix& m);
void export_heatmap_svg(const Matrix& m, const std::string& path);

} // namespace pktime
