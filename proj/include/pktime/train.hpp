#pragma once

#include "pktime/checkpoint.hpp"
#include "pktime/config.hpp"
#include "pktime/context.hpp"
#include "pktime/model.hpp"
#include "pktime/series.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pktime {

struct World;

struct Metrics {
	double mse = 0.0;
	double mae = 0.0;
	std::size_t n = 0;
};

double mse(std::span<const double> pred, std::span<const double> truth);
double mae(std::span<const double> pred, std::span<const double> truth);
Metrics compute_metrics(std::span<const double> pred, std::span<const double> truth);

/// Adaptive moment estimation; skips frozen params.
class Adam {
public:
	Adam(std::vector<Param*> params, double learning_rate, double beta1 = 0.9,
	     double beta2 = 0.999, double eps = 1e-8);
	void step();
	std::size_t steps() const { return t_; }

private:
	std::vector<Param*> params_;
	std::vector<Matrix> m_;
	std::vector<Matrix> v_;
	double lr_, beta1_, beta2_, eps_;
	std::size_t t_ = 0;
};

/// Stops after `patience` consecutive epochs without strict improvement.
class EarlyStopping {
public:
	explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

	/// Records one epoch's validation loss; returns true if it is a new best.
	bool update(double val_loss);
	bool should_stop() const { return stale_ >= patience_; }
	std::size_t best_epoch() const { return best_epoch_; }
	double best_loss() const { return best_; }
	std::size_t epochs() const { return epochs_; }

private:
	std::size_t patience_;
	std::size_t epochs_ = 0;
	std::size_t best_epoch_ = 0;
	std::size_t stale_ = 0;
	double best_ = 0.0;
};

/// Daily series plus the port context it is forecast with.
struct DataBundle {
	CtSeries series;
	ContextTable context;
	PromptMeta meta;
};

DataBundle bundle_from_world(const World& world, const std::string& port = "Busan");

/// Word lists for prototype-activation reports.
struct WordSets {
	std::vector<std::string> random;
	std::vector<std::string> domain;
	std::vector<std::string> time_series;
};

const WordSets& default_word_sets();

/// Vocabulary closed under every prompt the bundle can produce, plus the
/// analysis word sets.
Vocabulary build_bundle_vocabulary(const DataBundle& bundle);

/// Prompt text for one window under the given mode ("" for none).
/// `raw_input` is the unscaled input window ending at `anchor`.
std::string render_prompt(PromptMode mode, const DataBundle& bundle, const VolumeBuckets& buckets,
                          std::size_t input_len, std::size_t horizon, Date anchor,
                          std::span<const double> raw_input);

/// Scaled windows of one split with their patches, decoded prompts and targets.
struct PreparedSplit {
	std::vector<CtWindow> windows;
	std::vector<Sample> samples;
	std::size_t max_prompt_tokens = 0;
};

FittedStats fit_statistics(const DataBundle& bundle, std::size_t input_len, std::size_t horizon);

PreparedSplit prepare_split(const Model& model, const DataBundle& bundle, const FittedStats& stats,
                            SplitName which, PromptMode mode);

struct EpochRecord {
	std::size_t epoch = 0;
	double train_loss = 0.0;
	double val_mse = 0.0;
};

struct TrainResult {
	Checkpoint checkpoint;
	std::vector<EpochRecord> history;
	/// per-epoch P x V* reprogramming attention on the probe windows
	std::vector<Matrix> alignment;
	std::size_t best_epoch = 0;
};

/**
 * @brief Seed-independent inputs of a training run: vocabulary, fitted
 * statistics and the encoded train/validation windows.
 *
 * Reusable across runs that differ only in seed, learning rate, schedule
 * or reprogramming sizes.
 */
struct TrainingData {
	TrainConfig config;
	Vocabulary vocab;
	FittedStats stats;
	PreparedSplit train;
	PreparedSplit val;
};

TrainingData prepare_training_data(const TrainConfig& config, const DataBundle& bundle);

TrainResult train(const TrainConfig& config, const DataBundle& bundle);
/// Throws ConfigError when `data` was prepared under an incompatible config.
TrainResult train(const TrainConfig& config, const DataBundle& bundle, const TrainingData& data);

struct ForecastRow {
	Date anchor;
	std::size_t step = 0;
	Date date;
	double forecast_scaled = 0.0;
	double truth_scaled = 0.0;
	double forecast = 0.0;
	double truth = 0.0;
};

struct Evaluation {
	Metrics metrics;
	std::vector<ForecastRow> forecasts;
};

Evaluation evaluate(const Checkpoint& checkpoint, const DataBundle& bundle, SplitName which,
                    PromptMode mode);
/// Forecasts the H days after `anchor` from the T days ending at it. Truth
/// fields are NaN for days beyond the series.
std::vector<ForecastRow> forecast_at(const Checkpoint& checkpoint, const DataBundle& bundle, Date anchor,
                                     PromptMode mode);
void write_forecasts_csv(const std::vector<ForecastRow>& rows, const std::string& path);

struct GridSpace {
	/// parameter name -> candidate values; enumerated in sorted order
	std::vector<std::pair<std::string, std::vector<double>>> axes;

	std::vector<TrainConfig> enumerate(const TrainConfig& base) const;
	static GridSpace timellm();
};

struct GridRow {
	TrainConfig config;
	double val_mse = 0.0;
	double test_mse = 0.0;
	double test_mae = 0.0;
	std::string error;
};

struct GridResult {
	std::vector<GridRow> rows;
	std::optional<std::size_t> best;
	std::optional<TrainResult> best_run;
};

using Trainer = std::function<TrainResult(const TrainConfig&, const DataBundle&)>;
/// An empty trainer means `train`.
GridResult grid_search(const GridSpace& space, const TrainConfig& base, const DataBundle& bundle,
                       const Trainer& trainer = {}, std::size_t workers = 1);
void write_grid_csv(const GridResult& result, const std::string& path);

enum class Baseline { seasonal_naive, mean, dlinear_style };

std::string to_string(Baseline b);
Baseline parse_baseline(const std::string& s);

/// Test-split metrics in scaled units.
Metrics run_baseline(Baseline which, const DataBundle& bundle, std::size_t input_len,
                     std::size_t horizon);

} // namespace pktime
