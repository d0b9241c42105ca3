#include "doctest.h"

#include "helpers.hpp"

#include "pktime/checkpoint.hpp"
#include "pktime/error.hpp"
#include "pktime/train.hpp"

#include <fstream>

using namespace pktime;
using pktime::test::small_bundle;
using pktime::test::tiny_config;

TEST_CASE("checkpoint round trip is bitwise exact") {
	const DataBundle b = small_bundle();
	TrainConfig c = tiny_config();
	c.prompt_mode = PromptMode::static_stats;
	c.max_epochs = 2;
	const TrainResult r = train(c, b);
	const Evaluation before = evaluate(r.checkpoint, b, SplitName::test, c.prompt_mode);

	const std::string path = pktime::test::temp_dir("ckpt") + "/model.pktc";
	save_checkpoint(r.checkpoint, path);
	const Checkpoint loaded = load_checkpoint(path);
	REQUIRE(loaded.tensors.size() == r.checkpoint.tensors.size());
	for (std::size_t i = 0; i < loaded.tensors.size(); ++i) {
		CHECK(loaded.tensors[i].name == r.checkpoint.tensors[i].name);
		CHECK(loaded.tensors[i].value == r.checkpoint.tensors[i].value);
		CHECK(loaded.tensors[i].frozen == r.checkpoint.tensors[i].frozen);
	}
	CHECK(loaded.vocab.tokens() == r.checkpoint.vocab.tokens());
	CHECK(loaded.scaler.mean == r.checkpoint.scaler.mean);
	CHECK(loaded.scaler.std == r.checkpoint.scaler.std);
	CHECK(loaded.buckets.q2 == r.checkpoint.buckets.q2);
	CHECK(loaded.best_val_loss == r.checkpoint.best_val_loss);
	CHECK(loaded.config.prompt_mode == PromptMode::static_stats);
	CHECK(serialize_checkpoint(loaded) == serialize_checkpoint(r.checkpoint));

	const Evaluation after = evaluate(loaded, b, SplitName::test, c.prompt_mode);
	REQUIRE(after.forecasts.size() == before.forecasts.size());
	for (std::size_t i = 0; i < after.forecasts.size(); ++i) {
		CHECK(after.forecasts[i].forecast_scaled == before.forecasts[i].forecast_scaled);
	}
	CHECK(after.metrics.mse == before.metrics.mse);
}

TEST_CASE("corrupt checkpoints are rejected") {
	const DataBundle b = small_bundle();
	TrainConfig c = tiny_config();
	c.max_epochs = 1;
	const std::string bytes = serialize_checkpoint(train(c, b).checkpoint);
	CHECK_THROWS_AS(deserialize_checkpoint("nope"), DataError);
	CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), DataError);
	CHECK_THROWS_AS(deserialize_checkpoint(bytes + "x"), DataError);
	std::string wrong_version = bytes;
	wrong_version[4] = 9;
	CHECK_THROWS_AS(deserialize_checkpoint(wrong_version), DataError);
	std::string bad_header = bytes;
	bad_header[16] = '#';
	CHECK_THROWS_AS(deserialize_checkpoint(bad_header), DataError);
	CHECK_THROWS_AS(load_checkpoint("/nonexistent/model.pktc"), DataError);
}

TEST_CASE("restored models refuse mismatched decoder shapes") {
	const DataBundle b = small_bundle();
	TrainConfig c = tiny_config();
	c.max_epochs = 1;
	Checkpoint ck = train(c, b).checkpoint;
	ck.config.ff_dim = 32;
	CHECK_THROWS_AS(restore_model(ck), ShapeError);
}
