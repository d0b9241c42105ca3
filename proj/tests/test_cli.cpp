#include "doctest.h"

#include "helpers.hpp"

#include "json.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Run {
	int code = -1;
	std::string err;
};

Run run(const std::string& args) {
	const fs::path err = fs::temp_directory_path() / "pktime_cli_stderr.txt";
	const std::string cmd = std::string(PKTIME_TOOL) + " " + args + " > /dev/null 2> " + err.string();
	const int status = std::system(cmd.c_str());
	std::ifstream in(err);
	std::stringstream ss;
	ss << in.rdbuf();
	return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
	std::ifstream in(p, std::ios::binary);
	std::stringstream ss;
	ss << in.rdbuf();
	return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
	std::ofstream out(p);
	out << text;
}

std::vector<std::string> lines(const fs::path& p) {
	std::ifstream in(p);
	std::vector<std::string> out;
	for (std::string line; std::getline(in, line);) {
		out.push_back(line);
	}
	return out;
}

const std::string kTiny = "{\"train\": {\"input_len\": 14, \"horizon\": 2, \"patch_len\": 4, \"stride\": 2, "
                          "\"n_prototypes\": 8, \"embed_dim\": 8, \"model_dim\": 8, \"n_heads\": 2, "
                          "\"ff_dim\": 16, \"n_layers\": 1, \"decoder_heads\": 2, \"max_epochs\": 3, "
                          "\"learning_rate\": 0.01}}";

} // namespace

TEST_CASE("synth writes five reproducible CSVs") {
	const fs::path root = pktime::test::temp_dir("cli_synth");
	REQUIRE(run("synth --seed 7 --days 150 --out " + (root / "a").string()).code == 0);
	REQUIRE(run("synth --seed 7 --days 150 --out " + (root / "b").string()).code == 0);
	for (const char* f : {"ct.csv", "berth.csv", "weather.csv", "calendar.csv", "tat.csv"}) {
		CHECK(fs::exists(root / "a" / f));
		CHECK(slurp(root / "a" / f) == slurp(root / "b" / f));
	}
	CHECK(lines(root / "a" / "ct.csv").size() == 151);
	const auto eff = nlohmann::json::parse(slurp(root / "a" / "effective_config.json"));
	CHECK(eff.at("world").at("n_days") == 150);
	CHECK(eff.at("command") == "synth");
}

TEST_CASE("configuration and data errors use the exit code contract") {
	const fs::path root = pktime::test::temp_dir("cli_errors");
	const Run short_world = run("synth --days 50 --out " + (root / "w").string());
	CHECK(short_world.code == 2);
	const auto err = nlohmann::json::parse(short_world.err);
	CHECK(err.at("error") == "config");
	CHECK(err.at("exit_code") == 2);

	write_file(root / "bad.json", "{\"train\": {\"epochz\": 3}}");
	CHECK(run("train --config " + (root / "bad.json").string() + " --data x --out " + (root / "o").string()).code == 2);
	write_file(root / "top.json", "{\"colour\": 1}");
	CHECK(run("synth --config " + (root / "top.json").string() + " --out " + (root / "o").string()).code == 2);
	CHECK(run("train --prompt-mode loud --data x --out " + (root / "o").string()).code == 2);
	CHECK(run("train --out " + (root / "o").string()).code == 2);
	CHECK(run("frobnicate").code == 2);

	const Run missing = run("train --data " + (root / "nowhere").string() + " --out " + (root / "o").string());
	CHECK(missing.code == 3);
	CHECK(nlohmann::json::parse(missing.err).at("error") == "data");
	CHECK(run("eval --checkpoint " + (root / "none.pktc").string() + " --data " + root.string() +
	          " --out " + (root / "o").string())
	          .code == 3);
}

TEST_CASE("train, eval, forecast and analyze on a small world") {
	const fs::path root = pktime::test::temp_dir("cli_flow");
	const std::string data = (root / "data").string();
	REQUIRE(run("synth --seed 3 --days 200 --out " + data).code == 0);
	write_file(root / "tiny.json", kTiny);
	const std::string cfg = " --config " + (root / "tiny.json").string();

	REQUIRE(run("train" + cfg + " --prompt-mode pk --data " + data + " --out " + (root / "run").string()).code == 0);
	CHECK(fs::exists(root / "run" / "checkpoint.pktc"));
	CHECK(lines(root / "run" / "loss_trace.csv").size() >= 2);
	CHECK(fs::exists(root / "run" / "alignment" / "alignment_epoch_001.csv"));
	const std::string ckpt = (root / "run" / "checkpoint.pktc").string();

	REQUIRE(run("eval --checkpoint " + ckpt + " --data " + data + " --out " + (root / "e1").string()).code == 0);
	REQUIRE(run("eval --checkpoint " + ckpt + " --data " + data + " --out " + (root / "e2").string()).code == 0);
	CHECK(slurp(root / "e1" / "metrics.json") == slurp(root / "e2" / "metrics.json"));
	const auto metrics = nlohmann::json::parse(slurp(root / "e1" / "metrics.json"));
	CHECK(metrics.at("split") == "test");
	CHECK(metrics.at("prompt_mode") == "pk");

	REQUIRE(run("forecast --checkpoint " + ckpt + " --data " + data + " --anchor 2022-06-01 --out " +
	            (root / "f").string())
	            .code == 0);
	const auto rows = lines(root / "f" / "forecasts.csv");
	REQUIRE(rows.size() == 3);
	CHECK(rows[1].rfind("2022-06-01,1,2022-06-02,", 0) == 0);

	// the berth schedule ends with the series, so pk prompts past it cannot be built
	const Run past_end = run("forecast --checkpoint " + ckpt + " --data " + data + " --out " + (root / "g").string());
	CHECK(past_end.code == 3);
	CHECK(past_end.err.find("missing port context") != std::string::npos);
	CHECK(run("forecast --prompt-mode none --checkpoint " + ckpt + " --data " + data + " --out " +
	          (root / "h").string())
	          .code == 0);

	REQUIRE(run("analyze --k 2 --svg --checkpoint " + ckpt + " --data " + data + " --out " + (root / "a").string())
	            .code == 0);
	CHECK(fs::exists(root / "a" / "activations.csv"));
	CHECK(fs::exists(root / "a" / "activations.svg"));
	const auto report = nlohmann::json::parse(slurp(root / "a" / "activations.json"));
	CHECK(report.at("words").size() == 30);
	CHECK(fs::exists(root / "a" / "alignment"));

	REQUIRE(run("regress --data " + data + " --out " + (root / "r").string()).code == 0);
	const auto reg = nlohmann::json::parse(slurp(root / "r" / "regression.json"));
	CHECK(reg.at("n") == 200);
	CHECK(std::abs(reg.at("beta").get<double>() - 0.367) < 0.2);
}

TEST_CASE("ablate writes three rows per input and horizon") {
	const fs::path root = pktime::test::temp_dir("cli_ablate");
	const std::string data = (root / "data").string();
	REQUIRE(run("synth --seed 4 --days 200 --out " + data).code == 0);
	write_file(root / "tiny.json", kTiny);
	REQUIRE(run("ablate --config " + (root / "tiny.json").string() + " --epochs 2 --inputs 14 --horizons 1,2 --data " +
	            data + " --out " + (root / "ab").string())
	            .code == 0);
	const auto rows = lines(root / "ab" / "ablation.csv");
	REQUIRE(rows.size() == 7);
	CHECK(rows[0] == "input_len,horizon,prompt_mode,mse,mae,imp_ratio_to_pk_pct");
	CHECK(rows[1].rfind("14,1,none,", 0) == 0);
	CHECK(rows[2].rfind("14,1,static,", 0) == 0);
	CHECK(rows[3].rfind("14,1,pk,", 0) == 0);
	CHECK(rows[3].back() == ',');
	CHECK(rows[6].rfind("14,2,pk,", 0) == 0);
}

TEST_CASE("grid search over a configured space") {
	const fs::path root = pktime::test::temp_dir("cli_grid");
	const std::string data = (root / "data").string();
	REQUIRE(run("synth --seed 5 --days 200 --out " + data).code == 0);
	std::string cfg = kTiny;
	cfg.pop_back();
	cfg += ", \"grid\": {\"axes\": {\"n_heads\": [2, 4]}}}";
	write_file(root / "grid.json", cfg);
	REQUIRE(run("gridsearch --config " + (root / "grid.json").string() + " --epochs 2 --data " + data +
	            " --out " + (root / "g").string())
	            .code == 0);
	CHECK(lines(root / "g" / "grid.csv").size() == 3);
	CHECK(fs::exists(root / "g" / "best.pktc"));

	write_file(root / "badgrid.json", "{\"grid\": {\"axes\": {\"depth\": [1]}}}");
	CHECK(run("gridsearch --config " + (root / "badgrid.json").string() + " --data " + data + " --out " +
	          (root / "x").string())
	          .code == 2);
}
