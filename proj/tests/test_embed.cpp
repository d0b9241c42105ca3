#include "doctest.h"

#include "pktime/embed.hpp"
#include "pktime/error.hpp"

#include <cmath>

using namespace pktime;

TEST_CASE("tokenizer lowercases words and splits digits") {
	const auto t = tokenize("Volumes are 2050, Holiday: New-Year");
	const std::vector<std::string> expect{"volumes", "are", "2", "0", "5", "0", "holiday", "new", "year"};
	CHECK(t == expect);
	CHECK(tokenize("").empty());
	CHECK(tokenize("-1.5").size() == 2);
}

TEST_CASE("vocabulary is sorted, distinct and maps unknowns to zero") {
	const std::vector<std::string> corpus{"berth vessel", "vessel port 12"};
	const Vocabulary v = Vocabulary::build(corpus);
	const std::vector<std::string> expect{"<unk>", "1", "2", "berth", "port", "vessel"};
	CHECK(v.tokens() == expect);
	CHECK(v.id("port") == 4);
	CHECK(v.id("submarine") == 0);
	CHECK_FALSE(v.degenerate());
	CHECK(Vocabulary().degenerate());
	CHECK_THROWS_AS(Vocabulary(std::vector<std::string>{"a"}), DataError);
	CHECK_THROWS_AS(Vocabulary(std::vector<std::string>{"<unk>", "a", "a"}), DataError);

	Vocabulary padded = v;
	padded.pad_to(9);
	CHECK(padded.size() == 9);
	CHECK(padded.token(8) == "<extra_2>");
	CHECK(padded.id("vessel") == 5);
}

TEST_CASE("embedding table is frozen, deterministic and scaled by the width") {
	const Param a = make_embedding(400, 64, 3);
	const Param b = make_embedding(400, 64, 3);
	CHECK(a.frozen);
	CHECK(a.value == b.value);
	CHECK_FALSE(a.value == make_embedding(400, 64, 4).value);
	double ss = 0.0;
	for (double x : a.value.values()) {
		ss += x * x;
	}
	const double sd = std::sqrt(ss / static_cast<double>(a.value.size()));
	CHECK(sd == doctest::Approx(1.0 / 8.0).epsilon(0.03));
}

TEST_CASE("prompt embedding looks up rows and handles the empty prompt") {
	const std::vector<std::string> corpus{"low high"};
	const Vocabulary v = Vocabulary::build(corpus);
	const Param e = make_embedding(v.size(), 4, 1);
	const std::vector<std::string> tokens{"high", "zebra", "low"};
	const Matrix m = embed_prompt(tokens, v, e.value);
	REQUIRE(m.rows() == 3);
	for (std::size_t j = 0; j < 4; ++j) {
		CHECK(m(0, j) == e.value(v.id("high"), j));
		CHECK(m(1, j) == e.value(0, j));
		CHECK(m(2, j) == e.value(v.id("low"), j));
	}
	const Matrix empty = embed_prompt(std::vector<std::string>{}, v, e.value);
	CHECK(empty.rows() == 0);
	CHECK(empty.cols() == 4);
	CHECK_THROWS_AS(embed_prompt(tokens, v, Matrix(2, 4)), ShapeError);
	CHECK_THROWS_AS(embed_ids(std::vector<std::size_t>{7}, e.value), ShapeError);
}
