#include "doctest.h"

#include "helpers.hpp"

#include "pktime/backbone.hpp"
#include "pktime/error.hpp"
#include "pktime/gradcheck.hpp"

using namespace pktime;
using pktime::test::max_abs_diff;
using pktime::test::random_matrix;

namespace {

DecoderConfig small_config() {
	DecoderConfig c;
	c.model_dim = 8;
	c.n_layers = 2;
	c.n_heads = 2;
	c.ff_dim = 16;
	c.seed = 21;
	return c;
}

} // namespace

TEST_CASE("decoder weights are frozen and fixed by the seed") {
	FrozenDecoder a(small_config());
	const FrozenDecoder b(small_config());
	DecoderConfig other = small_config();
	other.seed = 22;
	const FrozenDecoder c(other);
	for (const Param* p : a.params()) {
		CHECK(p->frozen);
	}
	CHECK(a.layers()[1].w_1.value == b.layers()[1].w_1.value);
	CHECK_FALSE(a.layers()[1].w_1.value == c.layers()[1].w_1.value);
	const Matrix r = random_matrix(5, 8, 1);
	CHECK(a.decode(r) == b.decode(r));
	DecoderConfig bad = small_config();
	bad.n_heads = 3;
	CHECK_THROWS_AS(FrozenDecoder{bad}, ConfigError);
	CHECK_THROWS_AS(a.decode(random_matrix(3, 7, 1)), ShapeError);
}

TEST_CASE("decoder is causal") {
	const FrozenDecoder dec(small_config());
	const Matrix r = random_matrix(7, 8, 2);
	const Matrix base = dec.decode(r);
	for (std::size_t k = 0; k < r.rows(); ++k) {
		Matrix changed = r;
		for (double& v : changed.row(k)) {
			v += 0.5;
		}
		const Matrix out = dec.decode(changed);
		for (std::size_t i = 0; i < k; ++i) {
			for (std::size_t j = 0; j < 8; ++j) {
				CHECK(out(i, j) == base(i, j));
			}
		}
		CHECK(max_abs_diff(slice_rows(out, k, k + 1), slice_rows(base, k, k + 1)) > 0.0);
	}
}

TEST_CASE("cached decode is bitwise identical to a full decode") {
	const FrozenDecoder dec(small_config());
	const Matrix prompt = random_matrix(6, 8, 3);
	const Matrix extra = random_matrix(3, 8, 4);
	const Matrix rows = random_matrix(4, 8, 5);
	const Matrix full = dec.decode(vconcat(vconcat(prompt, extra), rows));

	const PrefixCache whole = dec.build_cache(vconcat(prompt, extra));
	const PrefixCache stepped = dec.extend_cache(dec.build_cache(prompt), extra);
	CHECK(whole.length == 9);
	CHECK(stepped.length == 9);
	for (std::size_t l = 0; l < 2; ++l) {
		CHECK(whole.keys[l] == stepped.keys[l]);
		CHECK(whole.values[l] == stepped.values[l]);
	}
	const Matrix tail = slice_rows(full, 9, 13);
	CHECK(dec.forward(rows, &whole, false).hidden == tail);
	CHECK(dec.forward(rows, &stepped, true).hidden == tail);
	CHECK(dec.forward(rows, nullptr, false).hidden == dec.decode(rows));
}

TEST_CASE("decoder input gradient matches central differences") {
	const FrozenDecoder dec(small_config());
	const PrefixCache cache = dec.build_cache(random_matrix(3, 8, 6));
	Param rows("rows", random_matrix(4, 8, 7));
	const Matrix weight = random_matrix(4, 8, 8);
	for (const PrefixCache* prefix : {static_cast<const PrefixCache*>(nullptr), &cache}) {
		auto loss = [&](bool grad) {
			const DecodeTrace tr = dec.forward(rows.value, prefix, grad);
			double l = 0.0;
			for (std::size_t i = 0; i < weight.size(); ++i) {
				l += weight.values()[i] * tr.hidden.values()[i];
			}
			if (grad) {
				rows.accumulate(dec.backward(tr, prefix, weight));
			}
			return l;
		};
		const GradCheckResult res = grad_check(loss, {&rows});
		CHECK(res.max_rel_error <= 1e-4);
	}
}

TEST_CASE("forecast head reads the last P rows") {
	std::mt19937_64 rng(3);
	ForecastHead head = make_forecast_head(2, 3, 4, rng);
	CHECK(head.w_h.value.rows() == 6);
	CHECK(head.b_h.value.cols() == 4);
	head.b_h.value = Matrix::from_rows({{1, 2, 3, 4}});
	const Matrix hidden = random_matrix(5, 3, 9);
	const Matrix y = head_forward(hidden, 2, head);
	for (std::size_t h = 0; h < 4; ++h) {
		double e = head.b_h.value(0, h);
		for (std::size_t p = 0; p < 2; ++p) {
			for (std::size_t j = 0; j < 3; ++j) {
				e += hidden(3 + p, j) * head.w_h.value(p * 3 + j, h);
			}
		}
		CHECK(y(0, h) == doctest::Approx(e).epsilon(1e-14));
	}
	Matrix changed = hidden;
	changed(0, 0) += 10.0;
	changed(2, 2) -= 3.0;
	CHECK(head_forward(changed, 2, head) == y);
	CHECK_THROWS_AS(head_forward(random_matrix(1, 3, 1), 2, head), ShapeError);

	const Matrix dy = Matrix::from_rows({{1, 0, 0, 0}});
	const Matrix dtail = head_backward(hidden, 2, dy, head);
	CHECK(dtail.rows() == 2);
	CHECK(dtail(1, 2) == head.w_h.value(5, 0));
	CHECK(head.b_h.grad == dy);
}

TEST_CASE("prefix concatenation puts prompt rows first") {
	const Matrix p = random_matrix(2, 3, 1);
	const Matrix x = random_matrix(4, 3, 2);
	const Matrix r = concat_prefix(p, x);
	CHECK(r.rows() == 6);
	CHECK(slice_rows(r, 0, 2) == p);
	CHECK(concat_prefix(Matrix(0, 3), x) == x);
	CHECK(concat_prefix(Matrix(0, 0), x) == x);
	CHECK_THROWS_AS(concat_prefix(random_matrix(1, 2, 1), x), ShapeError);
}
