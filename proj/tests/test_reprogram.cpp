#include "doctest.h"

#include "helpers.hpp"

#include "pktime/error.hpp"
#include "pktime/gradcheck.hpp"
#include "pktime/reprogram.hpp"

using namespace pktime;
using pktime::test::max_abs_diff;
using pktime::test::naive_matmul;
using pktime::test::random_matrix;

TEST_CASE("reprogramming shapes") {
	std::mt19937_64 rng(5);
	const TextPrototypeLayer layer = make_text_prototype_layer(6, 20, rng);
	const ReprogramHeads heads = make_reprogram_heads(4, 8, 12, 3, rng);
	const Matrix embedding = random_matrix(20, 8, 1);
	const Matrix protos = text_prototypes(embedding, layer);
	CHECK(protos.rows() == 6);
	CHECK(protos.cols() == 8);
	CHECK(max_abs_diff(protos, naive_matmul(layer.w_e.value, embedding)) < 1e-12);
	const Matrix patches = random_matrix(5, 4, 2);
	const Matrix xhat = embed_patches(patches, heads);
	CHECK(xhat.rows() == 5);
	CHECK(xhat.cols() == 12);
	const ReprogramResult r = reprogram(xhat, protos, heads);
	CHECK(r.z.rows() == 5);
	CHECK(r.z.cols() == 12);
	REQUIRE(r.attention.size() == 3);
	CHECK(r.attention[0].rows() == 5);
	CHECK(r.attention[0].cols() == 6);
	const Matrix tokens = project_tokens(r.z, heads);
	CHECK(tokens.rows() == 5);
	CHECK(tokens.cols() == 8);
	CHECK_THROWS(make_reprogram_heads(4, 8, 10, 3, rng));
}

TEST_CASE("single head reprogramming equals plain attention") {
	std::mt19937_64 rng(8);
	const ReprogramHeads heads = make_reprogram_heads(3, 6, 4, 1, rng);
	const Matrix protos = random_matrix(5, 6, 3);
	const Matrix xhat = random_matrix(4, 4, 4);
	const PrototypeKeys kv = prototype_keys(protos, heads);
	const ReprogramResult r = reprogram(xhat, kv, 1);
	const Attention a = attention(xhat, kv.keys, kv.values);
	CHECK(max_abs_diff(r.z, a.out) < 1e-14);
	CHECK(max_abs_diff(mean_attention(r), a.weights) < 1e-14);
}

TEST_CASE("mean attention rows are distributions") {
	std::mt19937_64 rng(9);
	const ReprogramHeads heads = make_reprogram_heads(3, 8, 8, 4, rng);
	const ReprogramResult r = reprogram(random_matrix(6, 8, 5), random_matrix(7, 8, 6), heads);
	const Matrix m = mean_attention(r);
	for (std::size_t i = 0; i < m.rows(); ++i) {
		double s = 0.0;
		for (double v : m.row(i)) {
			CHECK(v >= 0.0);
			s += v;
		}
		CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
	}
}

TEST_CASE("reprogramming gradients match central differences") {
	std::mt19937_64 rng(10);
	TextPrototypeLayer layer = make_text_prototype_layer(5, 9, rng);
	ReprogramHeads heads = make_reprogram_heads(3, 6, 6, 2, rng);
	Param embedding("embedding", random_matrix(9, 6, 11), true);
	const Matrix patches = random_matrix(4, 3, 12);
	const Matrix target = random_matrix(4, 6, 13);

	auto loss = [&](bool grad) {
		const Matrix protos = text_prototypes(embedding.value, layer);
		const PrototypeKeys kv = prototype_keys(protos, heads);
		const Matrix xhat = embed_patches(patches, heads);
		const ReprogramResult r = reprogram(xhat, kv, heads.n_heads);
		const Matrix out = project_tokens(r.z, heads);
		const double l = mse_loss(out, target);
		if (grad) {
			const Matrix dout = mse_loss_grad(out, target);
			heads.w_o.accumulate(matmul_tn(r.z, dout));
			const Matrix dz = matmul_nt(dout, heads.w_o.value);
			const ReprogramGrads g = reprogram_backward(xhat, kv, r, dz, heads.n_heads);
			heads.w_q.accumulate(matmul_tn(patches, g.dxhat));
			prototype_backward(embedding.value, protos, g.dkeys, g.dvalues, layer, heads);
		}
		return l;
	};
	const GradCheckResult res = grad_check(
		loss, {&layer.w_e, &heads.w_q, &heads.w_k, &heads.w_v, &heads.w_o, &embedding});
	CHECK(res.max_rel_error <= 1e-7);
	CHECK(res.frozen_grads_zero);
	CHECK(res.checked == 5 * 9 + 3 * 6 + 3 * 36);
}
