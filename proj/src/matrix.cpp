#include "pktime/matrix.hpp"

#include "pktime/error.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace pktime {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
	: rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
	: rows_(rows), cols_(cols), values_(std::move(values)) {
	if (values_.size() != rows_ * cols_) {
		throw ShapeError(fmt::format("matrix {}x{} needs {} values, got {}", rows_, cols_,
		                             rows_ * cols_, values_.size()));
	}
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
	const std::size_t r = rows.size();
	const std::size_t c = r == 0 ? 0 : rows.begin()->size();
	std::vector<double> values;
	values.reserve(r * c);
	for (const auto& row : rows) {
		if (row.size() != c) {
			throw ShapeError("ragged row list");
		}
		values.insert(values.end(), row.begin(), row.end());
	}
	return Matrix(r, c, std::move(values));
}

Matrix Matrix::identity(std::size_t n) {
	Matrix m(n, n);
	for (std::size_t i = 0; i < n; ++i) {
		m(i, i) = 1.0;
	}
	return m;
}

Matrix Matrix::row_vector(std::span<const double> values) {
	return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

void Matrix::fill(double v) {
	std::fill(values_.begin(), values_.end(), v);
}

std::string Matrix::shape() const {
	return fmt::format("{}x{}", rows_, cols_);
}

Param::Param(std::string name_, Matrix value_, bool frozen_)
	: name(std::move(name_)), value(std::move(value_)), grad(value.rows(), value.cols()),
	  frozen(frozen_) {}

void Param::zero_grad() {
	grad.fill(0.0);
}

void Param::accumulate(const Matrix& g) {
	if (frozen) {
		return;
	}
	add_inplace(grad, g);
}

namespace {

void require(bool ok, const char* op, const Matrix& a, const Matrix& b) {
	if (!ok) {
		throw ShapeError(fmt::format("{}: shape mismatch {} vs {}", op, a.shape(), b.shape()));
	}
}

} // namespace

bool all_finite(const Matrix& m) {
	return std::all_of(m.values().begin(), m.values().end(),
	                   [](double v) { return std::isfinite(v); });
}

void ensure_finite(const Matrix& m, const std::string& what) {
	if (!all_finite(m)) {
		throw NumericError(fmt::format("non-finite value in {}", what));
	}
}

Matrix matmul(const Matrix& a, const Matrix& b) {
	require(a.cols() == b.rows(), "matmul", a, b);
	Matrix out(a.rows(), b.cols());
	const std::size_t n = a.cols();
	const std::size_t m = b.cols();
	for (std::size_t i = 0; i < a.rows(); ++i) {
		double* o = out.row(i).data();
		const double* ar = a.row(i).data();
		for (std::size_t k = 0; k < n; ++k) {
			const double aik = ar[k];
			const double* br = b.row(k).data();
			for (std::size_t j = 0; j < m; ++j) {
				o[j] += aik * br[j];
			}
		}
	}
	ensure_finite(out, "matmul");
	return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
	require(a.rows() == b.rows(), "matmul_tn", a, b);
	Matrix out(a.cols(), b.cols());
	const std::size_t m = b.cols();
	for (std::size_t k = 0; k < a.rows(); ++k) {
		const double* ar = a.row(k).data();
		const double* br = b.row(k).data();
		for (std::size_t i = 0; i < a.cols(); ++i) {
			const double aki = ar[i];
			double* o = out.row(i).data();
			for (std::size_t j = 0; j < m; ++j) {
				o[j] += aki * br[j];
			}
		}
	}
	ensure_finite(out, "matmul_tn");
	return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
	require(a.cols() == b.cols(), "matmul_nt", a, b);
	Matrix out(a.rows(), b.rows());
	const std::size_t n = a.cols();
	for (std::size_t i = 0; i < a.rows(); ++i) {
		const double* ar = a.row(i).data();
		for (std::size_t j = 0; j < b.rows(); ++j) {
			const double* br = b.row(j).data();
			double acc = 0.0;
			for (std::size_t k = 0; k < n; ++k) {
				acc += ar[k] * br[k];
			}
			out(i, j) = acc;
		}
	}
	ensure_finite(out, "matmul_nt");
	return out;
}

Matrix transpose(const Matrix& a) {
	Matrix out(a.cols(), a.rows());
	for (std::size_t i = 0; i < a.rows(); ++i) {
		for (std::size_t j = 0; j < a.cols(); ++j) {
			out(j, i) = a(i, j);
		}
	}
	return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
	Matrix out = a;
	add_inplace(out, b);
	return out;
}

Matrix scale(const Matrix& a, double s) {
	Matrix out = a;
	for (double& v : out.values()) {
		v *= s;
	}
	ensure_finite(out, "scale");
	return out;
}

void add_inplace(Matrix& a, const Matrix& b, double alpha) {
	require(a.rows() == b.rows() && a.cols() == b.cols(), "add", a, b);
	auto dst = a.values();
	auto src = b.values();
	for (std::size_t i = 0; i < dst.size(); ++i) {
		dst[i] += alpha * src[i];
	}
}

Matrix softmax_rows(const Matrix& a) {
	if (a.empty()) {
		throw ShapeError("softmax_rows: empty matrix");
	}
	Matrix out(a.rows(), a.cols());
	for (std::size_t i = 0; i < a.rows(); ++i) {
		auto in = a.row(i);
		auto o = out.row(i);
		const double mx = *std::max_element(in.begin(), in.end());
		double sum = 0.0;
		for (std::size_t j = 0; j < in.size(); ++j) {
			o[j] = std::exp(in[j] - mx);
			sum += o[j];
		}
		for (double& v : o) {
			v /= sum;
		}
	}
	ensure_finite(out, "softmax_rows");
	return out;
}

Matrix softmax_rows_backward(const Matrix& y, const Matrix& dy) {
	require(y.rows() == dy.rows() && y.cols() == dy.cols(), "softmax_rows_backward", y, dy);
	Matrix dx(y.rows(), y.cols());
	for (std::size_t i = 0; i < y.rows(); ++i) {
		auto yr = y.row(i);
		auto dyr = dy.row(i);
		double dot = 0.0;
		for (std::size_t j = 0; j < yr.size(); ++j) {
			dot += yr[j] * dyr[j];
		}
		auto dxr = dx.row(i);
		for (std::size_t j = 0; j < yr.size(); ++j) {
			dxr[j] = yr[j] * (dyr[j] - dot);
		}
	}
	return dx;
}

Matrix vconcat(const Matrix& a, const Matrix& b) {
	if (a.rows() == 0 && a.cols() == 0) {
		return b;
	}
	require(a.cols() == b.cols(), "vconcat", a, b);
	std::vector<double> values;
	values.reserve(a.size() + b.size());
	values.insert(values.end(), a.values().begin(), a.values().end());
	values.insert(values.end(), b.values().begin(), b.values().end());
	return Matrix(a.rows() + b.rows(), a.cols(), std::move(values));
}

Matrix hconcat(const Matrix& a, const Matrix& b) {
	require(a.rows() == b.rows(), "hconcat", a, b);
	Matrix out(a.rows(), a.cols() + b.cols());
	set_cols(out, 0, a);
	set_cols(out, a.cols(), b);
	return out;
}

Matrix slice_rows(const Matrix& a, std::size_t begin, std::size_t end) {
	if (begin > end || end > a.rows()) {
		throw ShapeError(fmt::format("slice_rows [{}, {}) out of range for {}", begin, end, a.shape()));
	}
	std::vector<double> values(a.values().begin() + static_cast<std::ptrdiff_t>(begin * a.cols()),
	                           a.values().begin() + static_cast<std::ptrdiff_t>(end * a.cols()));
	return Matrix(end - begin, a.cols(), std::move(values));
}

Matrix slice_cols(const Matrix& a, std::size_t begin, std::size_t end) {
	if (begin > end || end > a.cols()) {
		throw ShapeError(fmt::format("slice_cols [{}, {}) out of range for {}", begin, end, a.shape()));
	}
	Matrix out(a.rows(), end - begin);
	for (std::size_t i = 0; i < a.rows(); ++i) {
		std::copy_n(a.row(i).begin() + static_cast<std::ptrdiff_t>(begin), end - begin,
		            out.row(i).begin());
	}
	return out;
}

void set_cols(Matrix& dst, std::size_t offset, const Matrix& src) {
	if (dst.rows() != src.rows() || offset + src.cols() > dst.cols()) {
		throw ShapeError(fmt::format("set_cols: {} at column {} does not fit {}", src.shape(),
		                             offset, dst.shape()));
	}
	for (std::size_t i = 0; i < src.rows(); ++i) {
		std::copy(src.row(i).begin(), src.row(i).end(),
		          dst.row(i).begin() + static_cast<std::ptrdiff_t>(offset));
	}
}

double mse_loss(const Matrix& pred, const Matrix& truth) {
	require(pred.rows() == truth.rows() && pred.cols() == truth.cols(), "mse_loss", pred, truth);
	if (pred.empty()) {
		throw ShapeError("mse_loss: empty operands");
	}
	double acc = 0.0;
	for (std::size_t i = 0; i < pred.size(); ++i) {
		const double d = pred.values()[i] - truth.values()[i];
		acc += d * d;
	}
	return acc / static_cast<double>(pred.size());
}

Matrix mse_loss_grad(const Matrix& pred, const Matrix& truth) {
	require(pred.rows() == truth.rows() && pred.cols() == truth.cols(), "mse_loss_grad", pred,
	        truth);
	Matrix g(pred.rows(), pred.cols());
	const double n = static_cast<double>(pred.size());
	for (std::size_t i = 0; i < pred.size(); ++i) {
		g.values()[i] = 2.0 * (pred.values()[i] - truth.values()[i]) / n;
	}
	return g;
}

Attention attention(const Matrix& q, const Matrix& k, const Matrix& v) {
	require(q.cols() == k.cols(), "attention(q,k)", q, k);
	require(k.rows() == v.rows(), "attention(k,v)", k, v);
	Matrix scores = scale(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(q.cols())));
	Attention fwd;
	fwd.weights = softmax_rows(scores);
	fwd.out = matmul(fwd.weights, v);
	return fwd;
}

AttentionGrads attention_backward(const Matrix& q, const Matrix& k, const Matrix& v,
                                  const Attention& fwd, const Matrix& dout) {
	const double inv = 1.0 / std::sqrt(static_cast<double>(q.cols()));
	AttentionGrads g;
	g.dv = matmul_tn(fwd.weights, dout);
	Matrix dweights = matmul_nt(dout, v);
	Matrix dscores = scale(softmax_rows_backward(fwd.weights, dweights), inv);
	g.dq = matmul(dscores, k);
	g.dk = matmul_tn(dscores, q);
	return g;
}

Matrix random_normal(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
	std::normal_distribution<double> dist(0.0, stddev);
	Matrix m(rows, cols);
	for (double& v : m.values()) {
		v = dist(rng);
	}
	return m;
}

} // namespace pktime
