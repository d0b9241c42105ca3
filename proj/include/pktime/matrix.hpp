#pragma once

#include <cstddef>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace pktime {

/**
 * @brief Dense row-major matrix of doubles.
 *
 * Sequences are stored as rows: a length-n token sequence in D dimensions
 * is an n x D matrix. Zero-row matrices are allowed (an empty prompt).
 */
class Matrix {
public:
	Matrix() = default;
	Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
	Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

	static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
	static Matrix identity(std::size_t n);
	static Matrix row_vector(std::span<const double> values);

	std::size_t rows() const { return rows_; }
	std::size_t cols() const { return cols_; }
	std::size_t size() const { return values_.size(); }
	bool empty() const { return values_.empty(); }

	double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
	double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

	std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
	std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

	std::span<double> values() { return values_; }
	std::span<const double> values() const { return values_; }

	void fill(double v);
	std::string shape() const;

	bool operator==(const Matrix& other) const = default;

private:
	std::size_t rows_ = 0;
	std::size_t cols_ = 0;
	std::vector<double> values_;
};

/// A named matrix with an accumulated gradient. Frozen params never receive gradient.
struct Param {
	std::string name;
	Matrix value;
	Matrix grad;
	bool frozen = false;

	Param() = default;
	Param(std::string name, Matrix value, bool frozen = false);

	void zero_grad();
	/// Adds g into grad. A no-op for frozen params.
	void accumulate(const Matrix& g);
};

// Forward operations. All throw ShapeError on non-conforming operands and
// NumericError if the result contains NaN or Inf.
Matrix matmul(const Matrix& a, const Matrix& b);
/// a^T * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a * b^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
void add_inplace(Matrix& a, const Matrix& b, double alpha = 1.0);

Matrix softmax_rows(const Matrix& a);
/// Given y = softmax_rows(x) and dL/dy, returns dL/dx.
Matrix softmax_rows_backward(const Matrix& y, const Matrix& dy);

/// Stacks a above b. Widths must agree; either may have zero rows.
Matrix vconcat(const Matrix& a, const Matrix& b);
Matrix hconcat(const Matrix& a, const Matrix& b);
Matrix slice_rows(const Matrix& a, std::size_t begin, std::size_t end);
Matrix slice_cols(const Matrix& a, std::size_t begin, std::size_t end);
/// Writes src into dst starting at column offset.
void set_cols(Matrix& dst, std::size_t offset, const Matrix& src);

/// Mean squared error over all entries, and its gradient with respect to pred.
double mse_loss(const Matrix& pred, const Matrix& truth);
Matrix mse_loss_grad(const Matrix& pred, const Matrix& truth);

/// Single-head scaled dot-product attention, out = softmax(Q K^T / sqrt(d)) V.
struct Attention {
	Matrix weights;
	Matrix out;
};
Attention attention(const Matrix& q, const Matrix& k, const Matrix& v);

struct AttentionGrads {
	Matrix dq;
	Matrix dk;
	Matrix dv;
};
AttentionGrads attention_backward(const Matrix& q, const Matrix& k, const Matrix& v,
                                  const Attention& fwd, const Matrix& dout);

bool all_finite(const Matrix& m);
/// Throws NumericError naming `what` if m has a non-finite entry.
void ensure_finite(const Matrix& m, const std::string& what);

Matrix random_normal(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng);

} // namespace pktime
