#pragma once

#include "pktime/matrix.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace pktime {

/**
 * Lowercases, splits on anything that is not an ASCII letter or digit, and
 * emits every digit as its own token so that numeric magnitude survives as
 * token count.
 */
std::vector<std::string> tokenize(std::string_view text);

/// Ordered token list with `<unk>` at index 0.
class Vocabulary {
public:
	static constexpr const char* kUnknown = "<unk>";

	Vocabulary();
	/// Takes tokens verbatim; index 0 must be `<unk>` and entries must be distinct.
	explicit Vocabulary(std::vector<std::string> tokens);

	/// Distinct tokenizer outputs of the corpus, sorted, after `<unk>`.
	static Vocabulary build(std::span<const std::string> corpus);

	std::size_t size() const { return tokens_.size(); }
	/// A vocabulary holding nothing but `<unk>`.
	bool degenerate() const { return tokens_.size() < 2; }
	bool contains(const std::string& token) const { return index_.contains(token); }
	/// Index of token, or 0 (`<unk>`) when out of vocabulary.
	std::size_t id(const std::string& token) const;
	const std::string& token(std::size_t id) const { return tokens_.at(id); }
	const std::vector<std::string>& tokens() const { return tokens_; }

	std::vector<std::size_t> encode(std::span<const std::string> tokens) const;

	/// Appends reserved `<extra_N>` tokens until size() == target.
	void pad_to(std::size_t target);

	/// One token per line.
	std::string to_text() const;

private:
	std::vector<std::string> tokens_;
	std::unordered_map<std::string, std::size_t> index_;
};

/// Deterministic Gaussian(0, 1/sqrt(D)) V x D table, always frozen.
Param make_embedding(std::size_t vocab_size, std::size_t dim, std::uint64_t seed);

/// Row i is the embedding of token i (OOV maps to `<unk>`). An empty
/// sequence yields a 0 x D matrix.
Matrix embed_prompt(std::span<const std::string> tokens, const Vocabulary& vocab,
                    const Matrix& embedding);
Matrix embed_ids(std::span<const std::size_t> ids, const Matrix& embedding);

} // namespace pktime
