#include "pktime/embed.hpp"

#include "pktime/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

namespace pktime {

std::vector<std::string> tokenize(std::string_view text) {
	std::vector<std::string> out;
	std::string word;
	auto flush = [&] {
		if (!word.empty()) {
			out.push_back(word);
			word.clear();
		}
	};
	for (const char raw : text) {
		const auto c = static_cast<unsigned char>(raw);
		if (c >= '0' && c <= '9') {
			flush();
			out.emplace_back(1, static_cast<char>(c));
		} else if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) {
			word.push_back(static_cast<char>(c | 0x20));
		} else {
			flush();
		}
	}
	flush();
	return out;
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{kUnknown}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
	if (tokens_.empty() || tokens_.front() != kUnknown) {
		throw DataError("vocabulary must start with <unk>");
	}
	for (std::size_t i = 0; i < tokens_.size(); ++i) {
		if (!index_.emplace(tokens_[i], i).second) {
			throw DataError(fmt::format("duplicate vocabulary token '{}'", tokens_[i]));
		}
	}
}

Vocabulary Vocabulary::build(std::span<const std::string> corpus) {
	std::set<std::string> distinct;
	for (const std::string& doc : corpus) {
		for (std::string& t : tokenize(doc)) {
			distinct.insert(std::move(t));
		}
	}
	std::vector<std::string> tokens{kUnknown};
	tokens.insert(tokens.end(), distinct.begin(), distinct.end());
	return Vocabulary(std::move(tokens));
}

std::size_t Vocabulary::id(const std::string& token) const {
	const auto it = index_.find(token);
	return it == index_.end() ? 0 : it->second;
}

std::vector<std::size_t> Vocabulary::encode(std::span<const std::string> tokens) const {
	std::vector<std::size_t> ids;
	ids.reserve(tokens.size());
	for (const std::string& t : tokens) {
		ids.push_back(id(t));
	}
	return ids;
}

void Vocabulary::pad_to(std::size_t target) {
	for (std::size_t k = 0; tokens_.size() < target; ++k) {
		std::string t = fmt::format("<extra_{}>", k);
		if (index_.emplace(t, tokens_.size()).second) {
			tokens_.push_back(std::move(t));
		}
	}
}

std::string Vocabulary::to_text() const {
	std::string out;
	for (const std::string& t : tokens_) {
		out += t;
		out += '\n';
	}
	return out;
}

Param make_embedding(std::size_t vocab_size, std::size_t dim, std::uint64_t seed) {
	std::mt19937_64 rng(seed);
	return Param("embedding",
	             random_normal(vocab_size, dim, 1.0 / std::sqrt(static_cast<double>(dim)), rng),
	             true);
}

Matrix embed_ids(std::span<const std::size_t> ids, const Matrix& embedding) {
	Matrix out(ids.size(), embedding.cols());
	for (std::size_t i = 0; i < ids.size(); ++i) {
		if (ids[i] >= embedding.rows()) {
			throw ShapeError(fmt::format("token id {} outside embedding {}", ids[i],
			                             embedding.shape()));
		}
		std::copy(embedding.row(ids[i]).begin(), embedding.row(ids[i]).end(), out.row(i).begin());
	}
	return out;
}

Matrix embed_prompt(std::span<const std::string> tokens, const Vocabulary& vocab,
                    const Matrix& embedding) {
	if (embedding.rows() != vocab.size()) {
		throw ShapeError(fmt::format("embedding {} does not match vocabulary of {}",
		                             embedding.shape(), vocab.size()));
	}
	const std::vector<std::size_t> ids = vocab.encode(tokens);
	return embed_ids(ids, embedding);
}

} // namespace pktime
