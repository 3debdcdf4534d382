#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace slubench {

using Tokens = std::vector<std::string>;

// Canonical text form shared by transcript comparison and WER scoring:
// ASCII lowercase, whitespace runs collapsed to one space, trimmed.
// Punctuation is kept.
std::string normalize_text(std::string_view text);

// Whitespace tokenization of the normalized text.
Tokens tokenize(std::string_view text);

std::string join(const Tokens& tokens, std::string_view sep = " ");

// Splits on a single character; empty fields are kept.
std::vector<std::string> split_exact(std::string_view text, char sep);

// 64-bit FNV-1a. Used to derive per-utterance random streams and token
// codes, so the value must not depend on the standard library.
std::uint64_t fnv1a(std::string_view text, std::uint64_t basis = 0xcbf29ce484222325ULL);

// Mixes a seed with a string key into a stream seed.
std::uint64_t stream_seed(std::uint64_t seed, std::string_view key);

// Shortest decimal form that parses back to the same double.
std::string format_double(double value);
// Fixed-point with the given number of decimals.
std::string format_fixed(double value, int decimals);
// Half-up rounding on the decimal representation ("0.865" -> "0.87").
std::string format_half_up(double value, int decimals);

// Strict parsers: the entire field must be consumed.
bool parse_double(std::string_view field, double& out);
bool parse_size(std::string_view field, std::size_t& out);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace slubench
