#pragma once

// Toy molecule language. A molecule is a string over {C, N, O, F, '(', ')'}
// with balanced parentheses nested at most two deep, an atom in first
// position, no empty "()" pair, and 4 to 16 tokens. Equality and canonical
// form are plain token-string equality.

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lso/rng.hpp"

namespace lso {

inline constexpr std::size_t kMinLength = 4;
inline constexpr std::size_t kMaxLength = 16;
inline constexpr int kMaxDepth = 2;

/// Token ids used by the generative model. kPad is only ever a decoder
/// symbol, never part of a molecule.
enum class Token : int { C = 0, N, O, F, Open, Close, Pad };
inline constexpr int kVocabSize = 7;
inline constexpr std::array<char, 6> kAlphabet = {'C', 'N', 'O', 'F', '(', ')'};

char token_char(Token t);
std::optional<Token> token_from_char(char c);
inline bool is_atom(Token t) { return static_cast<int>(t) <= static_cast<int>(Token::F); }

/// True iff every grammar rule holds.
bool validate(std::string_view tokens);

class Molecule {
 public:
  /// Throws ValidationError if `tokens` is not a valid molecule.
  explicit Molecule(std::string tokens);

  const std::string& str() const noexcept { return tokens_; }
  std::size_t length() const noexcept { return tokens_.size(); }

  friend bool operator==(const Molecule&, const Molecule&) = default;
  friend auto operator<=>(const Molecule&, const Molecule&) = default;

 private:
  std::string tokens_;
};

/// Incremental grammar state over a token prefix. Drives constrained decoding,
/// random generation and enumeration: `allowed` answers whether appending a
/// token still leaves a valid completion reachable within `max_len` tokens.
class PrefixTracker {
 public:
  std::size_t length() const noexcept { return length_; }
  int depth() const noexcept { return depth_; }
  bool finished() const noexcept { return finished_; }

  /// Tokens needed, at minimum, to close the current prefix.
  std::size_t closing_cost() const noexcept;
  /// Prefix is itself a valid molecule.
  bool complete() const noexcept;

  /// Whether `t` may be appended such that some valid molecule of length
  /// at most `max_len` remains reachable. Pad is allowed only on a complete
  /// prefix (and is the only option once finished).
  bool allowed(Token t, std::size_t max_len = kMaxLength) const noexcept;
  /// Like `allowed`, but the completion must have exactly `target_len` tokens.
  bool allowed_exact(Token t, std::size_t target_len) const noexcept;

  void push(Token t);

 private:
  std::size_t length_ = 0;
  int depth_ = 0;
  bool last_open_ = false;
  bool finished_ = false;
};

/// Descriptor vector: counts of C, N, O, F; ring count ('(' tokens); length;
/// motif flag (atom-only subsequence contains "NCO").
using FeatureVector = std::array<double, 7>;
inline constexpr std::size_t kNumFeatures = 7;

FeatureVector featurize(const Molecule& m);

/// Synthetic ground-truth potency used to label the desk-scale data:
/// clamp(0, 10, 1 + 0.4 N + 0.3 O - 0.2 F + 1.2 rings + 0.8 motif).
double oracle_pic50(const Molecule& m);

/// Every valid molecule with length <= max_len, ordered by length then
/// lexicographically by token id (C < N < O < F < '(' < ')').
/// Throws GuardError for max_len > 10.
std::vector<Molecule> enumerate_valid(std::size_t max_len);

/// Uniform length in [min_len, max_len], then each token drawn uniformly
/// among the tokens that keep an exact-length completion reachable.
Molecule random_molecule(Rng& rng, std::size_t min_len = kMinLength,
                         std::size_t max_len = kMaxLength);

struct DatasetEntry {
  Molecule molecule;
  std::optional<double> score;
};

/// One molecule per line, optionally followed by a tab and a score.
std::vector<DatasetEntry> read_dataset(const std::filesystem::path& path);
void write_dataset(const std::filesystem::path& path, const std::vector<DatasetEntry>& entries);

}  // namespace lso
