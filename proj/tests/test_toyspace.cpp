#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <set>
#include <string>

#include "lso/errors.hpp"
#include "lso/toyspace.hpp"

using namespace lso;

namespace {

// Counts valid strings of exactly `remaining` more tokens from a given
// grammar state, without touching PrefixTracker.
long long count_completions(int remaining, int depth, bool first, bool after_open) {
  if (remaining == 0) return depth == 0 ? 1 : 0;
  long long total = 4 * count_completions(remaining - 1, depth, false, false);  // atoms
  if (!first && depth < kMaxDepth) total += count_completions(remaining - 1, depth + 1, false, true);
  if (depth > 0 && !after_open) total += count_completions(remaining - 1, depth - 1, false, false);
  return total;
}

long long independent_count(int max_len) {
  long long total = 0;
  for (int n = static_cast<int>(kMinLength); n <= max_len; ++n) total += count_completions(n, 0, true, false);
  return total;
}

}  // namespace

TEST_CASE("validate applies every grammar rule") {
  CHECK_FALSE(validate(""));
  CHECK_FALSE(validate("C)"));
  CHECK(validate("CC(N)O"));
  CHECK(validate("CCCC"));
  CHECK_FALSE(validate("CCC"));                   // too short
  CHECK_FALSE(validate("(CC)C"));                 // starts with a bracket
  CHECK_FALSE(validate("CC()C"));                 // empty pair
  CHECK_FALSE(validate("C(C(C(C)))"));            // depth 3
  CHECK(validate("C(C(C))"));
  CHECK_FALSE(validate("CC(C"));                  // unclosed
  CHECK_FALSE(validate("CCXC"));                  // foreign token
  CHECK(validate(std::string(16, 'C')));
  CHECK_FALSE(validate(std::string(17, 'C')));
}

TEST_CASE("Molecule rejects invalid strings") {
  CHECK_THROWS_AS(Molecule("C)"), ValidationError);
  CHECK(Molecule("CNOF").str() == "CNOF");
}

TEST_CASE("featurize hand counts") {
  const auto a = featurize(Molecule("CN(CO)"));
  CHECK(a == FeatureVector{2, 1, 1, 0, 1, 6, 1});
  const auto b = featurize(Molecule("CCCC"));
  CHECK(b == FeatureVector{4, 0, 0, 0, 0, 4, 0});
  const auto c = featurize(Molecule("CF(F)"));
  CHECK(c == FeatureVector{1, 0, 0, 2, 1, 5, 0});
  // The motif is read from the atom-only subsequence, across brackets.
  CHECK(featurize(Molecule("N(C)O"))[6] == 1);
  CHECK(featurize(Molecule("NOCC"))[6] == 0);
}

TEST_CASE("oracle_pic50 formula") {
  CHECK(oracle_pic50(Molecule("CN(CO)")) == doctest::Approx(3.7).epsilon(1e-12));
  CHECK(oracle_pic50(Molecule("CCCC")) == 1.0);
  CHECK(oracle_pic50(Molecule("FFFF")) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("oracle maximum over length <= 8 by exhaustive enumeration") {
  double best = -1.0;
  std::string arg;
  for (const auto& m : enumerate_valid(8)) {
    const double v = oracle_pic50(m);
    if (v > best) best = v, arg = m.str();
  }
  // Brute force over all 6^n strings with a separate validator gives 5.3.
  CHECK(best == doctest::Approx(5.3).epsilon(1e-12));
  CHECK(validate(arg));
}

TEST_CASE("oracle range and monotonicity in N") {
  Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const Molecule m = random_molecule(rng, 4, 15);
    const double v = oracle_pic50(m);
    CHECK(v >= 0.0);
    CHECK(v <= 10.0);
    // Appending an N keeps the molecule valid and never lowers the value.
    const Molecule more(m.str() + "N");
    CHECK(oracle_pic50(more) >= v);
  }
}

TEST_CASE("enumerate_valid") {
  CHECK(enumerate_valid(3).empty());
  const auto four = enumerate_valid(4);
  CHECK(static_cast<long long>(four.size()) == independent_count(4));
  CHECK(four.size() == 272);
  for (const auto& m : four) CHECK(validate(m.str()));
  // Every 4-token string that validates is present.
  const std::set<std::string> have = [&] {
    std::set<std::string> s;
    for (const auto& m : four) s.insert(m.str());
    return s;
  }();
  CHECK(have.size() == four.size());
  std::size_t brute = 0;
  const std::string alphabet(kAlphabet.begin(), kAlphabet.end());
  for (char a : alphabet)
    for (char b : alphabet)
      for (char c : alphabet)
        for (char d : alphabet) {
          const std::string s{a, b, c, d};
          if (validate(s)) {
            ++brute;
            CHECK(have.count(s) == 1);
          }
        }
  CHECK(brute == four.size());

  // Counts per maximum length, frozen from a brute-force pass over 6^n strings.
  CHECK(enumerate_valid(6).size() == 7136);
  const auto eight = enumerate_valid(8);
  CHECK(eight.size() == 166240);
  CHECK(static_cast<long long>(eight.size()) == independent_count(8));

  // Nested sets.
  const auto seven = enumerate_valid(7);
  const std::set<Molecule> eight_set(eight.begin(), eight.end());
  for (const auto& m : seven) CHECK(eight_set.count(m) == 1);

  CHECK_THROWS_AS(enumerate_valid(11), GuardError);
}

TEST_CASE("random_molecule validity and determinism") {
  Rng a(42), b(42), c(43);
  bool differs = false;
  std::set<std::size_t> lengths;
  for (int i = 0; i < 10000; ++i) {
    const Molecule x = random_molecule(a);
    const Molecule y = random_molecule(b);
    const Molecule z = random_molecule(c);
    CHECK(validate(x.str()));
    CHECK(x == y);
    differs = differs || (x != z);
    lengths.insert(x.length());
  }
  CHECK(differs);
  CHECK(*lengths.begin() == kMinLength);
  CHECK(*lengths.rbegin() == kMaxLength);

  Rng r(5);
  for (int i = 0; i < 500; ++i) {
    const auto m = random_molecule(r, 7, 7);
    CHECK(m.length() == 7);
  }
}

TEST_CASE("PrefixTracker never dead-ends") {
  Rng rng(3);
  for (int trial = 0; trial < 2000; ++trial) {
    PrefixTracker tr;
    std::string s;
    while (!tr.finished() && tr.length() < kMaxLength + 1) {
      std::vector<Token> ok;
      for (int t = 0; t < kVocabSize; ++t) {
        if (tr.allowed(static_cast<Token>(t))) ok.push_back(static_cast<Token>(t));
      }
      REQUIRE_FALSE(ok.empty());
      const Token pick = ok[std::uniform_int_distribution<std::size_t>(0, ok.size() - 1)(rng)];
      if (pick == Token::Pad) break;
      tr.push(pick);
      s.push_back(token_char(pick));
      if (tr.length() == kMaxLength) break;
    }
    CHECK(validate(s));
  }
}

TEST_CASE("dataset file round trip") {
  const auto path = std::filesystem::temp_directory_path() / "lso_test_dataset.txt";
  std::vector<DatasetEntry> entries{{Molecule("CCCC"), std::nullopt}, {Molecule("CN(CO)"), 3.7}};
  write_dataset(path, entries);
  const auto back = read_dataset(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].molecule.str() == "CCCC");
  CHECK_FALSE(back[0].score.has_value());
  CHECK(*back[1].score == doctest::Approx(3.7));
  std::filesystem::remove(path);
}
