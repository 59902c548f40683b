#include "lso/toyspace.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "lso/errors.hpp"

namespace lso {

char token_char(Token t) {
  switch (t) {
    case Token::C: return 'C';
    case Token::N: return 'N';
    case Token::O: return 'O';
    case Token::F: return 'F';
    case Token::Open: return '(';
    case Token::Close: return ')';
    case Token::Pad: break;
  }
  throw std::logic_error("pad token has no character");
}

std::optional<Token> token_from_char(char c) {
  switch (c) {
    case 'C': return Token::C;
    case 'N': return Token::N;
    case 'O': return Token::O;
    case 'F': return Token::F;
    case '(': return Token::Open;
    case ')': return Token::Close;
    default: return std::nullopt;
  }
}

bool validate(std::string_view tokens) {
  if (tokens.size() < kMinLength || tokens.size() > kMaxLength) return false;
  int depth = 0;
  char prev = '\0';
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const char c = tokens[i];
    const auto tok = token_from_char(c);
    if (!tok) return false;
    if (i == 0 && !is_atom(*tok)) return false;
    if (c == '(') {
      if (++depth > kMaxDepth) return false;
    } else if (c == ')') {
      if (prev == '(') return false;
      if (--depth < 0) return false;
    }
    prev = c;
  }
  return depth == 0;
}

Molecule::Molecule(std::string tokens) : tokens_(std::move(tokens)) {
  if (!validate(tokens_)) throw ValidationError("invalid molecule: \"" + tokens_ + "\"");
}

// ---------------------------------------------------------------------------
// PrefixTracker

std::size_t PrefixTracker::closing_cost() const noexcept {
  return static_cast<std::size_t>(depth_) + (last_open_ ? 1 : 0);
}

bool PrefixTracker::complete() const noexcept {
  return length_ >= kMinLength && length_ <= kMaxLength && depth_ == 0;
}

namespace {

// Minimal total length of a valid molecule extending a prefix of `len`
// tokens that still needs `need` tokens to close.
std::size_t min_total(std::size_t len, std::size_t need) {
  return std::max(kMinLength, len + need);
}

}  // namespace

bool PrefixTracker::allowed(Token t, std::size_t max_len) const noexcept {
  if (finished_) return t == Token::Pad;
  const std::size_t next = length_ + 1;
  switch (t) {
    case Token::Pad:
      return complete() && length_ <= max_len;
    case Token::Open:
      if (length_ == 0 || depth_ >= kMaxDepth) return false;
      return min_total(next, static_cast<std::size_t>(depth_) + 2) <= max_len;
    case Token::Close:
      if (depth_ == 0 || last_open_) return false;
      return min_total(next, static_cast<std::size_t>(depth_) - 1) <= max_len;
    default:
      return min_total(next, static_cast<std::size_t>(depth_)) <= max_len;
  }
}

bool PrefixTracker::allowed_exact(Token t, std::size_t target_len) const noexcept {
  if (t == Token::Pad) return !finished_ ? (complete() && length_ == target_len) : true;
  if (finished_ || length_ >= target_len) return false;
  return allowed(t, target_len);
}

void PrefixTracker::push(Token t) {
  if (t == Token::Pad) {
    finished_ = true;
    return;
  }
  if (finished_) throw std::logic_error("token pushed after pad");
  ++length_;
  if (t == Token::Open) {
    ++depth_;
    last_open_ = true;
  } else {
    if (t == Token::Close) --depth_;
    last_open_ = false;
  }
}

// ---------------------------------------------------------------------------
// Descriptors and oracle

FeatureVector featurize(const Molecule& m) {
  FeatureVector f{};
  std::string atoms;
  for (char c : m.str()) {
    switch (c) {
      case 'C': f[0] += 1; atoms.push_back(c); break;
      case 'N': f[1] += 1; atoms.push_back(c); break;
      case 'O': f[2] += 1; atoms.push_back(c); break;
      case 'F': f[3] += 1; atoms.push_back(c); break;
      case '(': f[4] += 1; break;
      default: break;
    }
  }
  f[5] = static_cast<double>(m.length());
  f[6] = atoms.find("NCO") != std::string::npos ? 1.0 : 0.0;
  return f;
}

double oracle_pic50(const Molecule& m) {
  const FeatureVector f = featurize(m);
  const double v = 1.0 + 0.4 * f[1] + 0.3 * f[2] - 0.2 * f[3] + 1.2 * f[4] + 0.8 * f[6];
  return std::clamp(v, 0.0, 10.0);
}

// ---------------------------------------------------------------------------
// Enumeration and generation

namespace {

constexpr std::array<Token, 6> kEmitTokens = {Token::C, Token::N, Token::O,
                                              Token::F, Token::Open, Token::Close};

void enumerate_from(const PrefixTracker& state, std::string& prefix, std::size_t max_len,
                    std::vector<Molecule>& out) {
  if (state.complete()) out.emplace_back(prefix);
  for (Token t : kEmitTokens) {
    if (!state.allowed(t, max_len)) continue;
    PrefixTracker next = state;
    next.push(t);
    prefix.push_back(token_char(t));
    enumerate_from(next, prefix, max_len, out);
    prefix.pop_back();
  }
}

}  // namespace

std::vector<Molecule> enumerate_valid(std::size_t max_len) {
  if (max_len > 10) throw GuardError("enumerate_valid: max_len must be <= 10");
  std::vector<Molecule> out;
  if (max_len < kMinLength) return out;
  std::string prefix;
  enumerate_from(PrefixTracker{}, prefix, max_len, out);
  std::stable_sort(out.begin(), out.end(),
                   [](const Molecule& a, const Molecule& b) { return a.length() < b.length(); });
  return out;
}

Molecule random_molecule(Rng& rng, std::size_t min_len, std::size_t max_len) {
  if (min_len < kMinLength || max_len > kMaxLength || min_len > max_len) {
    throw GuardError("random_molecule: length range must lie within [4, 16]");
  }
  std::uniform_int_distribution<std::size_t> pick_len(min_len, max_len);
  const std::size_t target = pick_len(rng);

  PrefixTracker state;
  std::string s;
  std::array<Token, 6> options{};
  while (state.length() < target) {
    std::size_t n = 0;
    for (Token t : kEmitTokens) {
      if (state.allowed_exact(t, target)) options[n++] = t;
    }
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    const Token t = options[pick(rng)];
    state.push(t);
    s.push_back(token_char(t));
  }
  return Molecule(std::move(s));
}

// ---------------------------------------------------------------------------
// Dataset files

std::vector<DatasetEntry> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  std::vector<DatasetEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    const std::string tokens = line.substr(0, tab);
    if (!validate(tokens)) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": invalid molecule \"" +
                            tokens + "\"");
    }
    DatasetEntry e{Molecule(tokens), std::nullopt};
    if (tab != std::string::npos) {
      const std::string field = line.substr(tab + 1);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc{} || ptr != field.data() + field.size()) {
        throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": bad score \"" +
                              field + "\"");
      }
      e.score = v;
    }
    out.push_back(std::move(e));
  }
  return out;
}

void write_dataset(const std::filesystem::path& path, const std::vector<DatasetEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset " + path.string());
  char buf[64];
  for (const auto& e : entries) {
    out << e.molecule.str();
    if (e.score) {
      std::snprintf(buf, sizeof buf, "%.10g", *e.score);
      out << '\t' << buf;
    }
    out << '\n';
  }
}

}  // namespace lso
