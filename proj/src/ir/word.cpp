#include "loopscope/ir/word.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "loopscope/ir/errors.hpp"

namespace loopscope {

Alphabet::Alphabet(std::vector<char> symbols) : symbols_(std::move(symbols)) {
  if (symbols_.empty()) throw DomainError("alphabet must not be empty");
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (symbols_[i] == kStop) throw DomainError("'!' is reserved for the emergency stop");
    for (std::size_t j = 0; j < i; ++j) {
      if (symbols_[i] == symbols_[j])
        throw DomainError(std::string("duplicate alphabet symbol '") + symbols_[i] + "'");
    }
  }
}

bool Alphabet::contains(char c) const noexcept {
  return std::find(symbols_.begin(), symbols_.end(), c) != symbols_.end();
}

std::size_t Alphabet::index_of(char c) const {
  auto it = std::find(symbols_.begin(), symbols_.end(), c);
  if (it == symbols_.end()) throw DomainError(std::string("symbol '") + c + "' not in alphabet");
  return static_cast<std::size_t>(it - symbols_.begin());
}

bool Alphabet::is_word(std::string_view w) const noexcept {
  return std::all_of(w.begin(), w.end(), [this](char c) { return contains(c); });
}

Answer Answer::parse(std::string_view text) {
  if (text.size() == 1 && text[0] == Alphabet::kStop) return stop();
  return word(Word(text));
}

const Word& Answer::word() const {
  if (stop_) throw std::logic_error("Stop answer carries no word");
  return word_;
}

std::vector<Word> all_words(const Alphabet& alphabet, std::size_t max_len) {
  std::vector<Word> out{Word{}};
  std::size_t level_begin = 0;
  for (std::size_t len = 1; len <= max_len; ++len) {
    const std::size_t level_end = out.size();
    for (std::size_t i = level_begin; i < level_end; ++i) {
      for (char c : alphabet.symbols()) out.push_back(out[i] + c);
    }
    level_begin = level_end;
  }
  return out;
}

std::uint64_t count_words(std::size_t alphabet_size, std::size_t max_len) {
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t total = 0;
  std::uint64_t level = 1;
  for (std::size_t len = 0; len <= max_len; ++len) {
    if (total > kMax - level) return kMax;
    total += level;
    if (len < max_len) {
      if (alphabet_size != 0 && level > kMax / alphabet_size) return kMax;
      level *= alphabet_size;
    }
  }
  return total;
}

namespace {

// |Σ|^len, or nullopt-like -1 on int64 overflow.
std::int64_t power_or_neg(std::size_t base, std::size_t len) {
  std::int64_t p = 1;
  for (std::size_t i = 0; i < len; ++i) {
    if (p > std::numeric_limits<std::int64_t>::max() / static_cast<std::int64_t>(base)) return -1;
    p *= static_cast<std::int64_t>(base);
  }
  return p;
}

}  // namespace

std::int64_t max_decoded(const Alphabet& alphabet, std::size_t max_len) {
  if (alphabet.size() == 1) return static_cast<std::int64_t>(max_len);
  const auto p = power_or_neg(alphabet.size(), max_len);
  return p < 0 ? std::numeric_limits<std::int64_t>::max() : p - 1;
}

Word encode_int(std::int64_t value, const Alphabet& alphabet, std::size_t max_len) {
  const auto syms = alphabet.symbols();
  if (syms.size() == 1) {
    const auto m = static_cast<std::int64_t>(max_len) + 1;
    const auto n = ((value % m) + m) % m;
    return Word(static_cast<std::size_t>(n), syms[0]);
  }
  if (max_len == 0) return {};
  const auto base = static_cast<std::int64_t>(syms.size());
  const auto modulus = power_or_neg(syms.size(), max_len);
  std::int64_t v = value;
  if (modulus > 0) v = ((v % modulus) + modulus) % modulus;
  if (v == 0) return Word(1, syms[0]);
  Word out;
  while (v > 0 && out.size() < max_len) {
    out.push_back(syms[static_cast<std::size_t>(v % base)]);
    v /= base;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::int64_t decode_word(std::string_view w, const Alphabet& alphabet) {
  if (alphabet.size() == 1) return static_cast<std::int64_t>(w.size());
  const auto base = static_cast<std::int64_t>(alphabet.size());
  std::int64_t v = 0;
  for (char c : w) v = v * base + static_cast<std::int64_t>(alphabet.index_of(c));
  return v;
}

}  // namespace loopscope
