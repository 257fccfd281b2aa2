#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace loopscope {

/// A word over an Alphabet. The empty word is a legal value.
using Word = std::string;

/// Ordered set of single-character symbols. The emergency-stop character
/// `!` is reserved and can never be a member.
class Alphabet {
 public:
  static constexpr char kStop = '!';

  explicit Alphabet(std::vector<char> symbols);
  static Alphabet binary() { return Alphabet({'0', '1'}); }

  std::span<const char> symbols() const noexcept { return symbols_; }
  std::size_t size() const noexcept { return symbols_.size(); }
  char first() const noexcept { return symbols_.front(); }
  bool contains(char c) const noexcept;
  /// Position of `c` in the symbol order; throws DomainError if absent.
  std::size_t index_of(char c) const;
  bool is_word(std::string_view w) const noexcept;

  friend bool operator==(const Alphabet&, const Alphabet&) = default;

 private:
  std::vector<char> symbols_;
};

/// What an oracle may write back: a word, or the Stop token.
class Answer {
 public:
  Answer() = default;
  static Answer word(Word w) { return Answer(false, std::move(w)); }
  static Answer stop() { return Answer(true, {}); }
  /// "!" parses as Stop, everything else as a word (unvalidated).
  static Answer parse(std::string_view text);

  bool is_stop() const noexcept { return stop_; }
  /// Throws std::logic_error on Stop.
  const Word& word() const;
  /// "!" for Stop, the word itself otherwise.
  std::string str() const { return stop_ ? std::string(1, Alphabet::kStop) : word_; }

  friend auto operator<=>(const Answer&, const Answer&) = default;

 private:
  Answer(bool stop, Word w) : stop_(stop), word_(std::move(w)) {}

  bool stop_ = false;
  Word word_;
};

/// Every word of length 0..max_len in length-then-lexicographic order
/// (lexicographic with respect to the alphabet's symbol order).
std::vector<Word> all_words(const Alphabet& alphabet, std::size_t max_len);

/// Number of words of length 0..max_len.
std::uint64_t count_words(std::size_t alphabet_size, std::size_t max_len);

/// Integer to word: base-|Σ| positional numeral with the symbols as digits
/// in order, most significant first, minimal length (0 is the first symbol).
/// Values outside [0, |Σ|^max_len) are reduced modulo |Σ|^max_len, i.e. the
/// low-order max_len digits are kept. A one-symbol alphabet uses unary
/// (value modulo max_len+1 copies of the symbol).
Word encode_int(std::int64_t value, const Alphabet& alphabet, std::size_t max_len);

/// Inverse of encode_int for words over the alphabet; the empty word is 0.
std::int64_t decode_word(std::string_view w, const Alphabet& alphabet);

/// Largest value decode_word can return for words of length <= max_len.
std::int64_t max_decoded(const Alphabet& alphabet, std::size_t max_len);

}  // namespace loopscope
