#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "loopscope/analysis/tree.hpp"

namespace loopscope {

/// Relates a single-answer machine B to answer tuples of machine A.
class AnswerMapping {
 public:
  virtual ~AnswerMapping() = default;
  /// Every answer tuple for A that the comparison covers.
  virtual std::vector<std::vector<Answer>> a_tuples() const = 0;
  /// B's answers for one A tuple.
  virtual std::vector<Answer> to_b(const std::vector<Answer>& tuple) const = 0;
  virtual std::string describe() const = 0;
};

/// B receives the same answers as A: all tuples of `length` answer words.
class IdentityMapping final : public AnswerMapping {
 public:
  IdentityMapping(Alphabet alphabet, std::size_t max_len, std::size_t length);
  std::vector<std::vector<Answer>> a_tuples() const override;
  std::vector<Answer> to_b(const std::vector<Answer>& tuple) const override { return tuple; }
  std::string describe() const override;

 private:
  Alphabet alphabet_;
  std::size_t max_len_;
  std::size_t length_;
};

/// Fixed-width blocks: a tuple of `count` words, each exactly `width`
/// symbols long, maps to their concatenation (one answer of count*width).
class BlockMapping final : public AnswerMapping {
 public:
  BlockMapping(Alphabet alphabet, std::size_t width, std::size_t count);
  std::vector<std::vector<Answer>> a_tuples() const override;
  std::vector<Answer> to_b(const std::vector<Answer>& tuple) const override;
  std::string describe() const override;
  /// Inverse of to_b; nullopt for words of the wrong length.
  std::optional<std::vector<Word>> split(const Word& w) const;

 private:
  Alphabet alphabet_;
  std::size_t width_;
  std::size_t count_;
};

struct EqualityWitness {
  nlohmann::json input;
  std::vector<std::string> tuple;
  std::string out_a;
  std::string out_b;
};

struct EqualityResult {
  bool equal = true;
  std::uint64_t cases = 0;
  std::optional<EqualityWitness> witness;
};

/// Exhaustive: for every input and every tuple, outcome(A, tuple) equals
/// outcome(B, mapping(tuple)). Both machines must share input domains.
EqualityResult functions_equal(const Machine& a, const Machine& b, const AnswerMapping& mapping,
                               const Limits& limits = {});

struct NotFlattenable {
  std::string reason;
  nlohmann::json input;
  std::vector<std::string> path_a;
  std::vector<std::string> path_b;
  std::string prompt_a;
  std::string prompt_b;
};

struct Flattened {
  MachinePtr machine;                      // the single-query machine
  std::shared_ptr<BlockMapping> mapping;   // null when returned unchanged
  std::size_t questions = 0;
  EqualityResult certificate;
};

/// Conglomerate prompt: every symbol doubled, questions joined by the
/// separator s0 s1 (s0, s1 the first two alphabet symbols).
Word conglomerate_prompt(const std::vector<Word>& prompts, const Alphabet& alphabet);
std::vector<Word> split_conglomerate(const Word& prompt, const Alphabet& alphabet);

/// Replace a predetermined series of at most `max_questions` queries by a
/// single conglomerate query. Zero-query machines are returned unchanged.
std::variant<Flattened, NotFlattenable> flatten_bounded_queries(MachinePtr machine, const Limits& limits = {},
                                                                std::size_t max_questions = 8);

}  // namespace loopscope
