#include "loopscope/analysis/flatten.hpp"

#include <fmt/format.h>

#include <map>
#include <stdexcept>

#include "loopscope/ir/errors.hpp"

namespace loopscope {

namespace {

std::vector<std::vector<Answer>> tuples_over(const std::vector<Word>& words, std::size_t length) {
  std::vector<std::vector<Answer>> out{{}};
  for (std::size_t i = 0; i < length; ++i) {
    std::vector<std::vector<Answer>> next;
    next.reserve(out.size() * words.size());
    for (const auto& prefix : out) {
      for (const auto& w : words) {
        auto t = prefix;
        t.push_back(Answer::word(w));
        next.push_back(std::move(t));
      }
    }
    out = std::move(next);
  }
  return out;
}

std::vector<Word> words_of_length(const Alphabet& alphabet, std::size_t n) {
  std::vector<Word> out;
  for (auto& w : all_words(alphabet, n)) {
    if (w.size() == n) out.push_back(std::move(w));
  }
  return out;
}

OracleStrategy tuple_oracle(const std::vector<Answer>& tuple) {
  return tuple.empty() ? constant_answer(Answer::stop()) : scripted_answer(tuple);
}

/// Single-query machine equivalent to a predetermined question series.
/// Phase 0 runs the original with filler answers to collect the prompts,
/// phase 1 asks the conglomerate question, phase 2 re-runs the original
/// with the decoded answers, phase 3 aborts (malformed answer).
class FlattenedMachine final : public Machine {
 public:
  FlattenedMachine(MachinePtr inner, std::size_t questions)
      : a_(std::move(inner)),
        n_(questions),
        mapping_(a_->alphabet(), a_->max_answer_len(), questions),
        name_(a_->name() + "-flat"),
        hash_(fnv1a64("flatten", a_->spec_hash() ^ questions)) {}

  const std::string& name() const override { return name_; }
  const Alphabet& alphabet() const override { return a_->alphabet(); }
  std::size_t max_answer_len() const override { return n_ * a_->max_answer_len(); }
  std::span<const VarDecl> inputs() const override { return a_->inputs(); }
  std::uint64_t spec_hash() const override { return hash_; }

  Configuration initial(const Input& input) const override {
    Configuration c;
    c.store = input;
    c.inner = std::make_shared<const Configuration>(a_->initial(input));
    return c;
  }

  StepEffect step(const Configuration& config) const override {
    switch (config.phase) {
      case 0:
        return collect(config);
      case 1: {
        Query q;
        q.prompt = conglomerate_prompt(config.scratch, alphabet());
        q.at = config;
        q.tag = "conglomerate";
        return q;
      }
      case 2:
        return decode(config);
      default:
        return Abort{};
    }
  }

  StepEffect resume(const Configuration& at, const Answer& answer) const override {
    if (answer.is_stop()) return Abort{};
    if (!in_answer_space(answer.word())) throw DomainError("answer outside the answer space");
    Configuration next = at;
    ++next.queries;
    if (auto blocks = mapping_.split(answer.word())) {
      next.phase = 2;
      next.scratch = std::move(*blocks);
      next.inner = std::make_shared<const Configuration>(a_->initial(at.store));
    } else {
      next.phase = 3;
    }
    return Continue{std::move(next)};
  }

  std::string location(const Configuration& c) const override {
    return fmt::format("phase{}:{}", c.phase, c.inner ? a_->location(*c.inner) : "");
  }

 private:
  StepEffect collect(const Configuration& config) const {
    Configuration next = config;
    ++next.steps;
    StepEffect e = a_->step(*config.inner);
    if (auto* c = std::get_if<Continue>(&e)) {
      next.inner = std::make_shared<const Configuration>(std::move(c->next));
    } else if (auto* q = std::get_if<Query>(&e)) {
      next.scratch.push_back(q->prompt);
      const Word filler(a_->max_answer_len(), alphabet().first());
      auto r = a_->resume(q->at, Answer::word(filler));
      next.inner = std::make_shared<const Configuration>(std::move(std::get<Continue>(r).next));
    } else {
      next.phase = 1;
      next.inner.reset();
    }
    return Continue{std::move(next)};
  }

  StepEffect decode(const Configuration& config) const {
    StepEffect e = a_->step(*config.inner);
    Configuration next = config;
    ++next.steps;
    if (auto* c = std::get_if<Continue>(&e)) {
      next.inner = std::make_shared<const Configuration>(std::move(c->next));
      return Continue{std::move(next)};
    }
    if (auto* q = std::get_if<Query>(&e)) {
      const auto idx = config.inner->queries;
      if (idx >= config.scratch.size()) return Abort{};
      auto r = a_->resume(q->at, Answer::word(config.scratch[idx]));
      next.inner = std::make_shared<const Configuration>(std::move(std::get<Continue>(r).next));
      return Continue{std::move(next)};
    }
    if (auto* h = std::get_if<Halt>(&e)) return Halt{h->output, config};
    return Abort{};
  }

  MachinePtr a_;
  std::size_t n_;
  BlockMapping mapping_;
  std::string name_;
  std::uint64_t hash_;
};

}  // namespace

IdentityMapping::IdentityMapping(Alphabet alphabet, std::size_t max_len, std::size_t length)
    : alphabet_(std::move(alphabet)), max_len_(max_len), length_(length) {}

std::vector<std::vector<Answer>> IdentityMapping::a_tuples() const {
  return tuples_over(all_words(alphabet_, max_len_), length_);
}

std::string IdentityMapping::describe() const {
  return fmt::format("identity over {}-tuples of words up to length {}", length_, max_len_);
}

BlockMapping::BlockMapping(Alphabet alphabet, std::size_t width, std::size_t count)
    : alphabet_(std::move(alphabet)), width_(width), count_(count) {}

std::vector<std::vector<Answer>> BlockMapping::a_tuples() const {
  return tuples_over(words_of_length(alphabet_, width_), count_);
}

std::vector<Answer> BlockMapping::to_b(const std::vector<Answer>& tuple) const {
  Word w;
  for (const auto& a : tuple) w += a.word();
  return {Answer::word(std::move(w))};
}

std::optional<std::vector<Word>> BlockMapping::split(const Word& w) const {
  if (w.size() != width_ * count_) return std::nullopt;
  std::vector<Word> out;
  for (std::size_t i = 0; i < count_; ++i) out.push_back(w.substr(i * width_, width_));
  return out;
}

std::string BlockMapping::describe() const {
  return fmt::format("{} answers of exactly {} symbols, concatenated in question order", count_, width_);
}

EqualityResult functions_equal(const Machine& a, const Machine& b, const AnswerMapping& mapping,
                               const Limits& limits) {
  const auto ia = a.inputs();
  const auto ib = b.inputs();
  if (ia.size() != ib.size()) throw std::invalid_argument("machines have different input declarations");
  for (std::size_t i = 0; i < ia.size(); ++i) {
    if (ia[i].name != ib[i].name || !(ia[i].domain == ib[i].domain))
      throw std::invalid_argument("machines have different input declarations");
  }
  EqualityResult res;
  const auto tuples = mapping.a_tuples();
  for (const auto& input : enumerate_inputs(ia)) {
    for (const auto& tuple : tuples) {
      ++res.cases;
      const auto out_a = run(a, input, tuple_oracle(tuple), limits).outcome;
      const auto out_b = run(b, input, tuple_oracle(mapping.to_b(tuple)), limits).outcome;
      if (!(out_a == out_b)) {
        res.equal = false;
        EqualityWitness w;
        w.input = input_to_json(input, ia);
        for (const auto& t : tuple) w.tuple.push_back(t.str());
        w.out_a = out_a.str();
        w.out_b = out_b.str();
        res.witness = std::move(w);
        return res;
      }
    }
  }
  return res;
}

Word conglomerate_prompt(const std::vector<Word>& prompts, const Alphabet& alphabet) {
  Word out;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    if (i) {
      out += alphabet.symbols()[0];
      out += alphabet.symbols()[1];
    }
    for (char c : prompts[i]) {
      out += c;
      out += c;
    }
  }
  return out;
}

std::vector<Word> split_conglomerate(const Word& prompt, const Alphabet& alphabet) {
  if (prompt.size() % 2 != 0) throw DomainError("conglomerate prompt has odd length");
  std::vector<Word> out{Word{}};
  for (std::size_t i = 0; i < prompt.size(); i += 2) {
    if (prompt[i] == prompt[i + 1]) {
      out.back() += prompt[i];
    } else if (prompt[i] == alphabet.symbols()[0] && prompt[i + 1] == alphabet.symbols()[1]) {
      out.emplace_back();
    } else {
      throw DomainError("malformed conglomerate prompt");
    }
  }
  if (prompt.empty()) out.clear();
  return out;
}

std::variant<Flattened, NotFlattenable> flatten_bounded_queries(MachinePtr machine, const Limits& limits,
                                                                std::size_t max_questions) {
  std::optional<std::size_t> series;
  for (const auto& input : enumerate_inputs(machine->inputs())) {
    const auto tree = build_tree(*machine, input, limits);
    if (tree.truncated)
      return NotFlattenable{"computation tree truncated; the question series cannot be confirmed", tree.input_json,
                            {}, {}, {}, {}};
    std::map<std::uint64_t, std::size_t> first_at_depth;
    std::optional<std::uint64_t> halt_depth;
    std::size_t halt_node = 0;
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const auto& n = tree.nodes[i];
      auto paths = [&](std::size_t other) {
        std::vector<std::string> pa, pb;
        for (const auto& x : tree.path_to(other)) pa.push_back(x.str());
        for (const auto& x : tree.path_to(i)) pb.push_back(x.str());
        return std::pair{pa, pb};
      };
      if (n.kind == TreeNode::Kind::Query) {
        auto [it, fresh] = first_at_depth.emplace(n.query_depth, i);
        if (!fresh && tree.nodes[it->second].prompt != n.prompt) {
          auto [pa, pb] = paths(it->second);
          return NotFlattenable{fmt::format("question {} depends on earlier answers", n.query_depth + 1),
                                tree.input_json, pa, pb, tree.nodes[it->second].prompt, n.prompt};
        }
      } else if (n.kind == TreeNode::Kind::Halt) {
        if (halt_depth && *halt_depth != n.query_depth) {
          auto [pa, pb] = paths(halt_node);
          return NotFlattenable{"the number of questions depends on earlier answers", tree.input_json, pa, pb, {},
                                {}};
        }
        halt_depth = n.query_depth;
        halt_node = i;
      }
    }
    const std::size_t n = halt_depth ? *halt_depth : first_at_depth.size();
    if (series && *series != n)
      return NotFlattenable{"the number of questions differs between inputs", tree.input_json, {}, {}, {}, {}};
    series = n;
  }
  const std::size_t n = series.value_or(0);
  Flattened out;
  out.questions = n;
  if (n == 0) {
    out.machine = std::move(machine);
    out.certificate.equal = true;
    return out;
  }
  if (n > max_questions)
    return NotFlattenable{fmt::format("{} questions exceed the bound of {}", n, max_questions), {}, {}, {}, {}, {}};
  if (machine->alphabet().size() < 2)
    return NotFlattenable{"the conglomerate encoding needs at least two symbols", {}, {}, {}, {}, {}};
  out.mapping = std::make_shared<BlockMapping>(machine->alphabet(), machine->max_answer_len(), n);
  out.machine = std::make_shared<FlattenedMachine>(machine, n);
  out.certificate = functions_equal(*machine, *out.machine, *out.mapping, limits);
  return out;
}

}  // namespace loopscope
