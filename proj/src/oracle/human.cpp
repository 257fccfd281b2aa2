#include "loopscope/oracle/human.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "loopscope/ir/errors.hpp"
#include "loopscope/ir/json_fields.hpp"

namespace loopscope {

namespace {

enum Draw : std::uint64_t { kReaction = 1, kBias = 2, kError = 3, kPick = 4, kCourage = 5, kTick = 6 };

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

constexpr std::int64_t kMaxRecoveryTicks = 1'000'000;

}  // namespace

double ReactionTime::sample(const CounterRng& rng, std::uint64_t k) const {
  switch (kind) {
    case Kind::Fixed:
      return a;
    case Kind::Uniform:
      return a + (b - a) * rng.uniform(kReaction, k);
    case Kind::TruncatedNormal: {
      // Rejection sampling with keyed attempts; falls back to the bound.
      for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
        const double x = a + b * rng.normal(kReaction, (k << 8) | attempt);
        if (x >= min) return x;
      }
      return std::max(min, a);
    }
  }
  return a;
}

double Attention::delay_at(const CounterRng& rng, double t) const {
  if (p_distract <= 0.0) return 0.0;
  const auto start = -static_cast<std::int64_t>(std::ceil(warmup));
  const auto now = static_cast<std::int64_t>(std::floor(t));
  bool distracted = false;
  auto advance = [&](std::int64_t tick) {
    const double u = rng.uniform(kTick, static_cast<std::uint64_t>(tick));
    distracted = distracted ? !(u < p_recover) : (u < p_distract);
  };
  for (std::int64_t tick = start; tick < now; ++tick) advance(tick);
  if (!distracted) return 0.0;
  std::int64_t tick = now;
  while (distracted && tick - now < kMaxRecoveryTicks) advance(tick++);
  return static_cast<double>(tick) - t;
}

double Fatigue::rate(std::uint64_t k) const {
  return std::min(eps0 + gamma * static_cast<double>(k), eps_max);
}

void HumanModelParams::validate() const {
  auto prob = [](double p, const char* what) {
    if (!is_probability(p)) throw DomainError(fmt::format("{} must be within [0, 1], got {}", what, p));
  };
  prob(attention.p_distract, "attention.p_distract");
  prob(attention.p_recover, "attention.p_recover");
  if (attention.p_distract > 0 && attention.p_recover <= 0)
    throw DomainError("attention.p_recover must be positive when distraction is possible");
  if (attention.warmup < 0) throw DomainError("attention.warmup must be non-negative");
  prob(automation_bias, "automation_bias");
  prob(courage, "courage");
  prob(fatigue.eps0, "fatigue.eps0");
  prob(fatigue.eps_max, "fatigue.eps_max");
  if (fatigue.gamma < 0) throw DomainError("fatigue.gamma must be non-negative");
  switch (reaction.kind) {
    case ReactionTime::Kind::Fixed:
      if (reaction.a < 0) throw DomainError("reaction time must be non-negative");
      break;
    case ReactionTime::Kind::Uniform:
      if (reaction.a < 0 || reaction.b < reaction.a) throw DomainError("uniform reaction needs 0 <= min <= max");
      break;
    case ReactionTime::Kind::TruncatedNormal:
      if (reaction.min < 0 || reaction.b < 0) throw DomainError("truncated normal needs min >= 0 and sigma >= 0");
      break;
  }
}

OracleStrategy stochastic_human(HumanModelParams params, std::uint64_t seed, OracleStrategy intent,
                                const Alphabet& alphabet, std::size_t max_len) {
  params.validate();
  const CounterRng rng(splitmix64(seed) ^ stream_key(params.seed_stream));
  auto words = all_words(alphabet, max_len);
  auto desc = fmt::format("stochastic human (seed {}, intent {})", seed, intent.descriptor);
  return OracleStrategy{
      desc, false,
      [params, rng, intent = std::move(intent), words = std::move(words)](const Word& prompt,
                                                                           const QueryContext& ctx) {
        const auto k = ctx.query_index;
        OracleResponse r;
        double latency = params.reaction.sample(rng, k);
        const double delay = params.attention.delay_at(rng, to_seconds(ctx.elapsed));
        if (delay > 0) r.flags.push_back("distracted");
        latency += delay;
        r.latency = from_seconds(latency);

        if (ctx.suggested_default && rng.uniform(kBias, k) < params.automation_bias) {
          r.answer = Answer::word(*ctx.suggested_default);
          r.flags.push_back("automation-bias");
          return r;
        }
        const auto meant = intent(prompt, ctx);
        if (rng.uniform(kError, k) < params.fatigue.rate(k)) {
          std::vector<const Word*> wrong;
          for (const auto& w : words) {
            if (meant.answer.is_stop() || w != meant.answer.word()) wrong.push_back(&w);
          }
          if (!wrong.empty()) {
            r.answer = Answer::word(*wrong[rng.below(wrong.size(), kPick, k)]);
            r.flags.push_back("fatigue-error");
            return r;
          }
        }
        if (ctx.hazard && rng.uniform(kCourage, k) < params.courage) {
          r.answer = Answer::stop();
          r.flags.push_back("courage-stop");
          return r;
        }
        r.answer = meant.answer;
        r.flags.push_back("intent");
        return r;
      }};
}

HumanModelParams human_params_from_json(const nlohmann::json& j, const std::string& path) {
  JsonFields f(j, path);
  HumanModelParams p;
  if (const auto* r = f.optional("reaction")) {
    if (r->is_number()) {
      p.reaction.a = r->get<double>();
    } else {
      JsonFields rf(*r, f.path_of("reaction"));
      const auto type = rf.string("type");
      if (type == "fixed") {
        p.reaction.a = rf.number("value");
      } else if (type == "uniform") {
        p.reaction.kind = ReactionTime::Kind::Uniform;
        p.reaction.a = rf.number("min");
        p.reaction.b = rf.number("max");
      } else if (type == "truncnormal") {
        p.reaction.kind = ReactionTime::Kind::TruncatedNormal;
        p.reaction.a = rf.number("mean");
        p.reaction.b = rf.number("sigma");
        p.reaction.min = rf.number_or("min", 0.0);
      } else {
        throw SpecError(rf.path_of("type"), "unknown reaction type '" + type + "' (fixed, uniform, truncnormal)");
      }
      rf.finish();
    }
  }
  if (const auto* a = f.optional("attention")) {
    JsonFields af(*a, f.path_of("attention"));
    p.attention.p_distract = af.number_or("p_distract", 0.0);
    p.attention.p_recover = af.number_or("p_recover", 1.0);
    p.attention.warmup = af.number_or("warmup", 0.0);
    af.finish();
  }
  p.automation_bias = f.number_or("automation_bias", 0.0);
  if (const auto* fa = f.optional("fatigue")) {
    JsonFields ff(*fa, f.path_of("fatigue"));
    p.fatigue.eps0 = ff.number_or("eps0", 0.0);
    p.fatigue.gamma = ff.number_or("gamma", 0.0);
    p.fatigue.eps_max = ff.number_or("eps_max", 1.0);
    ff.finish();
  }
  p.courage = f.number_or("courage", 0.0);
  p.seed_stream = f.string_or("seed_stream", "human");
  f.finish();
  try {
    p.validate();
  } catch (const DomainError& e) {
    throw SpecError(path, e.what());
  }
  return p;
}

nlohmann::json human_params_to_json(const HumanModelParams& p) {
  nlohmann::json reaction;
  switch (p.reaction.kind) {
    case ReactionTime::Kind::Fixed:
      reaction = {{"type", "fixed"}, {"value", p.reaction.a}};
      break;
    case ReactionTime::Kind::Uniform:
      reaction = {{"type", "uniform"}, {"min", p.reaction.a}, {"max", p.reaction.b}};
      break;
    case ReactionTime::Kind::TruncatedNormal:
      reaction = {{"type", "truncnormal"}, {"mean", p.reaction.a}, {"sigma", p.reaction.b}, {"min", p.reaction.min}};
      break;
  }
  return {{"reaction", reaction},
          {"attention",
           {{"p_distract", p.attention.p_distract},
            {"p_recover", p.attention.p_recover},
            {"warmup", p.attention.warmup}}},
          {"automation_bias", p.automation_bias},
          {"fatigue", {{"eps0", p.fatigue.eps0}, {"gamma", p.fatigue.gamma}, {"eps_max", p.fatigue.eps_max}}},
          {"courage", p.courage},
          {"seed_stream", p.seed_stream}};
}

OracleStrategy intent_from_json(const nlohmann::json& j, const Alphabet& alphabet, std::size_t max_len,
                                const std::string& path) {
  if (j.is_string() && j.get<std::string>() == "$echo") return echo_answer(max_len);
  if (j.is_string()) return constant_answer(answer_from_json(j, alphabet, max_len, path));
  if (j.is_array() && !j.empty()) {
    std::vector<Answer> script;
    for (std::size_t i = 0; i < j.size(); ++i)
      script.push_back(answer_from_json(j[i], alphabet, max_len, fmt::format("{}[{}]", path, i)));
    return scripted_answer(std::move(script));
  }
  if (j.is_object() && !j.empty()) {
    // By query tag; "*" covers untagged or unlisted queries.
    std::map<std::string, OracleStrategy> by_tag;
    for (auto it = j.begin(); it != j.end(); ++it)
      by_tag.emplace(it.key(), intent_from_json(it.value(), alphabet, max_len, path + "." + it.key()));
    const bool det = std::all_of(by_tag.begin(), by_tag.end(), [](const auto& kv) { return kv.second.deterministic; });
    return OracleStrategy{"by-tag " + j.dump(), det, [by_tag = std::move(by_tag), path](const Word& prompt,
                                                                                        const QueryContext& ctx) {
                            auto it = by_tag.find(ctx.tag);
                            if (it == by_tag.end()) it = by_tag.find("*");
                            if (it == by_tag.end())
                              throw SpecError(path, "no intent for query tag '" + ctx.tag + "' and no \"*\" entry");
                            return it->second(prompt, ctx);
                          }};
  }
  throw SpecError(path, "intent must be \"$echo\", \"!\", a word, a non-empty list, or an object by query tag");
}

}  // namespace loopscope
