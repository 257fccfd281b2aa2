#include "loopscope/failure/fault.hpp"

#include <fmt/format.h>

#include <algorithm>

#include "loopscope/ir/errors.hpp"
#include "loopscope/ir/json_fields.hpp"
#include "loopscope/ir/process.hpp"
#include "loopscope/oracle/rng.hpp"

namespace loopscope {

namespace {

constexpr FaultKind kAllKinds[] = {FaultKind::NotificationDelay, FaultKind::PromptTruncation,
                                   FaultKind::MisclassificationMap, FaultKind::OutputError,
                                   FaultKind::Set, FaultKind::ExtraDelay,
                                   FaultKind::Deadline, FaultKind::Human,
                                   FaultKind::ErrorRate, FaultKind::Description};

SimDuration seconds_of(const nlohmann::json& j, const std::string& path, bool allow_zero = true) {
  if (!j.is_number()) throw SpecError(path, "expected a number of seconds");
  const double s = j.get<double>();
  if (s < 0 || (!allow_zero && s == 0)) throw SpecError(path, "seconds must be positive");
  return from_seconds(s);
}

double probability_of(const nlohmann::json& j, const std::string& path) {
  if (!j.is_number()) throw SpecError(path, "expected a probability");
  const double p = j.get<double>();
  if (p < 0 || p > 1) throw SpecError(path, "probability must be within [0, 1]");
  return p;
}

void incompatible(const FaultInjection& f, const char* what) {
  throw DomainError(fmt::format("fault {} ({}) cannot be injected into {}", f.mode_id, fault_kind_name(f.kind), what));
}

/// Forwards everything to the wrapped machine.
class ForwardingMachine : public Machine {
 public:
  explicit ForwardingMachine(MachinePtr inner, std::uint64_t hash) : inner_(std::move(inner)), hash_(hash) {}

  const std::string& name() const override { return inner_->name(); }
  const Alphabet& alphabet() const override { return inner_->alphabet(); }
  std::size_t max_answer_len() const override { return inner_->max_answer_len(); }
  std::span<const VarDecl> inputs() const override { return inner_->inputs(); }
  std::uint64_t spec_hash() const override { return hash_; }
  Configuration initial(const Input& input) const override { return inner_->initial(input); }
  StepEffect step(const Configuration& c) const override { return inner_->step(c); }
  StepEffect resume(const Configuration& c, const Answer& a) const override { return inner_->resume(c, a); }
  NodeDuration duration(const Configuration& c) const override { return inner_->duration(c); }
  std::string location(const Configuration& c) const override { return inner_->location(c); }

 protected:
  MachinePtr inner_;
  std::uint64_t hash_;
};

class DelayedMachine final : public ForwardingMachine {
 public:
  DelayedMachine(MachinePtr inner, std::uint64_t hash, std::map<std::string, SimDuration> extra)
      : ForwardingMachine(std::move(inner), hash), extra_(std::move(extra)) {}

  NodeDuration duration(const Configuration& c) const override {
    auto d = inner_->duration(c);
    if (auto it = extra_.find(inner_->location(c)); it != extra_.end()) d.fixed += it->second;
    return d;
  }

 private:
  std::map<std::string, SimDuration> extra_;
};

class NoisyOutputMachine final : public ForwardingMachine {
 public:
  NoisyOutputMachine(MachinePtr inner, std::uint64_t hash, double p, std::uint64_t seed)
      : ForwardingMachine(std::move(inner), hash),
        p_(p),
        rng_(splitmix64(seed) ^ stream_key("output-error")),
        words_(all_words(inner_->alphabet(), inner_->max_answer_len())) {}

  StepEffect step(const Configuration& c) const override {
    auto eff = inner_->step(c);
    auto* h = std::get_if<Halt>(&eff);
    if (!h || !(rng_.uniform(1, c.steps) < p_)) return eff;
    std::vector<const Word*> other;
    for (const auto& w : words_) {
      if (w != h->output) other.push_back(&w);
    }
    if (!other.empty()) h->output = *other[rng_.below(other.size(), 2, c.steps)];
    return eff;
  }

 private:
  double p_;
  CounterRng rng_;
  std::vector<Word> words_;
};

}  // namespace

const FailureMode& FaultInjection::mode() const {
  const auto* m = load_taxonomy().find(mode_id);
  if (!m) throw DomainError("unknown failure mode '" + mode_id + "'");
  return *m;
}

nlohmann::ordered_json FaultInjection::to_json() const {
  nlohmann::ordered_json j;
  j["mode"] = mode_id;
  j["target"] = fault_target_name(target);
  j[fault_kind_name(kind)] = params;
  return j;
}

FaultInjection parse_fault(const nlohmann::json& j, const std::string& path) {
  JsonFields f(j, path);
  FaultInjection fault;
  fault.mode_id = f.string("mode");
  const auto* mode = load_taxonomy().find(fault.mode_id);
  if (!mode) throw SpecError(f.path_of("mode"), "unknown failure mode '" + fault.mode_id + "'");
  try {
    fault.target = fault_target_from_name(f.string("target"));
  } catch (const DomainError& e) {
    throw SpecError(f.path_of("target"), e.what());
  }
  if (std::find(mode->targets.begin(), mode->targets.end(), fault.target) == mode->targets.end())
    throw SpecError(f.path_of("target"), fmt::format("mode {} does not apply to target {}", fault.mode_id,
                                                     fault_target_name(fault.target)));

  const nlohmann::json* value = nullptr;
  for (auto k : kAllKinds) {
    if (const auto* v = f.optional(fault_kind_name(k))) {
      if (value) throw SpecError(path, "a fault carries exactly one parameter kind");
      value = v;
      fault.kind = k;
    }
  }
  if (!value) throw SpecError(path, "missing fault parameters");
  f.finish();

  const auto where = path + "." + fault_kind_name(fault.kind);
  if (std::find(mode->kinds.begin(), mode->kinds.end(), fault.kind) == mode->kinds.end())
    throw SpecError(where, fmt::format("mode {} does not take {}", fault.mode_id, fault_kind_name(fault.kind)));
  const auto targets = kind_targets(fault.kind);
  if (std::find(targets.begin(), targets.end(), fault.target) == targets.end())
    throw SpecError(where, fmt::format("{} does not act on target {}", fault_kind_name(fault.kind),
                                       fault_target_name(fault.target)));

  fault.params = *value;
  switch (fault.kind) {
    case FaultKind::NotificationDelay:
    case FaultKind::Deadline:
      fault.seconds = seconds_of(*value, where);
      break;
    case FaultKind::PromptTruncation:
      if (!value->is_number_integer() || value->get<std::int64_t>() < 0)
        throw SpecError(where, "expected the number of symbols to keep");
      fault.keep = value->get<std::size_t>();
      break;
    case FaultKind::OutputError:
    case FaultKind::ErrorRate:
      fault.probability = probability_of(*value, where);
      break;
    case FaultKind::MisclassificationMap: {
      JsonFields mf(*value, where);
      auto& m = fault.misclassification;
      m.event = mf.string("event");
      const auto& labels = mf.required("labels");
      const auto& dwell = mf.required("dwell");
      if (!labels.is_array() || labels.empty()) throw SpecError(mf.path_of("labels"), "expected a non-empty list");
      if (!dwell.is_array() || dwell.size() != labels.size())
        throw SpecError(mf.path_of("dwell"), "expected one dwell time per label");
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!labels[i].is_string()) throw SpecError(fmt::format("{}.labels[{}]", where, i), "expected a label");
        m.labels.push_back(labels[i].get<std::string>());
        m.dwell.push_back(seconds_of(dwell[i], fmt::format("{}.dwell[{}]", where, i), false));
      }
      mf.finish();
      break;
    }
    case FaultKind::Set:
      if (!value->is_object() || value->empty()) throw SpecError(where, "expected an object of variable values");
      for (auto it = value->begin(); it != value->end(); ++it) fault.set[it.key()] = it.value();
      break;
    case FaultKind::ExtraDelay:
      if (!value->is_object() || value->empty()) throw SpecError(where, "expected an object of node delays");
      for (auto it = value->begin(); it != value->end(); ++it)
        fault.extra_delay[it.key()] = seconds_of(it.value(), where + "." + it.key());
      break;
    case FaultKind::Human:
      if (!value->is_object()) throw SpecError(where, "expected a partial human model");
      fault.human = *value;
      inject(HumanModelParams{}, fault);  // validates
      break;
    case FaultKind::Description:
      if (!value->is_string()) throw SpecError(where, "expected free text");
      fault.description = value->get<std::string>();
      break;
  }
  return fault;
}

MachinePtr inject(MachinePtr machine, const FaultInjection& fault, std::uint64_t seed) {
  const auto hash = fnv1a64(fault.to_json().dump(), machine->spec_hash());
  switch (fault.kind) {
    case FaultKind::Description:
      return machine;
    case FaultKind::ExtraDelay:
      return std::make_shared<DelayedMachine>(std::move(machine), hash, fault.extra_delay);
    case FaultKind::OutputError:
      return std::make_shared<NoisyOutputMachine>(std::move(machine), hash, fault.probability, seed);
    case FaultKind::Set: {
      const auto* pm = dynamic_cast<const ProcessMachine*>(machine.get());
      if (!pm) throw DomainError("fault " + fault.mode_id + ": set needs a process-mode machine");
      ProcessSpec spec = pm->spec();
      for (const auto& [name, value] : fault.set) {
        const auto slot = spec.slot_of(name);
        if (!slot || *slot < spec.input_count)
          throw DomainError("fault " + fault.mode_id + ": '" + name + "' is not a variable of " + spec.name);
        auto& decl = spec.slots[*slot];
        try {
          decl.init = value_from_json(value, decl.domain);
        } catch (const DomainError& e) {
          throw DomainError("fault " + fault.mode_id + ": variable '" + name + "': " + e.what());
        }
      }
      spec.hash = hash;
      return std::make_shared<ProcessMachine>(std::move(spec));
    }
    default:
      incompatible(fault, "a machine");
  }
  return machine;
}

OracleStrategy inject(OracleStrategy oracle, const FaultInjection& fault) {
  switch (fault.kind) {
    case FaultKind::Description:
      return oracle;
    case FaultKind::NotificationDelay: {
      const auto delay = fault.seconds;
      auto desc = fmt::format("{} + notification delay {}s", oracle.descriptor, to_seconds(delay));
      const bool det = oracle.deterministic;
      return OracleStrategy{std::move(desc), det,
                            [inner = std::move(oracle), delay](const Word& prompt, const QueryContext& ctx) {
                              QueryContext seen = ctx;
                              seen.elapsed += delay;
                              auto r = inner(prompt, seen);
                              r.latency += delay;
                              r.flags.push_back("notification-delay");
                              return r;
                            }};
    }
    case FaultKind::PromptTruncation: {
      const auto keep = fault.keep;
      auto desc = fmt::format("{} + prompt truncated to {}", oracle.descriptor, keep);
      const bool det = oracle.deterministic;
      return OracleStrategy{std::move(desc), det,
                            [inner = std::move(oracle), keep](const Word& prompt, const QueryContext& ctx) {
                              if (prompt.size() <= keep) return inner(prompt, ctx);
                              auto r = inner(prompt.substr(0, keep), ctx);
                              r.flags.push_back("prompt-truncated");
                              return r;
                            }};
    }
    default:
      incompatible(fault, "an oracle");
  }
  return oracle;
}

Timeline inject(const Timeline& timeline, const FaultInjection& fault) {
  if (fault.kind == FaultKind::Description) return timeline;
  if (fault.kind != FaultKind::MisclassificationMap) incompatible(fault, "a timeline");
  const auto& m = fault.misclassification;
  Timeline out;
  for (const auto& e : timeline) {
    if (e.label != m.event) {
      out.push_back(e);
      continue;
    }
    SimDuration t = e.t;
    for (std::size_t i = 0; i < m.labels.size(); ++i) {
      out.push_back({t, m.labels[i]});
      t += m.dwell[i];
    }
    out.push_back({t, e.label});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  return out;
}

HumanModelParams inject(const HumanModelParams& params, const FaultInjection& fault) {
  switch (fault.kind) {
    case FaultKind::Description:
      return params;
    case FaultKind::Human: {
      auto j = human_params_to_json(params);
      for (auto it = fault.human.begin(); it != fault.human.end(); ++it) {
        // reaction is replaced as a whole; its fields depend on the type
        if (it.key() == "reaction" || !it->is_object())
          j[it.key()] = it.value();
        else
          j[it.key()].merge_patch(it.value());
      }
      return human_params_from_json(j, fault.mode_id + ".human");
    }
    case FaultKind::ErrorRate: {
      auto p = params;
      p.fatigue = Fatigue{fault.probability, 0.0, 1.0};
      return p;
    }
    default:
      incompatible(fault, "a human model");
  }
  return params;
}

}  // namespace loopscope
