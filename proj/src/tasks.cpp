#include "seqil/tasks.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace seqil {

std::string task_kind_name(TaskKind k) {
  switch (k) {
    case TaskKind::copy: return "copy";
    case TaskKind::reverse: return "reverse";
    case TaskKind::modular_sum: return "modular-sum";
    case TaskKind::multi_reference: return "multi-reference";
  }
  throw std::logic_error("task_kind_name: unknown kind");
}

TaskKind task_kind_from_name(const std::string& name) {
  if (name == "copy") return TaskKind::copy;
  if (name == "reverse") return TaskKind::reverse;
  if (name == "modular-sum") return TaskKind::modular_sum;
  if (name == "multi-reference") return TaskKind::multi_reference;
  throw std::invalid_argument("unknown task '" + name +
                              "' (expected copy, reverse, modular-sum, or multi-reference)");
}

SyntheticTask make_task(TaskKind kind, int prompt_symbols) {
  if (prompt_symbols < 1) throw std::invalid_argument("make_task: prompt_symbols must be >= 1");
  SyntheticTask t;
  t.kind = kind;
  t.prompt_symbols = prompt_symbols;
  if (kind == TaskKind::modular_sum) {
    t.vocab = Vocabulary::with_symbols({"0", "1", "2", "3", "4", "5", "6", "7", "8", "9", "+"});
    t.prompt_symbols = 3;  // digit, plus, digit
  } else {
    t.vocab = Vocabulary::with_symbols({"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"});
  }
  return t;
}

namespace {

std::vector<int> payload_of(const std::vector<int>& prompt) {
  if (prompt.empty()) throw std::invalid_argument("task: prompt must start with bos");
  return {prompt.begin() + 1, prompt.end()};
}

std::vector<int> rot_left(std::vector<int> v) {
  if (v.size() > 1) std::rotate(v.begin(), v.begin() + 1, v.end());
  return v;
}

std::vector<int> rot_right(std::vector<int> v) {
  if (v.size() > 1) std::rotate(v.begin(), v.end() - 1, v.end());
  return v;
}

}  // namespace

std::vector<std::vector<int>> SyntheticTask::references(const std::vector<int>& prompt) const {
  const std::vector<int> payload = payload_of(prompt);
  std::vector<std::vector<int>> bodies;
  switch (kind) {
    case TaskKind::copy:
      bodies.push_back(payload);
      break;
    case TaskKind::reverse:
      bodies.emplace_back(payload.rbegin(), payload.rend());
      break;
    case TaskKind::modular_sum: {
      if (payload.size() != 3)
        throw std::invalid_argument("modular-sum: prompt payload must be digit,plus,digit");
      const int d0 = vocab.first_symbol();
      const int a = payload[0] - d0;
      const int b = payload[2] - d0;
      if (a < 0 || a > 9 || b < 0 || b > 9 || payload[1] != d0 + 10)
        throw std::invalid_argument("modular-sum: malformed prompt payload");
      bodies.push_back({d0 + (a + b) % 10});
      break;
    }
    case TaskKind::multi_reference: {
      bodies.push_back(payload);
      bodies.emplace_back(payload.rbegin(), payload.rend());
      bodies.push_back(rot_left(payload));
      bodies.push_back(rot_right(payload));
      break;
    }
  }
  std::vector<std::vector<int>> out;
  for (auto& b : bodies) {
    b.push_back(vocab.eos_id);
    if (std::find(out.begin(), out.end(), b) == out.end()) out.push_back(std::move(b));
  }
  return out;
}

bool SyntheticTask::check(const Trajectory& traj) const {
  if (!traj.terminated) return false;
  const auto refs = references(traj.prompt);
  return std::find(refs.begin(), refs.end(), traj.completion) != refs.end();
}

std::vector<int> SyntheticTask::sample_prompt(Rng& rng) const {
  std::vector<int> prompt = {vocab.bos_id};
  const int d0 = vocab.first_symbol();
  if (kind == TaskKind::modular_sum) {
    prompt.push_back(d0 + static_cast<int>(rng.uniform_int(10)));
    prompt.push_back(d0 + 10);
    prompt.push_back(d0 + static_cast<int>(rng.uniform_int(10)));
  } else {
    for (int i = 0; i < prompt_symbols; ++i)
      prompt.push_back(d0 + static_cast<int>(rng.uniform_int(vocab.symbol_count())));
  }
  return prompt;
}

Trajectory SyntheticTask::make_example(Rng& rng) const {
  Trajectory tr;
  tr.prompt = sample_prompt(rng);
  const auto refs = references(tr.prompt);
  tr.completion = refs[static_cast<size_t>(rng.uniform_int(static_cast<long>(refs.size())))];
  tr.terminated = true;
  return tr;
}

std::vector<Trajectory> gen_dataset(const SyntheticTask& task, int n, uint64_t seed) {
  if (n < 0) throw std::invalid_argument("gen_dataset: n must be >= 0");
  Rng rng(derive_seed(seed, "dataset"));
  std::vector<Trajectory> out;
  out.reserve(static_cast<size_t>(n));
  if (task.kind == TaskKind::multi_reference) {
    while (static_cast<int>(out.size()) < n) {
      std::vector<int> prompt;
      std::vector<std::vector<int>> refs;
      do {
        prompt = task.sample_prompt(rng);
        refs = task.references(prompt);
      } while (refs.size() < 2);
      const long i = rng.uniform_int(static_cast<long>(refs.size()));
      long j = rng.uniform_int(static_cast<long>(refs.size()) - 1);
      if (j >= i) ++j;
      out.push_back({prompt, refs[static_cast<size_t>(i)], true});
      if (static_cast<int>(out.size()) < n)
        out.push_back({prompt, refs[static_cast<size_t>(j)], true});
    }
  } else {
    for (int k = 0; k < n; ++k) out.push_back(task.make_example(rng));
  }
  return out;
}

std::vector<std::vector<int>> gen_prompts(const SyntheticTask& task, int n, uint64_t seed) {
  if (n < 0) throw std::invalid_argument("gen_prompts: n must be >= 0");
  Rng rng(derive_seed(seed, "prompts"));
  std::set<std::vector<int>> seen;
  std::vector<std::vector<int>> out;
  long attempts = 0;
  while (static_cast<int>(out.size()) < n) {
    std::vector<int> p = task.sample_prompt(rng);
    if (seen.insert(p).second) out.push_back(std::move(p));
    if (++attempts > 1000L * (n + 1))
      throw std::runtime_error("gen_prompts: cannot draw enough distinct prompts");
  }
  return out;
}

}  // namespace seqil
