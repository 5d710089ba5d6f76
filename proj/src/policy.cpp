#include "seqil/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "seqil/kernels.hpp"

namespace seqil {

namespace {

ModelConfig policy_config(ModelConfig cfg, int vocab_size) {
  cfg.vocab_size = vocab_size;
  cfg.head_width = vocab_size;
  return cfg;
}

}  // namespace

PolicyModel::PolicyModel(Vocabulary v, ModelConfig cfg, uint64_t seed)
    : vocab(std::move(v)), net(policy_config(cfg, vocab.size()), seed) {
  vocab.validate();
}

std::vector<double> PolicyModel::logits(const std::vector<int>& state) {
  const Tensor out = net.forward_values(state);
  const long last = out.rows() - 1;
  std::vector<double> row(static_cast<size_t>(out.cols()));
  for (long j = 0; j < out.cols(); ++j) row[static_cast<size_t>(j)] = out.at(last, j);
  return row;
}

double PolicyModel::state_value(const std::vector<int>& state) {
  const std::vector<double> row = logits(state);
  double lse;
  kernels::logsumexp_rows_serial(row.data(), &lse, 1, static_cast<long>(row.size()));
  return lse;
}

double PolicyModel::log_prob(const std::vector<int>& state, int action) {
  if (!vocab.valid_id(action))
    throw std::invalid_argument("log_prob: action " + std::to_string(action) +
                                " outside vocabulary");
  const std::vector<double> row = logits(state);
  double lse;
  kernels::logsumexp_rows_serial(row.data(), &lse, 1, static_cast<long>(row.size()));
  return row[static_cast<size_t>(action)] - lse;
}

namespace {

double entropy_of_row(const double* row, long n) {
  std::vector<double> lp(static_cast<size_t>(n));
  kernels::log_softmax_rows_serial(row, lp.data(), 1, n);
  double h = 0.0;
  for (long j = 0; j < n; ++j) h -= std::exp(lp[static_cast<size_t>(j)]) * lp[static_cast<size_t>(j)];
  return h;
}

}  // namespace

double PolicyModel::per_token_entropy(const std::vector<int>& state) {
  const std::vector<double> row = logits(state);
  return entropy_of_row(row.data(), static_cast<long>(row.size()));
}

DecodeMode decode_mode_from_name(const std::string& name) {
  if (name == "sample") return DecodeMode::sample;
  if (name == "greedy") return DecodeMode::greedy;
  if (name == "beam") return DecodeMode::beam;
  throw std::invalid_argument("unknown decode mode '" + name +
                              "' (expected sample, greedy, or beam)");
}

std::string decode_mode_name(DecodeMode m) {
  switch (m) {
    case DecodeMode::sample: return "sample";
    case DecodeMode::greedy: return "greedy";
    case DecodeMode::beam: return "beam";
  }
  throw std::logic_error("decode_mode_name: unknown mode");
}

void SamplerConfig::validate() const {
  if (max_len < 1) throw std::invalid_argument("SamplerConfig: max_len must be >= 1");
  if (mode == DecodeMode::sample && !(temperature > 0.0))
    throw std::invalid_argument("SamplerConfig: temperature must be positive when sampling");
  if (mode == DecodeMode::beam && beam_size < 1)
    throw std::invalid_argument("SamplerConfig: beam_size must be >= 1");
  if (mode == DecodeMode::beam && length_penalty < 0.0)
    throw std::invalid_argument("SamplerConfig: length_penalty must be >= 0");
}

Trajectory sample(PolicyModel& policy, const std::vector<int>& prompt, const SamplerConfig& cfg,
                  Rng& rng) {
  cfg.validate();
  Trajectory tr;
  tr.prompt = prompt;
  std::vector<int> cur = prompt;
  const long v = policy.vocab.size();
  while (static_cast<int>(tr.completion.size()) < cfg.max_len) {
    std::vector<double> row = policy.logits(cur);
    if (cfg.temperature != 1.0)
      for (double& x : row) x /= cfg.temperature;
    std::vector<double> probs(static_cast<size_t>(v));
    kernels::softmax_rows_serial(row.data(), probs.data(), 1, v);
    const int tok = static_cast<int>(rng.categorical(probs));
    tr.completion.push_back(tok);
    cur.push_back(tok);
    if (tok == policy.vocab.eos_id) break;
  }
  tr.terminated = true;
  return tr;
}

Trajectory greedy(PolicyModel& policy, const std::vector<int>& prompt, const SamplerConfig& cfg) {
  cfg.validate();
  Trajectory tr;
  tr.prompt = prompt;
  std::vector<int> cur = prompt;
  while (static_cast<int>(tr.completion.size()) < cfg.max_len) {
    const std::vector<double> row = policy.logits(cur);
    int best = 0;
    for (size_t j = 1; j < row.size(); ++j)
      if (row[j] > row[static_cast<size_t>(best)]) best = static_cast<int>(j);
    tr.completion.push_back(best);
    cur.push_back(best);
    if (best == policy.vocab.eos_id) break;
  }
  tr.terminated = true;
  return tr;
}

namespace {

struct Hyp {
  std::vector<int> completion;
  double score_sum = 0.0;
  bool finished = false;

  double normalized(double length_penalty) const {
    const double len = static_cast<double>(completion.size());
    return score_sum / std::pow(len, length_penalty);
  }
};

}  // namespace

Trajectory beam_search(PolicyModel& policy, const std::vector<int>& prompt,
                       const SamplerConfig& cfg) {
  cfg.validate();
  const long v = policy.vocab.size();
  std::vector<Hyp> beam = {Hyp{}};

  auto any_unfinished = [&beam] {
    return std::any_of(beam.begin(), beam.end(), [](const Hyp& h) { return !h.finished; });
  };

  while (any_unfinished()) {
    std::vector<Hyp> cands;
    for (const Hyp& h : beam) {
      if (h.finished) {
        cands.push_back(h);
        continue;
      }
      std::vector<int> cur = prompt;
      cur.insert(cur.end(), h.completion.begin(), h.completion.end());
      const std::vector<double> row = policy.logits(cur);
      std::vector<double> lp(static_cast<size_t>(v));
      kernels::log_softmax_rows_serial(row.data(), lp.data(), 1, v);
      for (long a = 0; a < v; ++a) {
        Hyp ext = h;
        ext.completion.push_back(static_cast<int>(a));
        ext.score_sum += lp[static_cast<size_t>(a)];
        ext.finished = (a == policy.vocab.eos_id) ||
                       (static_cast<int>(ext.completion.size()) >= cfg.max_len);
        cands.push_back(std::move(ext));
      }
    }
    std::sort(cands.begin(), cands.end(), [&cfg](const Hyp& a, const Hyp& b) {
      const double na = a.normalized(cfg.length_penalty);
      const double nb = b.normalized(cfg.length_penalty);
      if (na != nb) return na > nb;
      return a.completion < b.completion;
    });
    if (static_cast<int>(cands.size()) > cfg.beam_size) cands.resize(static_cast<size_t>(cfg.beam_size));
    beam = std::move(cands);
  }

  const Hyp* best = &beam.front();
  for (const Hyp& h : beam)
    if (h.normalized(cfg.length_penalty) > best->normalized(cfg.length_penalty)) best = &h;

  Trajectory tr;
  tr.prompt = prompt;
  tr.completion = best->completion;
  tr.terminated = best->finished;
  return tr;
}

Trajectory decode(PolicyModel& policy, const std::vector<int>& prompt, const SamplerConfig& cfg,
                  Rng* rng) {
  switch (cfg.mode) {
    case DecodeMode::sample:
      if (!rng) throw std::invalid_argument("decode: sampling requires an rng");
      return sample(policy, prompt, cfg, *rng);
    case DecodeMode::greedy: return greedy(policy, prompt, cfg);
    case DecodeMode::beam: return beam_search(policy, prompt, cfg);
  }
  throw std::logic_error("decode: unknown mode");
}

double mean_completion_entropy(PolicyModel& policy, const Trajectory& traj) {
  if (traj.completion.empty()) return 0.0;
  const std::vector<int> tokens = traj.full();
  const Tensor out = policy.net.forward_values(tokens);
  const long p = static_cast<long>(traj.prompt.size());
  const long t = static_cast<long>(traj.completion.size());
  double acc = 0.0;
  for (long i = 0; i < t; ++i) acc += entropy_of_row(&out.data[static_cast<size_t>((p - 1 + i) * out.cols())], out.cols());
  return acc / static_cast<double>(t);
}

}  // namespace seqil
