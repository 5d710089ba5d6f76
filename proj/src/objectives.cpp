#include "seqil/objectives.hpp"

#include <cmath>
#include <stdexcept>

#include "seqil/kernels.hpp"

namespace seqil {

void IqlConfig::validate() const {
  if (!(lambda >= 0.0)) throw std::invalid_argument("IqlConfig: lambda must be >= 0");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("IqlConfig: gamma must be in [0,1]");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("IqlConfig: alpha must be in [0,1)");
}

namespace {

ad::Ref entropy_from_logits(ad::Graph& g, ad::Ref rows) {
  ad::Ref lp = g.log_softmax_rows(rows);
  return g.neg(g.rowsum(g.mul(g.exp_(lp), lp)));
}

}  // namespace

StepBatch seq_step_batch(ad::Graph& g, PolicyModel& model, std::span<const Trajectory> batch,
                         bool want_entropy) {
  if (batch.empty()) throw std::invalid_argument("loss: empty batch");
  std::vector<ad::Ref> qs, vs, vns, ents;
  long total = 0;
  for (const Trajectory& traj : batch) {
    if (traj.completion.empty())
      throw std::invalid_argument("loss: trajectory with empty completion");
    const std::vector<int> tokens = traj.full();
    const long p = static_cast<long>(traj.prompt.size());
    const long t = static_cast<long>(traj.completion.size());
    const long len = p + t;
    ad::Ref out = model.net.forward(g, tokens);

    std::vector<long> state_ids(static_cast<size_t>(t));
    std::vector<long> all_ids(static_cast<size_t>(t) + 1);
    for (long i = 0; i < t; ++i) state_ids[static_cast<size_t>(i)] = p - 1 + i;
    for (long i = 0; i <= t; ++i) all_ids[static_cast<size_t>(i)] = p - 1 + i;
    (void)len;

    ad::Ref action_rows = g.gather_rows(out, state_ids);
    std::vector<long> actions(traj.completion.begin(), traj.completion.end());
    ad::Ref q = g.pick(action_rows, actions);

    ad::Ref lse_all = g.logsumexp_rows(g.gather_rows(out, all_ids));
    ad::Ref v = g.slice(lse_all, 0, t);
    ad::Ref vn = g.slice(lse_all, 1, t);
    Tensor mask = Tensor::full({t}, 1.0);
    if (traj.terminated) mask.at(t - 1) = 0.0;
    vn = g.mul(vn, g.constant(std::move(mask)));

    qs.push_back(q);
    vs.push_back(v);
    vns.push_back(vn);
    if (want_entropy) ents.push_back(entropy_from_logits(g, action_rows));
    total += t;
  }
  StepBatch sb;
  sb.q = g.concat(qs);
  sb.v = g.concat(vs);
  sb.v_next = g.concat(vns);
  if (want_entropy) sb.entropies = g.concat(ents);
  sb.n = total;
  return sb;
}

StepBatch tab_step_batch(ad::Graph& g, ad::Parameter& logits_table,
                         std::span<const ToyEpisode> batch, bool want_entropy) {
  if (batch.empty()) throw std::invalid_argument("loss: empty batch");
  if (logits_table.value.ndim() != 2)
    throw std::invalid_argument("tab_step_batch: logits table must be [n_states, n_actions]");
  std::vector<long> states, actions, nexts;
  std::vector<double> mask;
  for (const ToyEpisode& ep : batch) {
    if (ep.steps.empty()) throw std::invalid_argument("loss: episode with no steps");
    for (const ToyTransition& tr : ep.steps) {
      states.push_back(tr.state);
      actions.push_back(tr.action);
      nexts.push_back(tr.next_state);
      mask.push_back(tr.terminal ? 0.0 : 1.0);
    }
  }
  ad::Ref table = g.param(logits_table);
  ad::Ref rows = g.gather_rows(table, states);
  StepBatch sb;
  sb.q = g.pick(rows, actions);
  sb.v = g.logsumexp_rows(rows);
  sb.v_next = g.mul(g.logsumexp_rows(g.gather_rows(table, nexts)), g.constant(Tensor::vec(mask)));
  if (want_entropy) sb.entropies = entropy_from_logits(g, rows);
  sb.n = static_cast<long>(states.size());
  return sb;
}

BuiltLoss combine_mle(ad::Graph& g, const StepBatch& expert) {
  BuiltLoss b;
  b.node = g.neg(g.mean(g.sub(expert.q, expert.v)));
  b.out.mle_term = g.val(b.node).item();
  b.out.total = b.out.mle_term;
  b.out.token_count = expert.n;
  return b;
}

BuiltLoss combine_entropy_mle(ad::Graph& g, const StepBatch& expert, double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("entropy_regularized_mle_loss: lambda must be >= 0");
  if (expert.entropies < 0)
    throw std::logic_error("combine_entropy_mle: StepBatch built without entropies");
  ad::Ref mle = g.neg(g.mean(g.sub(expert.q, expert.v)));
  ad::Ref ent = g.scale(g.mean(expert.entropies), lambda);
  BuiltLoss b;
  b.node = g.sub(mle, ent);
  b.out.mle_term = g.val(mle).item();
  b.out.entropy_term = g.val(ent).item();
  b.out.total = g.val(b.node).item();
  b.out.token_count = expert.n;
  return b;
}

BuiltLoss combine_iql_offline(ad::Graph& g, const StepBatch& expert, const IqlConfig& cfg) {
  cfg.validate();
  ad::Ref delta = g.sub(expert.q, g.scale(expert.v_next, cfg.gamma));
  ad::Ref td = g.scale(g.mean(g.square(delta)), cfg.lambda);
  ad::Ref mle = g.neg(g.mean(g.sub(expert.q, expert.v)));
  BuiltLoss b;
  b.node = g.add(td, mle);
  b.out.td_term = g.val(td).item();
  b.out.mle_term = g.val(mle).item();
  b.out.total = g.val(b.node).item();
  b.out.token_count = expert.n;
  return b;
}

BuiltLoss combine_iql_online(ad::Graph& g, const StepBatch& expert, const StepBatch& online,
                             const IqlConfig& cfg) {
  cfg.validate();
  if (!(cfg.alpha > 0.0))
    throw std::invalid_argument("iqlearn_online_loss: alpha must be in (0,1); use the offline loss at alpha=0");
  const double inv = 1.0 / (1.0 - cfg.alpha);
  auto mix_delta = [&](const StepBatch& sb) {
    ad::Ref adv = g.scale(g.sub(sb.q, sb.v), inv);
    return g.sub(g.add(sb.v, adv), g.scale(sb.v_next, cfg.gamma));
  };
  ad::Ref de = mix_delta(expert);
  ad::Ref dn = mix_delta(online);
  ad::Ref td_mix = g.add(g.scale(g.mean(g.square(de)), 1.0 - cfg.alpha),
                         g.scale(g.mean(g.square(dn)), cfg.alpha));
  ad::Ref td = g.scale(td_mix, cfg.lambda);
  ad::Ref mle = g.neg(g.mean(g.sub(expert.q, expert.v)));
  BuiltLoss b;
  b.node = g.add(td, mle);
  b.out.td_term = g.val(td).item();
  b.out.mle_term = g.val(mle).item();
  b.out.total = g.val(b.node).item();
  b.out.token_count = expert.n + online.n;
  return b;
}

LossOutput mle_loss(PolicyModel& model, std::span<const Trajectory> batch) {
  ad::Graph g;
  return combine_mle(g, seq_step_batch(g, model, batch)).out;
}

LossOutput entropy_regularized_mle_loss(PolicyModel& model, std::span<const Trajectory> batch,
                                        double lambda) {
  ad::Graph g;
  return combine_entropy_mle(g, seq_step_batch(g, model, batch, true), lambda).out;
}

LossOutput iqlearn_offline_loss(PolicyModel& model, std::span<const Trajectory> batch,
                                const IqlConfig& cfg) {
  ad::Graph g;
  return combine_iql_offline(g, seq_step_batch(g, model, batch), cfg).out;
}

LossOutput iqlearn_online_loss(PolicyModel& model, std::span<const Trajectory> expert_batch,
                               std::span<const Trajectory> online_batch, const IqlConfig& cfg) {
  if (online_batch.empty())
    throw std::invalid_argument("iqlearn_online_loss: online batch is empty; roll out first");
  ad::Graph g;
  StepBatch e = seq_step_batch(g, model, expert_batch);
  StepBatch o = seq_step_batch(g, model, online_batch);
  return combine_iql_online(g, e, o, cfg).out;
}

RewardTrace extract_rewards(PolicyModel& model, const Trajectory& traj, const IqlConfig& cfg) {
  cfg.validate();
  RewardTrace rt;
  rt.trajectory = traj;
  if (traj.completion.empty()) return rt;
  const std::vector<int> tokens = traj.full();
  const Tensor out = model.logits_matrix(tokens);
  const long p = static_cast<long>(traj.prompt.size());
  const long t = static_cast<long>(traj.completion.size());
  const long cols = out.cols();
  rt.per_step.reserve(static_cast<size_t>(t));
  for (long i = 0; i < t; ++i) {
    const double q = out.at(p - 1 + i, traj.completion[static_cast<size_t>(i)]);
    double vn = 0.0;
    const bool terminal = (i == t - 1) && traj.terminated;
    if (!terminal)
      kernels::logsumexp_rows_serial(&out.data[static_cast<size_t>((p + i) * cols)], &vn, 1, cols);
    const double r = cfg.lambda * (q - cfg.gamma * vn);
    rt.per_step.push_back(r);
    rt.total_return += r;
  }
  return rt;
}

RewardTrace extract_rewards_table(const Tensor& logits_table, const ToyEpisode& episode,
                                  const IqlConfig& cfg) {
  cfg.validate();
  if (logits_table.ndim() != 2)
    throw std::invalid_argument("extract_rewards_table: logits table must be 2-d");
  RewardTrace rt;
  const long cols = logits_table.cols();
  for (const ToyTransition& tr : episode.steps) {
    const double q = logits_table.at(tr.state, tr.action);
    double vn = 0.0;
    if (!tr.terminal)
      kernels::logsumexp_rows_serial(&logits_table.data[static_cast<size_t>(tr.next_state * cols)],
                                     &vn, 1, cols);
    const double r = cfg.lambda * (q - cfg.gamma * vn);
    rt.per_step.push_back(r);
    rt.total_return += r;
  }
  return rt;
}

std::vector<double> discriminator_scores(SequenceModel& disc, const Trajectory& traj) {
  if (disc.config().head_width != 1)
    throw std::invalid_argument("discriminator_scores: discriminator must have a scalar head");
  if (traj.completion.empty()) return {};
  const Tensor out = disc.forward_values(traj.full());
  const long p = static_cast<long>(traj.prompt.size());
  const long t = static_cast<long>(traj.completion.size());
  std::vector<double> scores(static_cast<size_t>(t));
  for (long i = 0; i < t; ++i) scores[static_cast<size_t>(i)] = out.at(p + i, 0);
  return scores;
}

double gail_reward(double score) {
  return score > 0.0 ? score + std::log1p(std::exp(-score)) : std::log1p(std::exp(score));
}

namespace {

// D values for each trajectory's scored states, as one concatenated
// graph vector.
ad::Ref disc_score_nodes(ad::Graph& g, SequenceModel& disc, std::span<const Trajectory> batch,
                         long& count) {
  std::vector<ad::Ref> parts;
  count = 0;
  for (const Trajectory& traj : batch) {
    if (traj.completion.empty()) continue;
    const long p = static_cast<long>(traj.prompt.size());
    const long t = static_cast<long>(traj.completion.size());
    const long len = p + t;
    ad::Ref out = disc.forward(g, traj.full());
    parts.push_back(g.slice(g.reshape(out, {len}), p, t));
    count += t;
  }
  if (parts.empty())
    throw std::invalid_argument("gail_discriminator_loss: batch has no scored states");
  return g.concat(parts);
}

}  // namespace

BuiltLoss build_gail_discriminator_loss(ad::Graph& g, SequenceModel& disc,
                                        std::span<const Trajectory> expert,
                                        std::span<const Trajectory> generated) {
  if (expert.empty() || generated.empty())
    throw std::invalid_argument("gail_discriminator_loss: both batches must be non-empty");
  long ne = 0, ng = 0;
  ad::Ref de = disc_score_nodes(g, disc, expert, ne);
  ad::Ref dg = disc_score_nodes(g, disc, generated, ng);
  ad::Ref le = g.sum(g.softplus(g.neg(de)));  // -log sigmoid(D), label 1
  ad::Ref lg = g.sum(g.softplus(dg));         // -log(1 - sigmoid(D)), label 0
  BuiltLoss b;
  b.node = g.scale(g.add(le, lg), 1.0 / static_cast<double>(ne + ng));
  b.out.total = g.val(b.node).item();
  b.out.token_count = ne + ng;
  return b;
}

double gail_discriminator_loss(SequenceModel& disc, std::span<const Trajectory> expert,
                               std::span<const Trajectory> generated) {
  ad::Graph g;
  return build_gail_discriminator_loss(g, disc, expert, generated).out.total;
}

double gail_discriminator_accuracy(SequenceModel& disc, std::span<const Trajectory> expert,
                                   std::span<const Trajectory> generated) {
  long correct = 0, total = 0;
  for (const Trajectory& tr : expert)
    for (double d : discriminator_scores(disc, tr)) {
      correct += d > 0.0 ? 1 : 0;
      ++total;
    }
  for (const Trajectory& tr : generated)
    for (double d : discriminator_scores(disc, tr)) {
      correct += d < 0.0 ? 1 : 0;
      ++total;
    }
  if (total == 0) throw std::invalid_argument("gail_discriminator_accuracy: no scored states");
  return static_cast<double>(correct) / static_cast<double>(total);
}

GailRollout make_gail_rollout(SequenceModel& disc, Trajectory traj) {
  GailRollout ro;
  ro.rewards.reserve(traj.completion.size());
  for (double d : discriminator_scores(disc, traj)) ro.rewards.push_back(gail_reward(d));
  ro.traj = std::move(traj);
  return ro;
}

std::vector<double> discounted_returns(const GailRollout& rollout, double gamma) {
  if (rollout.rewards.size() != rollout.traj.completion.size())
    throw std::invalid_argument("gail: rollout rewards do not match its completion length");
  std::vector<double> returns(rollout.rewards.size());
  double acc = 0.0;
  for (long i = static_cast<long>(rollout.rewards.size()) - 1; i >= 0; --i) {
    acc = rollout.rewards[static_cast<size_t>(i)] + gamma * acc;
    returns[static_cast<size_t>(i)] = acc;
  }
  return returns;
}

std::vector<double> gail_advantages(SequenceModel& value_net, std::span<const GailRollout> rollouts,
                                    double gamma) {
  std::vector<double> adv;
  for (const GailRollout& ro : rollouts) {
    const std::vector<double> returns = discounted_returns(ro, gamma);
    if (returns.empty()) continue;
    const Tensor vout = value_net.forward_values(ro.traj.full());
    const long p = static_cast<long>(ro.traj.prompt.size());
    for (size_t i = 0; i < returns.size(); ++i)
      adv.push_back(returns[i] - vout.at(p - 1 + static_cast<long>(i), 0));
  }
  if (adv.empty()) return adv;
  double mean = 0.0;
  for (double a : adv) mean += a;
  mean /= static_cast<double>(adv.size());
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  var /= static_cast<double>(adv.size());
  const double sd = std::sqrt(var);
  for (double& a : adv) a = sd > 1e-12 ? (a - mean) / sd : (a - mean);
  return adv;
}

BuiltLoss build_gail_policy_loss(ad::Graph& g, PolicyModel& model, SequenceModel& value_net,
                                 PolicyModel& initial_model, std::span<const GailRollout> rollouts,
                                 std::span<const double> advantages,
                                 std::span<const Trajectory> expert_batch, double kl_weight,
                                 double mle_weight, double gamma) {
  if (rollouts.empty()) throw std::invalid_argument("gail_policy_loss: no rollouts");
  if (value_net.config().head_width != 1)
    throw std::invalid_argument("gail_policy_loss: value net must have a scalar head");

  std::vector<ad::Ref> logp_parts, vpred_parts, kl_parts;
  std::vector<double> returns_all;
  long total_tokens = 0;
  for (const GailRollout& ro : rollouts) {
    if (ro.traj.completion.empty()) throw std::invalid_argument("gail_policy_loss: empty rollout");
    const std::vector<int> tokens = ro.traj.full();
    const long p = static_cast<long>(ro.traj.prompt.size());
    const long t = static_cast<long>(ro.traj.completion.size());
    const long len = p + t;
    const std::vector<double> returns = discounted_returns(ro, gamma);
    returns_all.insert(returns_all.end(), returns.begin(), returns.end());

    std::vector<long> state_ids(static_cast<size_t>(t));
    for (long i = 0; i < t; ++i) state_ids[static_cast<size_t>(i)] = p - 1 + i;
    std::vector<long> actions(ro.traj.completion.begin(), ro.traj.completion.end());

    ad::Ref out = model.net.forward(g, tokens);
    ad::Ref action_rows = g.gather_rows(out, state_ids);
    ad::Ref logp = g.sub(g.pick(action_rows, actions), g.logsumexp_rows(action_rows));
    logp_parts.push_back(logp);

    ad::Ref vout = value_net.forward(g, tokens);
    vpred_parts.push_back(g.slice(g.reshape(vout, {len}), p - 1, t));

    // KL against the frozen snapshot; its logits enter as constants.
    const Tensor init_out = initial_model.net.forward_values(tokens);
    Tensor init_rows = Tensor::zeros({t, init_out.cols()});
    for (long i = 0; i < t; ++i)
      for (long j = 0; j < init_out.cols(); ++j) init_rows.at(i, j) = init_out.at(p - 1 + i, j);
    ad::Ref lp = g.log_softmax_rows(action_rows);
    ad::Ref lp0 = g.log_softmax_rows(g.constant(std::move(init_rows)));
    kl_parts.push_back(g.rowsum(g.mul(g.exp_(lp), g.sub(lp, lp0))));

    total_tokens += t;
  }
  if (static_cast<long>(advantages.size()) != total_tokens)
    throw std::invalid_argument("gail_policy_loss: advantage count does not match rollout tokens");

  ad::Ref logp_all = g.concat(logp_parts);
  ad::Ref vpred_all = g.concat(vpred_parts);
  ad::Ref kl_all = g.concat(kl_parts);
  ad::Ref adv = g.constant(Tensor::vec({advantages.begin(), advantages.end()}));
  ad::Ref ret = g.constant(Tensor::vec(std::move(returns_all)));

  ad::Ref pg = g.neg(g.mean(g.mul(logp_all, adv)));
  ad::Ref value_term = g.mean(g.square(g.sub(vpred_all, ret)));
  ad::Ref kl_term = g.scale(g.mean(kl_all), kl_weight);

  BuiltLoss b;
  b.node = g.add(g.add(pg, value_term), kl_term);
  b.out.pg_term = g.val(pg).item();
  b.out.value_term = g.val(value_term).item();
  b.out.kl_term = g.val(kl_term).item();
  if (mle_weight != 0.0) {
    if (expert_batch.empty())
      throw std::invalid_argument("gail_policy_loss: mle_weight > 0 requires an expert batch");
    StepBatch eb = seq_step_batch(g, model, expert_batch);
    ad::Ref mle = g.scale(g.neg(g.mean(g.sub(eb.q, eb.v))), mle_weight);
    b.node = g.add(b.node, mle);
    b.out.mle_term = g.val(mle).item();
  }
  b.out.total = g.val(b.node).item();
  b.out.token_count = total_tokens;
  return b;
}

LossOutput gail_policy_loss(std::span<const GailRollout> rollouts, SequenceModel& value_net,
                            double kl_weight, double mle_weight, PolicyModel& initial_model,
                            PolicyModel& model, std::span<const Trajectory> expert_batch,
                            double gamma) {
  ad::Graph g;
  const std::vector<double> adv = gail_advantages(value_net, rollouts, gamma);
  return build_gail_policy_loss(g, model, value_net, initial_model, rollouts, adv, expert_batch,
                                kl_weight, mle_weight, gamma)
      .out;
}

}  // namespace seqil
