#include "seqil/model.hpp"

#include <cmath>
#include <stdexcept>

#include "seqil/rng.hpp"

namespace seqil {

void ModelConfig::validate() const {
  if (vocab_size < 1) throw std::invalid_argument("ModelConfig: vocab_size must be >= 1");
  if (head_width < 1) throw std::invalid_argument("ModelConfig: head_width must be >= 1");
  if (max_context < 1) throw std::invalid_argument("ModelConfig: max_context must be >= 1");
  if (embed_dim < 1 || hidden_dim < 1) throw std::invalid_argument("ModelConfig: dims must be >= 1");
  if (layers < 0) throw std::invalid_argument("ModelConfig: layers must be >= 0");
  if (!(init_std >= 0.0)) throw std::invalid_argument("ModelConfig: init_std must be >= 0");
}

SequenceModel::SequenceModel(ModelConfig cfg, uint64_t seed) : cfg_(cfg), seed_(seed) {
  cfg_.validate();
  Rng rng(derive_seed(seed, "model-init"));
  auto randn = [&](std::vector<long> shape) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = cfg_.init_std * rng.normal();
    return t;
  };

  params_.emplace_back("tok_embed", randn({cfg_.vocab_size, cfg_.embed_dim}));
  params_.emplace_back("pos_embed", randn({cfg_.max_context, cfg_.embed_dim}));
  for (long l = 0; l < cfg_.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    params_.emplace_back(p + "wq", randn({cfg_.embed_dim, cfg_.embed_dim}));
    params_.emplace_back(p + "wk", randn({cfg_.embed_dim, cfg_.embed_dim}));
    params_.emplace_back(p + "wv", randn({cfg_.embed_dim, cfg_.embed_dim}));
    params_.emplace_back(p + "wo", randn({cfg_.embed_dim, cfg_.embed_dim}));
    params_.emplace_back(p + "w1", randn({cfg_.embed_dim, cfg_.hidden_dim}));
    params_.emplace_back(p + "b1", Tensor::zeros({cfg_.hidden_dim}));
    params_.emplace_back(p + "w2", randn({cfg_.hidden_dim, cfg_.embed_dim}));
    params_.emplace_back(p + "b2", Tensor::zeros({cfg_.embed_dim}));
  }
  params_.emplace_back("head_w", Tensor::zeros({cfg_.embed_dim, cfg_.head_width}));
  params_.emplace_back("head_b", Tensor::zeros({cfg_.head_width}));
}

std::vector<ad::Parameter*> SequenceModel::parameters() {
  std::vector<ad::Parameter*> out;
  out.reserve(params_.size());
  for (ad::Parameter& p : params_) out.push_back(&p);
  return out;
}

std::vector<const ad::Parameter*> SequenceModel::parameters() const {
  std::vector<const ad::Parameter*> out;
  out.reserve(params_.size());
  for (const ad::Parameter& p : params_) out.push_back(&p);
  return out;
}

ad::Parameter& SequenceModel::param(const std::string& name) {
  for (ad::Parameter& p : params_)
    if (p.name == name) return p;
  throw std::invalid_argument("SequenceModel: no parameter named '" + name + "'");
}

void SequenceModel::check_tokens(const std::vector<int>& tokens) const {
  if (tokens.empty()) throw std::invalid_argument("SequenceModel: prefix must be non-empty");
  if (static_cast<long>(tokens.size()) > cfg_.max_context)
    throw std::invalid_argument("SequenceModel: prefix length " + std::to_string(tokens.size()) +
                                " exceeds max_context " + std::to_string(cfg_.max_context));
  for (int t : tokens)
    if (t < 0 || t >= cfg_.vocab_size)
      throw std::invalid_argument("SequenceModel: token id " + std::to_string(t) +
                                  " outside vocabulary of size " + std::to_string(cfg_.vocab_size));
}

ad::Ref SequenceModel::forward(ad::Graph& g, const std::vector<int>& tokens) {
  check_tokens(tokens);
  const long len = static_cast<long>(tokens.size());
  std::vector<long> tok_ids(tokens.begin(), tokens.end());
  std::vector<long> pos_ids(static_cast<size_t>(len));
  for (long i = 0; i < len; ++i) pos_ids[static_cast<size_t>(i)] = i;

  // Parameters are consumed in construction order; keep each call in its
  // own statement so argument evaluation order cannot reorder them.
  size_t pi = 0;
  auto next_param = [&]() -> ad::Ref { return g.param(params_[pi++]); };

  ad::Ref tok_embed = next_param();
  ad::Ref pos_embed = next_param();
  ad::Ref x = g.add(g.gather_rows(tok_embed, tok_ids), g.gather_rows(pos_embed, pos_ids));

  // Causal mask: position i may attend to positions <= i.
  Tensor mask = Tensor::zeros({len, len});
  for (long i = 0; i < len; ++i)
    for (long j = i + 1; j < len; ++j) mask.at(i, j) = -1e30;
  ad::Ref mask_ref = g.constant(std::move(mask));
  const double inv_sqrt_e = 1.0 / std::sqrt(static_cast<double>(cfg_.embed_dim));

  for (long l = 0; l < cfg_.layers; ++l) {
    ad::Ref wq = next_param();
    ad::Ref wk = next_param();
    ad::Ref wv = next_param();
    ad::Ref wo = next_param();
    ad::Ref w1 = next_param();
    ad::Ref b1 = next_param();
    ad::Ref w2 = next_param();
    ad::Ref b2 = next_param();
    ad::Ref q = g.matmul(x, wq);
    ad::Ref k = g.matmul(x, wk);
    ad::Ref v = g.matmul(x, wv);
    ad::Ref scores = g.add(g.scale(g.matmul_nt(q, k), inv_sqrt_e), mask_ref);
    ad::Ref att = g.softmax_rows(scores);
    ad::Ref ctx = g.matmul(att, v);
    x = g.add(x, g.matmul(ctx, wo));
    ad::Ref h = g.relu(g.add_rowvec(g.matmul(x, w1), b1));
    x = g.add(x, g.add_rowvec(g.matmul(h, w2), b2));
  }

  ad::Ref head_w = next_param();
  ad::Ref head_b = next_param();
  return g.add_rowvec(g.matmul(x, head_w), head_b);
}

Tensor SequenceModel::forward_values(const std::vector<int>& tokens) {
  ad::Graph g;
  return g.val(forward(g, tokens));
}

}  // namespace seqil
