#include "seqil/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "seqil/serial.hpp"

namespace seqil {

void zero_grads(const std::vector<ad::Parameter*>& params) {
  for (ad::Parameter* p : params) p->zero_grad();
}

Adam::Adam(AdamConfig cfg, const std::vector<ad::Parameter*>& params) : cfg_(cfg) {
  if (!(cfg_.learning_rate > 0.0)) throw std::invalid_argument("Adam: learning_rate must be positive");
  if (cfg_.warmup_steps < 0) throw std::invalid_argument("Adam: warmup_steps must be >= 0");
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const ad::Parameter* p : params) {
    m_.push_back(Tensor::zeros(p->value.shape));
    v_.push_back(Tensor::zeros(p->value.shape));
  }
}

double Adam::effective_rate(long k) const {
  if (cfg_.warmup_steps <= 0) return cfg_.learning_rate;
  const double frac = static_cast<double>(k) / static_cast<double>(cfg_.warmup_steps);
  return cfg_.learning_rate * std::min(1.0, frac);
}

void Adam::step(const std::vector<ad::Parameter*>& params) {
  if (params.size() != m_.size())
    throw std::invalid_argument("Adam::step: parameter count changed since construction");
  for (size_t i = 0; i < params.size(); ++i) {
    const ad::Parameter& p = *params[i];
    if (!p.value.same_shape(m_[i]))
      throw std::invalid_argument("Adam::step: shape of parameter '" + p.name + "' changed");
    if (!p.grad.all_finite())
      throw std::runtime_error("Adam::step: non-finite gradient in parameter '" + p.name + "'");
  }

  const long k = step_count_ + 1;
  const double lr = effective_rate(k);
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(k));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(k));

  for (size_t i = 0; i < params.size(); ++i) {
    ad::Parameter& p = *params[i];
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    const long n = p.value.numel();
    for (long j = 0; j < n; ++j) {
      const double g = p.grad.data[j];
      m.data[j] = cfg_.beta1 * m.data[j] + (1.0 - cfg_.beta1) * g;
      v.data[j] = cfg_.beta2 * v.data[j] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m.data[j] / bc1;
      const double vhat = v.data[j] / bc2;
      p.value.data[j] -= lr * mhat / (std::sqrt(vhat) + cfg_.epsilon);
    }
    p.zero_grad();
  }
  step_count_ = k;
}

void Adam::save(std::ostream& os) const {
  io::write_u64(os, static_cast<uint64_t>(step_count_));
  io::write_u32(os, static_cast<uint32_t>(m_.size()));
  for (size_t i = 0; i < m_.size(); ++i) {
    io::write_f64_array(os, m_[i].data);
    io::write_f64_array(os, v_[i].data);
  }
}

void Adam::load(std::istream& is, const std::vector<ad::Parameter*>& params) {
  const uint64_t steps = io::read_u64(is, "optimizer step count");
  const uint32_t n = io::read_u32(is, "optimizer slot count");
  if (n != m_.size() || params.size() != m_.size())
    throw std::runtime_error("Adam::load: slot count does not match parameter count");
  std::vector<Tensor> m_new = m_, v_new = v_;
  for (uint32_t i = 0; i < n; ++i) {
    std::vector<double> mdata = io::read_f64_array(is, "optimizer first moment");
    std::vector<double> vdata = io::read_f64_array(is, "optimizer second moment");
    if (static_cast<long>(mdata.size()) != params[i]->value.numel() ||
        static_cast<long>(vdata.size()) != params[i]->value.numel())
      throw std::runtime_error("Adam::load: moment size does not match parameter '" +
                               params[i]->name + "'");
    m_new[i].data = std::move(mdata);
    v_new[i].data = std::move(vdata);
  }
  m_ = std::move(m_new);
  v_ = std::move(v_new);
  step_count_ = static_cast<long>(steps);
}

}  // namespace seqil
