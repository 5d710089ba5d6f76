#include "seqil/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <variant>

#include "seqil/tasks.hpp"

namespace seqil {

namespace {

using StrField = std::string ExperimentConfig::*;
using LongField = long ExperimentConfig::*;
using DoubleField = double ExperimentConfig::*;
using BoolField = bool ExperimentConfig::*;
using U64Field = uint64_t ExperimentConfig::*;

struct FieldDef {
  const char* name;
  std::variant<StrField, LongField, DoubleField, BoolField, U64Field> ptr;
};

const std::vector<FieldDef>& fields() {
  static const std::vector<FieldDef> defs = {
      {"objective", &ExperimentConfig::objective},
      {"task", &ExperimentConfig::task},
      {"prompt_symbols", &ExperimentConfig::prompt_symbols},
      {"seed", &ExperimentConfig::seed},
      {"train_examples", &ExperimentConfig::train_examples},
      {"subset_percent", &ExperimentConfig::subset_percent},
      {"train_data", &ExperimentConfig::train_data},
      {"val_prompts", &ExperimentConfig::val_prompts},
      {"total_steps", &ExperimentConfig::total_steps},
      {"warmup_mle_steps", &ExperimentConfig::warmup_mle_steps},
      {"batch_size", &ExperimentConfig::batch_size},
      {"learning_rate", &ExperimentConfig::learning_rate},
      {"warmup_steps", &ExperimentConfig::warmup_steps},
      {"lambda", &ExperimentConfig::lambda},
      {"gamma", &ExperimentConfig::gamma},
      {"alpha", &ExperimentConfig::alpha},
      {"buffer_capacity", &ExperimentConfig::buffer_capacity},
      {"buffer_staleness", &ExperimentConfig::buffer_staleness},
      {"rollouts_per_step", &ExperimentConfig::rollouts_per_step},
      {"kl_weight_final", &ExperimentConfig::kl_weight_final},
      {"kl_anneal_steps", &ExperimentConfig::kl_anneal_steps},
      {"mle_weight", &ExperimentConfig::mle_weight},
      {"disc_learning_rate", &ExperimentConfig::disc_learning_rate},
      {"embed_dim", &ExperimentConfig::embed_dim},
      {"hidden_dim", &ExperimentConfig::hidden_dim},
      {"layers", &ExperimentConfig::layers},
      {"max_context", &ExperimentConfig::max_context},
      {"init_std", &ExperimentConfig::init_std},
      {"max_completion", &ExperimentConfig::max_completion},
      {"eval_every", &ExperimentConfig::eval_every},
      {"eval_mode", &ExperimentConfig::eval_mode},
      {"eval_temperature", &ExperimentConfig::eval_temperature},
      {"eval_samples_per_prompt", &ExperimentConfig::eval_samples_per_prompt},
      {"beam_size", &ExperimentConfig::beam_size},
      {"length_penalty", &ExperimentConfig::length_penalty},
      {"resume", &ExperimentConfig::resume},
  };
  return defs;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

long parse_long(const std::string& key, const std::string& v) {
  size_t used = 0;
  long out = 0;
  try {
    out = std::stol(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty())
    throw std::invalid_argument("config: key '" + key + "' expects an integer, got '" + v + "'");
  return out;
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  size_t used = 0;
  unsigned long long out = 0;
  try {
    out = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty())
    throw std::invalid_argument("config: key '" + key + "' expects an unsigned integer, got '" + v +
                                "'");
  return static_cast<uint64_t>(out);
}

double parse_double(const std::string& key, const std::string& v) {
  size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty())
    throw std::invalid_argument("config: key '" + key + "' expects a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: key '" + key + "' expects true/false, got '" + v + "'");
}

std::string render_double(double d) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", d);
  return buf;
}

}  // namespace

std::vector<std::string> ExperimentConfig::valid_keys() {
  std::vector<std::string> keys;
  for (const FieldDef& f : fields()) keys.push_back(f.name);
  return keys;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  for (const FieldDef& f : fields()) {
    if (key != f.name) continue;
    std::visit(
        [&](auto ptr) {
          using T = std::remove_cvref_t<decltype(this->*ptr)>;
          if constexpr (std::is_same_v<T, std::string>)
            this->*ptr = value;
          else if constexpr (std::is_same_v<T, long>)
            this->*ptr = parse_long(key, value);
          else if constexpr (std::is_same_v<T, double>)
            this->*ptr = parse_double(key, value);
          else if constexpr (std::is_same_v<T, bool>)
            this->*ptr = parse_bool(key, value);
          else
            this->*ptr = parse_u64(key, value);
        },
        f.ptr);
    return;
  }
  std::ostringstream os;
  os << "config: unknown key '" << key << "'. Valid keys:";
  for (const FieldDef& f : fields()) os << ' ' << f.name;
  throw std::invalid_argument(os.str());
}

std::map<std::string, std::string> ExperimentConfig::to_map() const {
  std::map<std::string, std::string> kv;
  for (const FieldDef& f : fields()) {
    std::visit(
        [&](auto ptr) {
          using T = std::remove_cvref_t<decltype(this->*ptr)>;
          if constexpr (std::is_same_v<T, std::string>)
            kv[f.name] = this->*ptr;
          else if constexpr (std::is_same_v<T, bool>)
            kv[f.name] = (this->*ptr) ? "true" : "false";
          else if constexpr (std::is_same_v<T, double>)
            kv[f.name] = render_double(this->*ptr);
          else
            kv[f.name] = std::to_string(this->*ptr);
        },
        f.ptr);
  }
  return kv;
}

ExperimentConfig ExperimentConfig::from_map(const std::map<std::string, std::string>& kv) {
  ExperimentConfig cfg;
  for (const auto& [k, v] : kv) cfg.set(k, v);
  return cfg;
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream os;
  for (const auto& [k, v] : to_map()) os << k << " = " << v << '\n';
  return os.str();
}

uint64_t ExperimentConfig::content_hash() const {
  // to_map() is already key-sorted, so the hash ignores source order.
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& [k, v] : to_map()) {
    for (char c : k + "=" + v) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
    h ^= '\n';
    h *= 0x100000001b3ull;
  }
  return h;
}

std::pair<std::string, std::string> split_assignment(const std::string& text) {
  const size_t eq = text.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("config: expected key=value, got '" + text + "'");
  std::string key = trim(text.substr(0, eq));
  if (key.empty()) throw std::invalid_argument("config: empty key in '" + text + "'");
  return {std::move(key), trim(text.substr(eq + 1))};
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path);
  ExperimentConfig cfg;
  std::string line;
  long line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = trim(line.substr(0, line.find('#')));
    if (t.empty()) continue;
    try {
      const auto [k, v] = split_assignment(t);
      cfg.set(k, v);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

ModelConfig ExperimentConfig::model() const {
  ModelConfig m;
  m.max_context = max_context;
  m.embed_dim = embed_dim;
  m.hidden_dim = hidden_dim;
  m.layers = layers;
  m.init_std = init_std;
  // vocab_size and head_width are filled in by the model owner.
  m.vocab_size = 1;
  m.head_width = 1;
  return m;
}

SamplerConfig ExperimentConfig::eval_sampler() const {
  SamplerConfig s;
  s.mode = decode_mode_from_name(eval_mode);
  s.temperature = eval_temperature;
  s.max_len = static_cast<int>(max_completion);
  s.beam_size = static_cast<int>(beam_size);
  s.length_penalty = length_penalty;
  return s;
}

void ExperimentConfig::validate() const {
  static const std::vector<std::string> objectives = {"mle", "mle-ent", "iql-offline", "iql-online",
                                                      "gail"};
  if (std::find(objectives.begin(), objectives.end(), objective) == objectives.end())
    throw std::invalid_argument("config: objective must be one of mle, mle-ent, iql-offline, "
                                "iql-online, gail; got '" +
                                objective + "'");
  (void)task_kind_from_name(task);
  (void)decode_mode_from_name(eval_mode);
  if (prompt_symbols < 1) throw std::invalid_argument("config: prompt_symbols must be >= 1");
  if (train_examples < 1) throw std::invalid_argument("config: train_examples must be >= 1");
  if (subset_percent < 1 || subset_percent > 100)
    throw std::invalid_argument("config: subset_percent must be in [1,100]");
  if (val_prompts < 1) throw std::invalid_argument("config: val_prompts must be >= 1");
  if (total_steps < 1) throw std::invalid_argument("config: total_steps must be >= 1");
  if (warmup_mle_steps < 0 || warmup_mle_steps > total_steps)
    throw std::invalid_argument("config: warmup_mle_steps must be in [0, total_steps]");
  if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("config: learning_rate must be positive");
  if (!(disc_learning_rate > 0.0))
    throw std::invalid_argument("config: disc_learning_rate must be positive");
  if (warmup_steps < 0) throw std::invalid_argument("config: warmup_steps must be >= 0");
  iql().validate();
  if (buffer_capacity < 1) throw std::invalid_argument("config: buffer_capacity must be >= 1");
  if (buffer_staleness < 0) throw std::invalid_argument("config: buffer_staleness must be >= 0");
  if (rollouts_per_step < 1) throw std::invalid_argument("config: rollouts_per_step must be >= 1");
  if (!(kl_weight_final >= 0.0))
    throw std::invalid_argument("config: kl_weight_final must be >= 0");
  if (kl_anneal_steps < 1) throw std::invalid_argument("config: kl_anneal_steps must be >= 1");
  if (!(mle_weight >= 0.0)) throw std::invalid_argument("config: mle_weight must be >= 0");
  if (max_completion < 1) throw std::invalid_argument("config: max_completion must be >= 1");
  if (eval_every < 1) throw std::invalid_argument("config: eval_every must be >= 1");
  if (eval_samples_per_prompt < 1)
    throw std::invalid_argument("config: eval_samples_per_prompt must be >= 1");
  ModelConfig m = model();
  m.validate();
  eval_sampler().validate();
}

}  // namespace seqil
