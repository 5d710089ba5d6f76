#include "seqil/checkpoint.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "seqil/serial.hpp"

namespace seqil {

namespace {

constexpr char kMagic[8] = {'S', 'E', 'Q', 'I', 'L', 'C', 'K', 'P'};
constexpr uint32_t kVersion = 1;

void write_header(std::ostream& os, const ModelConfig& cfg, const CheckpointMeta& meta) {
  io::write_bytes(os, kMagic, 8);
  io::write_u32(os, kVersion);
  io::write_u64(os, static_cast<uint64_t>(cfg.vocab_size));
  io::write_u64(os, static_cast<uint64_t>(cfg.head_width));
  io::write_u64(os, static_cast<uint64_t>(cfg.max_context));
  io::write_u64(os, static_cast<uint64_t>(cfg.embed_dim));
  io::write_u64(os, static_cast<uint64_t>(cfg.hidden_dim));
  io::write_u64(os, static_cast<uint64_t>(cfg.layers));
  io::write_f64(os, cfg.init_std);
  io::write_u64(os, meta.step);
  io::write_u64(os, meta.seed);
}

struct Header {
  ModelConfig cfg;
  CheckpointMeta meta;
};

Header read_header(std::istream& is, const std::string& path) {
  char magic[8];
  io::read_bytes(is, magic, 8, "checkpoint magic");
  for (int i = 0; i < 8; ++i)
    if (magic[i] != kMagic[i])
      throw std::runtime_error(path + ": not a checkpoint file (bad magic)");
  const uint32_t version = io::read_u32(is, "checkpoint version");
  if (version != kVersion)
    throw std::runtime_error(path + ": unsupported checkpoint version " + std::to_string(version) +
                             " (expected " + std::to_string(kVersion) + ")");
  Header h;
  h.cfg.vocab_size = static_cast<long>(io::read_u64(is, "vocab size"));
  h.cfg.head_width = static_cast<long>(io::read_u64(is, "head width"));
  h.cfg.max_context = static_cast<long>(io::read_u64(is, "max context"));
  h.cfg.embed_dim = static_cast<long>(io::read_u64(is, "embed dim"));
  h.cfg.hidden_dim = static_cast<long>(io::read_u64(is, "hidden dim"));
  h.cfg.layers = static_cast<long>(io::read_u64(is, "layer count"));
  h.cfg.init_std = io::read_f64(is, "init std");
  h.meta.step = io::read_u64(is, "step");
  h.meta.seed = io::read_u64(is, "seed");
  return h;
}

}  // namespace

void save_checkpoint(const std::string& path, const SequenceModel& model, CheckpointMeta meta,
                     const Adam* optimizer) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("save_checkpoint: cannot open " + tmp);
    write_header(os, model.config(), meta);
    const auto params = model.parameters();
    io::write_u32(os, static_cast<uint32_t>(params.size()));
    for (const ad::Parameter* p : params) {
      io::write_string(os, p->name);
      io::write_u32(os, static_cast<uint32_t>(p->value.shape.size()));
      for (long d : p->value.shape) io::write_u64(os, static_cast<uint64_t>(d));
      io::write_f64_array(os, p->value.data);
    }
    os.put(optimizer ? 1 : 0);
    if (optimizer) optimizer->save(os);
    if (!os) throw std::runtime_error("save_checkpoint: write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw std::runtime_error("save_checkpoint: cannot rename " + tmp + " to " + path + ": " +
                             ec.message());
  }
}

LoadedCheckpoint peek_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("peek_checkpoint: cannot open " + path);
  const Header h = read_header(is, path);
  LoadedCheckpoint out;
  out.config = h.cfg;
  out.meta = h.meta;
  // Skip parameter payload to learn whether optimizer state follows.
  const uint32_t nparams = io::read_u32(is, "parameter count");
  for (uint32_t i = 0; i < nparams; ++i) {
    (void)io::read_string(is, "parameter name");
    const uint32_t ndim = io::read_u32(is, "parameter rank");
    long numel = 1;
    for (uint32_t d = 0; d < ndim; ++d) numel *= static_cast<long>(io::read_u64(is, "parameter dim"));
    const uint64_t n = io::read_u64(is, "parameter size");
    if (static_cast<long>(n) != numel)
      throw std::runtime_error(path + ": parameter payload does not match its shape");
    is.seekg(static_cast<std::streamoff>(n * 8), std::ios::cur);
    if (!is) throw std::runtime_error(path + ": truncated parameter payload");
  }
  char flag = 0;
  is.read(&flag, 1);
  out.has_optimizer = (is.gcount() == 1 && flag == 1);
  return out;
}

CheckpointMeta load_checkpoint(const std::string& path, SequenceModel& model, Adam* optimizer) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
  const Header h = read_header(is, path);

  const ModelConfig& cfg = model.config();
  auto mismatch = [&](const char* what, long expect, long got) {
    std::ostringstream os;
    os << path << ": checkpoint " << what << " " << got << " does not match model " << expect;
    throw std::runtime_error(os.str());
  };
  if (h.cfg.vocab_size != cfg.vocab_size) mismatch("vocab size", cfg.vocab_size, h.cfg.vocab_size);
  if (h.cfg.head_width != cfg.head_width) mismatch("head width", cfg.head_width, h.cfg.head_width);
  if (h.cfg.max_context != cfg.max_context) mismatch("max context", cfg.max_context, h.cfg.max_context);
  if (h.cfg.embed_dim != cfg.embed_dim) mismatch("embed dim", cfg.embed_dim, h.cfg.embed_dim);
  if (h.cfg.hidden_dim != cfg.hidden_dim) mismatch("hidden dim", cfg.hidden_dim, h.cfg.hidden_dim);
  if (h.cfg.layers != cfg.layers) mismatch("layer count", cfg.layers, h.cfg.layers);

  const uint32_t nparams = io::read_u32(is, "parameter count");
  auto params = model.parameters();
  if (nparams != params.size())
    throw std::runtime_error(path + ": checkpoint has " + std::to_string(nparams) +
                             " parameters, model has " + std::to_string(params.size()));

  // Parse everything before mutating the model.
  std::vector<std::vector<double>> values(params.size());
  for (uint32_t i = 0; i < nparams; ++i) {
    const std::string name = io::read_string(is, "parameter name");
    if (name != params[i]->name)
      throw std::runtime_error(path + ": parameter " + std::to_string(i) + " is '" + name +
                               "', expected '" + params[i]->name + "'");
    const uint32_t ndim = io::read_u32(is, "parameter rank");
    std::vector<long> shape(ndim);
    for (uint32_t d = 0; d < ndim; ++d) shape[d] = static_cast<long>(io::read_u64(is, "parameter dim"));
    if (shape != params[i]->value.shape)
      throw std::runtime_error(path + ": shape of '" + name + "' is " + shape_str(shape) +
                               ", expected " + shape_str(params[i]->value.shape));
    values[i] = io::read_f64_array(is, name.c_str());
    if (static_cast<long>(values[i].size()) != params[i]->value.numel())
      throw std::runtime_error(path + ": payload of '" + name + "' does not match its shape");
  }

  char flag = 0;
  io::read_bytes(is, &flag, 1, "optimizer flag");
  if (optimizer) {
    if (flag != 1)
      throw std::runtime_error(path + ": checkpoint holds no optimizer state but one was requested");
    optimizer->load(is, params);
  }

  for (size_t i = 0; i < params.size(); ++i) params[i]->value.data = std::move(values[i]);
  return h.meta;
}

}  // namespace seqil
