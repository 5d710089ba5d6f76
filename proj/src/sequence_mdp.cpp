#include "seqil/sequence_mdp.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace seqil {

Transition SeqMdp::step(const std::vector<int>& state, int action) const {
  if (max_len < 1) throw std::invalid_argument("SeqMdp: max_len must be >= 1");
  if (!vocab.valid_id(action))
    throw std::invalid_argument("SeqMdp::step: action " + std::to_string(action) +
                                " outside vocabulary of size " + std::to_string(vocab.size()));
  if (static_cast<long>(state.size()) >= max_len)
    throw std::invalid_argument("SeqMdp::step: state is already at the length cap");
  Transition t;
  t.state = state;
  t.action = action;
  t.next_state = state;
  t.next_state.push_back(action);
  t.terminal = (action == vocab.eos_id) || (static_cast<long>(t.next_state.size()) >= max_len);
  return t;
}

std::vector<Transition> trajectory_to_transitions(const Trajectory& traj) {
  if (traj.prompt.empty())
    throw std::invalid_argument("trajectory_to_transitions: prompt must be non-empty");
  std::vector<Transition> out;
  out.reserve(traj.completion.size());
  std::vector<int> state = traj.prompt;
  for (size_t t = 0; t < traj.completion.size(); ++t) {
    Transition tr;
    tr.state = state;
    tr.action = traj.completion[t];
    state.push_back(tr.action);
    tr.next_state = state;
    tr.terminal = (t + 1 == traj.completion.size()) && traj.terminated;
    out.push_back(std::move(tr));
  }
  return out;
}

void save_dataset(const std::string& path, const std::vector<Trajectory>& data) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_dataset: cannot open " + path);
  for (const Trajectory& tr : data) {
    for (size_t i = 0; i < tr.prompt.size(); ++i) {
      if (i) os << ' ';
      os << tr.prompt[i];
    }
    os << '\t';
    for (size_t i = 0; i < tr.completion.size(); ++i) {
      if (i) os << ' ';
      os << tr.completion[i];
    }
    os << '\t' << (tr.terminated ? 1 : 0) << '\n';
  }
  if (!os) throw std::runtime_error("save_dataset: write failed for " + path);
}

namespace {

std::vector<int> parse_ids(const std::string& field, const Vocabulary& vocab, const std::string& path,
                           long line_no) {
  std::vector<int> ids;
  std::istringstream is(field);
  std::string tok;
  while (is >> tok) {
    size_t used = 0;
    int id;
    try {
      id = std::stoi(tok, &used);
    } catch (const std::exception&) {
      used = 0;
      id = -1;
    }
    if (used != tok.size())
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed token id '" +
                               tok + "'");
    if (!vocab.valid_id(id))
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": token id " +
                               std::to_string(id) + " outside vocabulary of size " +
                               std::to_string(vocab.size()));
    ids.push_back(id);
  }
  return ids;
}

}  // namespace

std::vector<Trajectory> load_dataset(const std::string& path, const Vocabulary& vocab) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_dataset: cannot open " + path);
  std::vector<Trajectory> out;
  std::string line;
  long line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const size_t tab1 = line.find('\t');
    const size_t tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
    if (tab1 == std::string::npos || tab2 == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected three tab-separated fields");
    Trajectory tr;
    tr.prompt = parse_ids(line.substr(0, tab1), vocab, path, line_no);
    tr.completion = parse_ids(line.substr(tab1 + 1, tab2 - tab1 - 1), vocab, path, line_no);
    const std::string flag = line.substr(tab2 + 1);
    if (flag == "1")
      tr.terminated = true;
    else if (flag == "0")
      tr.terminated = false;
    else
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": terminated flag must be 0 or 1, got '" + flag + "'");
    if (tr.prompt.empty())
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": empty prompt");
    out.push_back(std::move(tr));
  }
  return out;
}

}  // namespace seqil
