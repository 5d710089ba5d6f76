#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace seqil {

struct Vocabulary {
  std::vector<std::string> tokens;
  int pad_id = 0;
  int bos_id = 1;
  int eos_id = 2;

  int size() const { return static_cast<int>(tokens.size()); }

  bool valid_id(int id) const { return id >= 0 && id < size(); }

  const std::string& token(int id) const {
    if (!valid_id(id)) throw std::out_of_range("Vocabulary: token id " + std::to_string(id));
    return tokens[static_cast<size_t>(id)];
  }

  int find(const std::string& s) const {
    for (int i = 0; i < size(); ++i)
      if (tokens[static_cast<size_t>(i)] == s) return i;
    return -1;
  }

  void validate() const {
    if (!valid_id(pad_id) || !valid_id(bos_id) || !valid_id(eos_id))
      throw std::invalid_argument("Vocabulary: special token id out of range");
    if (pad_id == bos_id || pad_id == eos_id || bos_id == eos_id)
      throw std::invalid_argument("Vocabulary: special token ids must be distinct");
  }

  // pad/bos/eos followed by the given symbols.
  static Vocabulary with_symbols(const std::vector<std::string>& symbols) {
    Vocabulary v;
    v.tokens = {"<pad>", "<bos>", "<eos>"};
    v.tokens.insert(v.tokens.end(), symbols.begin(), symbols.end());
    v.validate();
    return v;
  }

  // First non-special symbol id.
  int first_symbol() const { return 3; }
  int symbol_count() const { return size() - 3; }
};

}  // namespace seqil
