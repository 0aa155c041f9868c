#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "srmp/factor_graph.hpp"

namespace srmp {

class UaiParseError : public std::runtime_error {
 public:
  UaiParseError(int line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message), line(line)
  {
  }
  int line;
};

struct UaiModel {
  NodeSet nodes;
  std::vector<Factor> factors;
};

// MARKOV-network text format: header token, node count, cardinalities,
// factor count, one scope line per factor (size then node ids), then one
// table per factor (entry count then entries, last listed variable varying
// fastest).  Whitespace-insensitive.  Scopes listed out of order are
// normalized: the scope is sorted and the table permuted accordingly.
UaiModel parse_uai(std::string_view text);

std::string emit_uai(const UaiModel& model);

}  // namespace srmp
