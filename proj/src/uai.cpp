#include "srmp/uai.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <sstream>

namespace srmp {

namespace {

struct Tokenizer {
  std::string_view text;
  std::size_t pos = 0;
  int line = 1;

  bool next(std::string_view& token)
  {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) {
      if (text[pos] == '\n') line++;
      pos++;
    }
    if (pos >= text.size()) return false;
    const std::size_t start = pos;
    while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos]))) pos++;
    token = text.substr(start, pos - start);
    return true;
  }
};

class Reader {
 public:
  explicit Reader(std::string_view text) : tok_{text} {}

  std::string_view token(const char* what)
  {
    std::string_view t;
    if (!tok_.next(t)) throw UaiParseError(tok_.line, std::string("unexpected end of input, expected ") + what);
    return t;
  }

  long integer(const char* what)
  {
    const std::string_view t = token(what);
    long value = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc{} || ptr != t.data() + t.size())
      throw UaiParseError(tok_.line, std::string("expected an integer for ") + what + ", got '" +
                                         std::string(t) + "'");
    return value;
  }

  double real(const char* what)
  {
    const std::string_view t = token(what);
    const std::string s(t);
    char* end = nullptr;
    const double value = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size())
      throw UaiParseError(tok_.line, std::string("expected a number for ") + what + ", got '" + s + "'");
    return value;
  }

  bool at_end()
  {
    std::string_view t;
    Tokenizer probe = tok_;
    return !probe.next(t);
  }

  int line() const { return tok_.line; }

 private:
  Tokenizer tok_;
};

}  // namespace

UaiModel parse_uai(std::string_view text)
{
  Reader in(text);

  const std::string_view header = in.token("the MARKOV header");
  if (header != "MARKOV") throw UaiParseError(in.line(), "expected MARKOV header");

  UaiModel model;
  const long node_count = in.integer("the node count");
  if (node_count < 0) throw UaiParseError(in.line(), "negative node count");
  model.nodes.cardinalities.resize(static_cast<std::size_t>(node_count));
  for (long v = 0; v < node_count; v++) {
    const long card = in.integer("a node cardinality");
    if (card < 1) throw UaiParseError(in.line(), "node cardinality must be at least 1");
    model.nodes.cardinalities[static_cast<std::size_t>(v)] = static_cast<int>(card);
  }

  const long factor_count = in.integer("the factor count");
  if (factor_count < 0) throw UaiParseError(in.line(), "negative factor count");

  std::vector<std::vector<NodeId>> listed_scopes;
  for (long f = 0; f < factor_count; f++) {
    const long arity = in.integer("a scope size");
    if (arity < 1)
      throw UaiParseError(in.line(), "factor " + std::to_string(f) + " has an empty scope");
    std::vector<NodeId> scope;
    for (long k = 0; k < arity; k++) {
      const long v = in.integer("a scope node id");
      if (v < 0 || v >= node_count)
        throw UaiParseError(in.line(),
                            "factor " + std::to_string(f) + " references unknown node " + std::to_string(v));
      scope.push_back(static_cast<NodeId>(v));
    }
    std::vector<NodeId> sorted = scope;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw UaiParseError(in.line(), "factor " + std::to_string(f) + " repeats a node in its scope");
    listed_scopes.push_back(std::move(scope));
  }

  for (long f = 0; f < factor_count; f++) {
    const auto& listed = listed_scopes[static_cast<std::size_t>(f)];
    std::size_t expected = 1;
    for (NodeId v : listed) expected *= static_cast<std::size_t>(model.nodes.labels(v));

    const long count = in.integer("a table entry count");
    if (count < 0 || static_cast<std::size_t>(count) != expected)
      throw UaiParseError(in.line(), "factor " + std::to_string(f) + " table has " +
                                         std::to_string(count) + " entries, expected " +
                                         std::to_string(expected));
    std::vector<Cost> listed_table(static_cast<std::size_t>(count));
    for (long k = 0; k < count; k++) {
      const double v = in.real("a table entry");
      if (std::isnan(v) || v == -kInfiniteCost)
        throw UaiParseError(in.line(), "factor " + std::to_string(f) + " table entry is NaN or -inf");
      listed_table[static_cast<std::size_t>(k)] = v;
    }

    Factor factor;
    factor.scope = listed;
    std::sort(factor.scope.begin(), factor.scope.end());
    if (factor.scope == listed) {
      factor.costs = std::move(listed_table);
    } else {
      // Permute the table from the listed order to the sorted scope.
      std::vector<std::size_t> pos_in_listed;  // per sorted position
      for (NodeId v : factor.scope) {
        const auto it = std::find(listed.begin(), listed.end(), v);
        pos_in_listed.push_back(static_cast<std::size_t>(it - listed.begin()));
      }
      const auto listed_strides = scope_strides(listed, model.nodes);
      factor.costs.resize(listed_table.size());
      for (AssignmentIterator it(factor.scope, model.nodes); it.valid(); it.advance()) {
        std::size_t src = 0;
        for (std::size_t j = 0; j < factor.scope.size(); j++)
          src += static_cast<std::size_t>(it.digits()[j]) * listed_strides[pos_in_listed[j]];
        factor.costs[it.index()] = listed_table[src];
      }
    }
    model.factors.push_back(std::move(factor));
  }

  if (!in.at_end()) throw UaiParseError(in.line(), "trailing tokens after the last table");
  return model;
}

std::string emit_uai(const UaiModel& model)
{
  std::ostringstream out;
  out << "MARKOV\n";
  out << model.nodes.count() << "\n";
  for (int v = 0; v < model.nodes.count(); v++) {
    if (v) out << ' ';
    out << model.nodes.labels(v);
  }
  out << "\n" << model.factors.size() << "\n";
  for (const Factor& f : model.factors) {
    out << f.scope.size();
    for (NodeId v : f.scope) out << ' ' << v;
    out << "\n";
  }
  char buf[64];
  for (const Factor& f : model.factors) {
    out << "\n" << f.costs.size() << "\n";
    for (std::size_t i = 0; i < f.costs.size(); i++) {
      std::snprintf(buf, sizeof(buf), "%.17g", f.costs[i]);
      out << buf << ((i + 1) % 8 == 0 || i + 1 == f.costs.size() ? '\n' : ' ');
    }
  }
  return out.str();
}

}  // namespace srmp
