#ifndef QUAYDECK_BASELINES_TREE_HPP_
#define QUAYDECK_BASELINES_TREE_HPP_

#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "quaydeck/env.hpp"
#include "quaydeck/json_util.hpp"
#include "quaydeck/rng.hpp"

namespace quaydeck::baselines {

enum class Op : std::uint8_t { Add, Sub, Mul, Div, Min, Max, Feature, Const };

inline bool is_terminal(Op op) { return op == Op::Feature || op == Op::Const; }

struct Node {
  Op op = Op::Const;
  int feature = 0;     // Op::Feature
  double value = 0.0;  // Op::Const
  bool operator==(const Node&) const = default;
};

struct TreeLimits {
  int max_depth = 6;  // a lone terminal has depth 0
  double const_min = -2.0;
  double const_max = 2.0;
  double terminal_const_prob = 0.2;  // share of terminals that are constants
};

/// Arithmetic dispatching rule stored in prefix order. Every operator is
/// binary.
struct ExprTree {
  std::vector<Node> nodes;
  bool operator==(const ExprTree&) const = default;

  static ExprTree feature(int f) { return {{Node{Op::Feature, f, 0.0}}}; }
  static ExprTree constant(double v) { return {{Node{Op::Const, 0, v}}}; }
  static ExprTree binary(Op op, const ExprTree& l, const ExprTree& r) {
    ExprTree t;
    t.nodes.push_back(Node{op, 0, 0.0});
    t.nodes.insert(t.nodes.end(), l.nodes.begin(), l.nodes.end());
    t.nodes.insert(t.nodes.end(), r.nodes.begin(), r.nodes.end());
    return t;
  }
};

/// One past the last node of the subtree rooted at `i`.
inline std::size_t subtree_end(const ExprTree& t, std::size_t i) {
  std::size_t need = 1;
  while (need > 0) {
    if (i >= t.nodes.size()) throw ValidationError("truncated expression tree");
    need += is_terminal(t.nodes[i].op) ? -1 : 1;
    ++i;
  }
  return i;
}

/// Depth of every node (root 0), in prefix order.
inline std::vector<int> node_depths(const ExprTree& t) {
  std::vector<int> depth(t.nodes.size(), 0);
  std::vector<int> open;  // unfilled child slots per ancestor
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    depth[i] = static_cast<int>(open.size());
    if (!open.empty()) --open.back();
    if (!is_terminal(t.nodes[i].op)) {
      open.push_back(2);
    } else {
      while (!open.empty() && open.back() == 0) open.pop_back();
    }
  }
  return depth;
}

inline int tree_depth(const ExprTree& t) {
  int d = 0;
  for (int x : node_depths(t)) d = std::max(d, x);
  return d;
}

/// Height of the subtree rooted at `i`.
inline int subtree_height(const ExprTree& t, std::size_t i) {
  const auto d = node_depths(t);
  const std::size_t end = subtree_end(t, i);
  int h = 0;
  for (std::size_t k = i; k < end; ++k) h = std::max(h, d[k] - d[i]);
  return h;
}

/// Well-formed arity, valid terminals and the depth cap.
inline void validate_tree(const ExprTree& t, const TreeLimits& lim) {
  if (t.nodes.empty()) throw ValidationError("empty expression tree");
  if (subtree_end(t, 0) != t.nodes.size()) throw ValidationError("expression tree has trailing nodes");
  for (const auto& n : t.nodes) {
    if (n.op == Op::Feature && (n.feature < 0 || n.feature >= kFeatureWidth))
      throw ValidationError("feature index out of range");
    if (n.op == Op::Const && !std::isfinite(n.value)) throw ValidationError("non-finite constant");
  }
  if (tree_depth(t) > lim.max_depth) throw ValidationError("expression tree exceeds max depth");
}

namespace detail {

inline double eval_at(const ExprTree& t, std::size_t& i, std::span<const double> row) {
  const Node& n = t.nodes[i++];
  switch (n.op) {
    case Op::Feature:
      return row[static_cast<std::size_t>(n.feature)];
    case Op::Const:
      return n.value;
    default:
      break;
  }
  const double a = eval_at(t, i, row);
  const double b = eval_at(t, i, row);
  switch (n.op) {
    case Op::Add:
      return a + b;
    case Op::Sub:
      return a - b;
    case Op::Mul:
      return a * b;
    case Op::Div:
      return std::abs(b) < 1e-9 ? 1.0 : a / b;
    case Op::Min:
      return std::min(a, b);
    case Op::Max:
      return std::max(a, b);
    default:
      throw InternalError("bad tree operator");
  }
}

}  // namespace detail

inline double eval_tree(const ExprTree& t, std::span<const double> row) {
  if (row.size() != static_cast<std::size_t>(kFeatureWidth)) throw ShapeError("feature row width must be 14");
  std::size_t i = 0;
  return detail::eval_at(t, i, row);
}

/// Dispatches to the QC with the lowest score; ties and non-finite scores
/// resolve to the lowest row.
class TreePolicy final : public DispatchPolicy {
 public:
  explicit TreePolicy(ExprTree tree) : tree_(std::move(tree)) {}

  std::vector<double> probabilities(const StateFeatures& f, const Preference&) const override {
    std::vector<double> p(static_cast<std::size_t>(f.rows), 0.0);
    p[static_cast<std::size_t>(choose(f))] = 1.0;
    return p;
  }

  int choose(const StateFeatures& f) const {
    if (f.rows < 1) throw ShapeError("no candidate QCs");
    int best = 0;
    double best_score = std::numeric_limits<double>::infinity();
    for (int r = 0; r < f.rows; ++r) {
      double s = eval_tree(tree_, f.row(r));
      if (!std::isfinite(s)) s = std::numeric_limits<double>::infinity();
      if (s < best_score) {
        best_score = s;
        best = r;
      }
    }
    return best;
  }

  const ExprTree& tree() const { return tree_; }

 private:
  ExprTree tree_;
};

/// Shortest empty-leg rule.
inline ExprTree greedy_empty_leg_tree() { return ExprTree::feature(kEmptyLegDistance); }

// ---- text form: space-separated prefix tokens, e.g. "+ f3 * 2 f5"

inline const char* op_token(Op op) {
  switch (op) {
    case Op::Add:
      return "+";
    case Op::Sub:
      return "-";
    case Op::Mul:
      return "*";
    case Op::Div:
      return "/";
    case Op::Min:
      return "min";
    case Op::Max:
      return "max";
    default:
      return "";
  }
}

inline std::string to_prefix(const ExprTree& t) {
  std::string out;
  for (const auto& n : t.nodes) {
    if (!out.empty()) out += ' ';
    if (n.op == Op::Feature) {
      out += "f" + std::to_string(n.feature);
    } else if (n.op == Op::Const) {
      out += format_double(n.value);
    } else {
      out += op_token(n.op);
    }
  }
  return out;
}

inline ExprTree parse_prefix(const std::string& text) {
  ExprTree t;
  std::istringstream in(text);
  for (std::string tok; in >> tok;) {
    Node n;
    if (tok == "+") n.op = Op::Add;
    else if (tok == "-") n.op = Op::Sub;
    else if (tok == "*") n.op = Op::Mul;
    else if (tok == "/") n.op = Op::Div;
    else if (tok == "min") n.op = Op::Min;
    else if (tok == "max") n.op = Op::Max;
    else if (tok.size() > 1 && tok[0] == 'f' && std::isdigit(static_cast<unsigned char>(tok[1]))) {
      n.op = Op::Feature;
      std::size_t used = 0;
      n.feature = std::stoi(tok.substr(1), &used);
      if (used + 1 != tok.size()) throw ParseError("tree", "bad feature token '" + tok + "'");
    } else {
      n.op = Op::Const;
      std::size_t used = 0;
      try {
        n.value = std::stod(tok, &used);
      } catch (const std::exception&) {
        throw ParseError("tree", "bad token '" + tok + "'");
      }
      if (used != tok.size()) throw ParseError("tree", "bad token '" + tok + "'");
    }
    t.nodes.push_back(n);
  }
  try {
    validate_tree(t, TreeLimits{.max_depth = std::numeric_limits<int>::max()});
  } catch (const ValidationError& e) {
    throw ParseError("tree", e.what());
  }
  return t;
}

// ---- random construction and variation

inline Node random_terminal(Rng& rng, const TreeLimits& lim) {
  if (uniform01(rng) < lim.terminal_const_prob) return Node{Op::Const, 0, uniform(rng, lim.const_min, lim.const_max)};
  return Node{Op::Feature, static_cast<int>(uniform_index(rng, kFeatureWidth)), 0.0};
}

inline Node random_operator(Rng& rng) { return Node{static_cast<Op>(uniform_index(rng, 6)), 0, 0.0}; }

/// Grow (full = false) or full (full = true) tree of height <= `height`.
inline void random_subtree(Rng& rng, int height, bool full, const TreeLimits& lim, std::vector<Node>& out) {
  const bool leaf = height == 0 || (!full && uniform01(rng) < 0.3);
  if (leaf) {
    out.push_back(random_terminal(rng, lim));
    return;
  }
  out.push_back(random_operator(rng));
  random_subtree(rng, height - 1, full, lim, out);
  random_subtree(rng, height - 1, full, lim, out);
}

inline ExprTree random_tree(Rng& rng, int height, bool full, const TreeLimits& lim) {
  ExprTree t;
  random_subtree(rng, std::min(height, lim.max_depth), full, lim, t.nodes);
  return t;
}

/// Ramped half-and-half initial population with heights 1..min(4, max).
inline std::vector<ExprTree> ramped_population(Rng& rng, std::size_t n, const TreeLimits& lim) {
  const int top = std::max(1, std::min(4, lim.max_depth));
  std::vector<ExprTree> pop;
  for (std::size_t i = 0; i < n; ++i) {
    const int h = 1 + static_cast<int>(i % static_cast<std::size_t>(top));
    pop.push_back(random_tree(rng, h, (i / static_cast<std::size_t>(top)) % 2 == 0, lim));
  }
  return pop;
}

inline ExprTree replace_subtree(const ExprTree& t, std::size_t at, const std::vector<Node>& sub) {
  ExprTree out;
  const std::size_t end = subtree_end(t, at);
  out.nodes.assign(t.nodes.begin(), t.nodes.begin() + static_cast<std::ptrdiff_t>(at));
  out.nodes.insert(out.nodes.end(), sub.begin(), sub.end());
  out.nodes.insert(out.nodes.end(), t.nodes.begin() + static_cast<std::ptrdiff_t>(end), t.nodes.end());
  return out;
}

/// Subtree exchange. Swaps that would break the depth cap are redrawn; after
/// `attempts` failures the parents are returned unchanged.
inline std::pair<ExprTree, ExprTree> subtree_crossover(const ExprTree& a, const ExprTree& b, Rng& rng,
                                                       const TreeLimits& lim, int attempts = 8) {
  const auto da = node_depths(a), db = node_depths(b);
  for (int k = 0; k < attempts; ++k) {
    const std::size_t i = uniform_index(rng, a.nodes.size());
    const std::size_t j = uniform_index(rng, b.nodes.size());
    if (da[i] + subtree_height(b, j) > lim.max_depth || db[j] + subtree_height(a, i) > lim.max_depth) continue;
    const std::vector<Node> sa(a.nodes.begin() + static_cast<std::ptrdiff_t>(i),
                               a.nodes.begin() + static_cast<std::ptrdiff_t>(subtree_end(a, i)));
    const std::vector<Node> sb(b.nodes.begin() + static_cast<std::ptrdiff_t>(j),
                               b.nodes.begin() + static_cast<std::ptrdiff_t>(subtree_end(b, j)));
    return {replace_subtree(a, i, sb), replace_subtree(b, j, sa)};
  }
  return {a, b};
}

/// Replaces a random subtree with a fresh grown one that respects the cap.
inline ExprTree subtree_mutation(const ExprTree& t, Rng& rng, const TreeLimits& lim) {
  const auto d = node_depths(t);
  const std::size_t i = uniform_index(rng, t.nodes.size());
  const int room = std::max(0, lim.max_depth - d[i]);
  std::vector<Node> sub;
  random_subtree(rng, std::min(room, 3), false, lim, sub);
  return replace_subtree(t, i, sub);
}

}  // namespace quaydeck::baselines

#endif  // QUAYDECK_BASELINES_TREE_HPP_
