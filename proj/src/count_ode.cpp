#include "phrec/count_ode.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <string>

#include "phrec/error.hpp"
#include "phrec/parallel.hpp"

namespace phrec {

namespace {

constexpr std::string_view kModule = "count-ode";

// Blocks of the stage model, extracted once per computation.
struct StageBlocks {
  int k = 0;
  int n = 0;
  std::vector<Matrix> diag;                 // T_i
  std::vector<std::vector<Matrix>> off;     // T_{i,j}
  std::vector<Matrix> death;                // n x 1 death-rate column of stage i
  std::vector<std::vector<bool>> reachable; // reachable[i][j], j == k is death

  explicit StageBlocks(const StageModel& model) : k(model.k()), n(model.n()) {
    diag.resize(k);
    off.assign(k, std::vector<Matrix>(k));
    death.resize(k);
    reachable.assign(k, std::vector<bool>(k + 1, false));
    for (int i = 0; i < k; ++i) {
      diag[i] = block(model, i, i);
      death[i] = exit_to_death(model, i);
      reachable[i][k] = (death[i].array() > 0.0).any();
      for (int j = 0; j < k; ++j) {
        if (j == i) continue;
        off[i][j] = block(model, i, j);
        reachable[i][j] = (off[i][j].array() > 0.0).any();
      }
    }
  }
};

struct Node {
  int parent = -1;
  int stage = 0;  // k means death
  int depth = 0;
};

// Prefix tree rooted at x_{} for one start stage. Parents always precede
// their children.
struct PrefixTree {
  int start = 0;
  std::vector<Node> nodes;

  int add(int parent, int stage) {
    nodes.push_back({parent, stage, parent < 0 ? 0 : nodes[parent].depth + 1});
    return static_cast<int>(nodes.size()) - 1;
  }
};

// Stacked linear system over a prefix tree. State layout: every node's x
// (rows x cols, column-major), followed by one inflow accumulator per node
// when tracking entry mass.
class XSystem {
 public:
  XSystem(const StageBlocks& blocks, const PrefixTree& tree, int rows, bool track_entry)
      : blocks_(blocks), tree_(tree), rows_(rows), track_entry_(track_entry) {
    std::size_t off = 0;
    for (const auto& node : tree_.nodes) {
      offsets_.push_back(off);
      off += static_cast<std::size_t>(rows_) * cols(node);
    }
    acc_offset_ = off;
    size_ = off + (track_entry_ ? tree_.nodes.size() : 0);
  }

  Eigen::Index size() const { return static_cast<Eigen::Index>(size_); }
  int cols(const Node& node) const { return node.stage == blocks_.k ? 1 : blocks_.n; }

  Eigen::Map<const Matrix> view(const Vector& y, int idx) const {
    return {y.data() + offsets_[idx], rows_, cols(tree_.nodes[idx])};
  }

  double entry_mass(const Vector& y, int idx) const { return y(acc_offset_ + idx); }

  Vector initial(const Matrix& root) const {
    Vector y = Vector::Zero(size());
    Eigen::Map<Matrix>(y.data(), rows_, blocks_.n) = root;
    return y;
  }

  void operator()(double, const Vector& y, Vector& dy) const {
    for (std::size_t idx = 0; idx < tree_.nodes.size(); ++idx) {
      const Node& node = tree_.nodes[idx];
      const int c = cols(node);
      Eigen::Map<const Matrix> x(y.data() + offsets_[idx], rows_, c);
      Eigen::Map<Matrix> dx(dy.data() + offsets_[idx], rows_, c);
      if (node.parent < 0) {
        dx.noalias() = x * blocks_.diag[tree_.start];
        if (track_entry_) dy(acc_offset_ + idx) = 0.0;
        continue;
      }
      const Node& parent = tree_.nodes[node.parent];
      Eigen::Map<const Matrix> xp(y.data() + offsets_[node.parent], rows_, cols(parent));
      const Matrix& inflow_block = node.stage == blocks_.k ? blocks_.death[parent.stage]
                                                           : blocks_.off[parent.stage][node.stage];
      dx.noalias() = xp * inflow_block;
      if (track_entry_) dy(acc_offset_ + idx) = dx.sum();
      if (node.stage != blocks_.k) dx.noalias() += x * blocks_.diag[node.stage];
    }
  }

 private:
  const StageBlocks& blocks_;
  const PrefixTree& tree_;
  int rows_;
  bool track_entry_;
  std::vector<std::size_t> offsets_;
  std::size_t acc_offset_ = 0;
  std::size_t size_ = 0;
};

std::vector<Vector> integrate_tree(const StageBlocks& blocks, const PrefixTree& tree,
                                   const Matrix& root, std::span<const double> grid,
                                   const OdeTolerances& tol, bool track_entry) {
  const XSystem system(blocks, tree, static_cast<int>(root.rows()), track_entry);
  const OdeRhs rhs = [&system](double t, const Vector& y, Vector& dy) { system(t, y, dy); };
  return dopri5(rhs, system.initial(root), grid, tol);
}

void check_horizons(std::span<const double> horizons) {
  for (std::size_t h = 0; h < horizons.size(); ++h) {
    if (!(horizons[h] >= 0.0) || !std::isfinite(horizons[h])) {
      throw Error(ErrorCode::NegativeTime, kModule, "horizon " + std::to_string(horizons[h]));
    }
    if (h > 0 && horizons[h] < horizons[h - 1]) {
      throw Error(ErrorCode::InvalidModel, kModule, "horizons must be sorted ascending");
    }
  }
}

void check_start(const StageModel& model, int i) {
  if (i < 0 || i >= model.k()) {
    throw Error(ErrorCode::IndexOutOfRange, kModule, "start stage " + std::to_string(i));
  }
}

// Subtree of the prefix tree below one first-level destination.
struct Subtree {
  PrefixTree tree;
  std::vector<std::vector<double>> by_depth;  // [h][depth] contributions
};

// Grows the frontier of `tree` by one level. Returns false when nothing new
// was added.
bool extend_frontier(const StageBlocks& blocks, PrefixTree& tree, std::vector<int>& frontier,
                     int lmax, std::size_t& budget, std::size_t cap) {
  std::vector<int> next;
  for (const int idx : frontier) {
    const Node node = tree.nodes[idx];
    if (node.stage == blocks.k || node.depth >= lmax) continue;
    for (int j = 0; j <= blocks.k; ++j) {
      if (j == node.stage || !blocks.reachable[node.stage][j]) continue;
      if (++budget > cap) {
        throw Error(ErrorCode::SequenceExplosion, kModule,
                    "more than " + std::to_string(cap) + " sequences");
      }
      next.push_back(tree.add(idx, j));
    }
  }
  frontier = std::move(next);
  return !frontier.empty();
}

}  // namespace

void check_sequence(const StageModel& model, const StageSequence& seq) {
  check_start(model, seq.start);
  int prev = seq.start;
  for (std::size_t m = 0; m < seq.path.size(); ++m) {
    const int s = seq.path[m];
    if (s < 0 || s > model.death()) {
      throw Error(ErrorCode::IndexOutOfRange, kModule, "stage " + std::to_string(s));
    }
    if (s == prev) {
      throw Error(ErrorCode::InvalidModel, kModule, "consecutive stages must differ");
    }
    if (prev == model.death()) {
      throw Error(ErrorCode::InvalidModel, kModule, "death may only end a sequence");
    }
    prev = s;
  }
}

std::vector<XState> integrate_x_system(const StageModel& model,
                                       const std::vector<StageSequence>& sequences,
                                       std::span<const double> grid, const OdeTolerances& tol,
                                       XForm form) {
  if (sequences.empty()) return {};
  const int start = sequences.front().start;
  PrefixTree tree;
  tree.start = start;
  tree.add(-1, start);
  std::map<std::vector<int>, int> index{{{}, 0}};
  for (const auto& seq : sequences) {
    check_sequence(model, seq);
    if (seq.start != start) {
      throw Error(ErrorCode::InvalidModel, kModule, "sequences must share a start stage");
    }
  }
  // Insert shorter sequences first so parents exist.
  std::vector<const StageSequence*> order;
  for (const auto& seq : sequences) order.push_back(&seq);
  std::stable_sort(order.begin(), order.end(),
                   [](auto* a, auto* b) { return a->path.size() < b->path.size(); });
  for (const auto* seq : order) {
    if (index.count(seq->path)) continue;
    std::vector<int> prefix(seq->path.begin(), seq->path.end() - 1);
    const auto parent = index.find(prefix);
    if (parent == index.end()) {
      throw Error(ErrorCode::InvalidModel, kModule, "sequences are not closed under prefixes");
    }
    index[seq->path] = tree.add(parent->second, seq->path.back());
  }

  const StageBlocks blocks(model);
  const Matrix root = form == XForm::Matrix ? Matrix(Matrix::Identity(model.n(), model.n()))
                                            : Matrix(stage_start_vector(model, start));
  const XSystem system(blocks, tree, static_cast<int>(root.rows()), false);
  const OdeRhs rhs = [&system](double t, const Vector& y, Vector& dy) { system(t, y, dy); };
  const auto values = dopri5(rhs, system.initial(root), grid, tol);

  std::vector<XState> out;
  for (const auto& seq : sequences) {
    XState state{seq, {}};
    const int idx = index.at(seq.path);
    for (const auto& y : values) state.values.emplace_back(system.view(y, idx));
    out.push_back(std::move(state));
  }
  return out;
}

double count_prob_zero(const StageModel& model, int i, double t) {
  check_start(model, i);
  if (!(t >= 0.0)) throw Error(ErrorCode::NegativeTime, kModule, "t = " + std::to_string(t));
  const RowVector start = stage_start_vector(model, i);
  return std::clamp((start * expm(block(model, i, i), t)).sum(), 0.0, 1.0);
}

CountDistribution count_distribution(const StageModel& model, int i, std::span<const double> horizons,
                                     int lmax, const CountOptions& options) {
  check_start(model, i);
  check_horizons(horizons);
  if (lmax < 0) throw Error(ErrorCode::InvalidModel, kModule, "lmax must be >= 0");

  CountDistribution dist;
  dist.start_stage = i;
  dist.horizons.assign(horizons.begin(), horizons.end());
  dist.lmax = lmax;
  dist.probs.assign(horizons.size(), std::vector<double>(lmax + 1, 0.0));
  for (std::size_t h = 0; h < horizons.size(); ++h) {
    dist.probs[h][0] = count_prob_zero(model, i, horizons[h]);
  }
  if (lmax == 0 || horizons.empty()) return dist;

  const StageBlocks blocks(model);
  const RowVector start = stage_start_vector(model, i);
  const bool prune = options.prune_below > 0.0;

  // One subtree per first-level destination, each integrated on its own so
  // results do not depend on the thread count.
  std::vector<Subtree> subtrees;
  std::size_t budget = 0;
  for (int j = 0; j <= blocks.k; ++j) {
    if (j == i || !blocks.reachable[i][j]) continue;
    if (++budget > options.max_sequences) {
      throw Error(ErrorCode::SequenceExplosion, kModule,
                  "more than " + std::to_string(options.max_sequences) + " sequences");
    }
    Subtree sub;
    sub.tree.start = i;
    sub.tree.add(-1, i);
    sub.tree.add(0, j);
    subtrees.push_back(std::move(sub));
  }

  // Without pruning the trees are grown to lmax up front, so the sequence cap
  // is enforced before any integration.
  std::vector<std::vector<int>> frontiers(subtrees.size(), std::vector<int>{1});
  if (!prune) {
    for (std::size_t s = 0; s < subtrees.size(); ++s) {
      while (extend_frontier(blocks, subtrees[s].tree, frontiers[s], lmax, budget,
                             options.max_sequences)) {
      }
    }
  }

  std::atomic<std::size_t> shared_budget{budget};
  parallel_for(subtrees.size(), options.threads, [&](std::size_t s) {
    Subtree& sub = subtrees[s];
    std::vector<Vector> values;
    if (!prune) {
      values = integrate_tree(blocks, sub.tree, start, horizons, options.tol, false);
    } else {
      // Iterative deepening: integrate, close frontier nodes whose entry mass
      // by the last horizon is below the bound, extend the rest.
      std::vector<int> frontier{1};
      while (true) {
        const XSystem system(blocks, sub.tree, 1, true);
        const OdeRhs rhs = [&system](double t, const Vector& y, Vector& dy) { system(t, y, dy); };
        std::vector<double> grid(horizons.begin(), horizons.end());
        values = dopri5(rhs, system.initial(start), grid, options.tol);
        std::vector<int> open;
        for (const int idx : frontier) {
          if (system.entry_mass(values.back(), idx) >= options.prune_below) open.push_back(idx);
        }
        frontier = std::move(open);
        std::size_t added = 0;
        const std::size_t before = sub.tree.nodes.size();
        if (!extend_frontier(blocks, sub.tree, frontier, lmax, added, options.max_sequences)) break;
        if (shared_budget.fetch_add(sub.tree.nodes.size() - before) + added > options.max_sequences) {
          throw Error(ErrorCode::SequenceExplosion, kModule,
                      "more than " + std::to_string(options.max_sequences) + " sequences");
        }
      }
    }
    const XSystem system(blocks, sub.tree, 1, prune);
    sub.by_depth.assign(horizons.size(), std::vector<double>(lmax + 1, 0.0));
    for (std::size_t h = 0; h < horizons.size(); ++h) {
      for (std::size_t idx = 1; idx < sub.tree.nodes.size(); ++idx) {
        sub.by_depth[h][sub.tree.nodes[idx].depth] += system.view(values[h], static_cast<int>(idx)).sum();
      }
    }
  });

  std::size_t integrated = 0;
  for (const auto& sub : subtrees) {
    integrated += sub.tree.nodes.size() - 1;
    for (std::size_t h = 0; h < horizons.size(); ++h) {
      for (int l = 1; l <= lmax; ++l) dist.probs[h][l] += sub.by_depth[h][l];
    }
  }
  for (auto& row : dist.probs) {
    for (double& p : row) p = std::clamp(p, 0.0, 1.0);
  }
  dist.sequences = integrated;
  return dist;
}

std::vector<double> count_prob_between(const StageModel& model, int i, int j,
                                       std::span<const double> horizons, int l,
                                       const CountOptions& options) {
  check_start(model, i);
  check_horizons(horizons);
  if (j < 0 || j > model.death()) {
    throw Error(ErrorCode::IndexOutOfRange, kModule, "destination " + std::to_string(j));
  }
  if (l < 0) throw Error(ErrorCode::InvalidModel, kModule, "l must be >= 0");
  std::vector<double> out(horizons.size(), 0.0);
  if (l == 0) {
    if (j == i) {
      for (std::size_t h = 0; h < horizons.size(); ++h) out[h] = count_prob_zero(model, i, horizons[h]);
    }
    return out;
  }

  // Sequences of exactly l steps that end in j; death can only be the last step.
  const StageBlocks blocks(model);
  PrefixTree tree;
  tree.start = i;
  tree.add(-1, i);
  std::vector<int> frontier{0};
  std::size_t budget = 0;
  for (int depth = 1; depth <= l; ++depth) {
    std::vector<int> next;
    for (const int idx : frontier) {
      const int from = tree.nodes[idx].stage;
      for (int s = 0; s <= blocks.k; ++s) {
        if (s == from || !blocks.reachable[from][s]) continue;
        if (depth == l && s != j) continue;
        if (depth < l && s == blocks.k) continue;
        if (++budget > options.max_sequences) {
          throw Error(ErrorCode::SequenceExplosion, kModule,
                      "more than " + std::to_string(options.max_sequences) + " sequences");
        }
        next.push_back(tree.add(idx, s));
      }
    }
    frontier = std::move(next);
  }
  if (frontier.empty()) return out;

  const RowVector start = stage_start_vector(model, i);
  const auto values = integrate_tree(blocks, tree, start, horizons, options.tol, false);
  const XSystem system(blocks, tree, 1, false);
  for (std::size_t h = 0; h < horizons.size(); ++h) {
    for (const int idx : frontier) out[h] += system.view(values[h], idx).sum();
    out[h] = std::clamp(out[h], 0.0, 1.0);
  }
  return out;
}

std::vector<double> sequence_prob(const StageModel& model, const StageSequence& seq,
                                  std::span<const double> horizons, const OdeTolerances& tol) {
  check_sequence(model, seq);
  check_horizons(horizons);
  if (seq.path.empty()) {
    std::vector<double> out;
    for (double t : horizons) out.push_back(count_prob_zero(model, seq.start, t));
    return out;
  }
  std::vector<StageSequence> prefixes;
  for (std::size_t m = 1; m <= seq.path.size(); ++m) {
    prefixes.push_back({seq.start, std::vector<int>(seq.path.begin(), seq.path.begin() + m)});
  }
  const auto states = integrate_x_system(model, prefixes, horizons, tol, XForm::Row);
  std::vector<double> out;
  for (const auto& v : states.back().values) out.push_back(std::clamp(v.sum(), 0.0, 1.0));
  return out;
}

}  // namespace phrec
