#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "impulse/control.hpp"

namespace impulse {

using State = std::vector<double>;
/// Deterministic bounded càdlàg history x(t) for t <= 0; x(0) is the initial state.
using PreHistory = std::function<State(double)>;

PreHistory constant_history(State x0);

enum class Side { Left, Right };

/// One applied impulse: state just before (after any jump at the node) and after.
struct ImpulseRecord {
  std::size_t node = 0;
  double time = 0.0;
  Mark mark;
  State pre;
  State post;
};

/// A right-continuous path stored on a dyadic grid. Between nodes the path is
/// held at the right value of the left node. Nodes that carry a jump or impulse
/// store X_{t-} and X_t separately; elsewhere the two coincide.
class CadlagPath {
 public:
  CadlagPath(DyadicGrid grid, std::size_t dim, PreHistory pre_history);

  const DyadicGrid& grid() const noexcept { return grid_; }
  std::size_t dim() const noexcept { return dim_; }
  /// Number of nodes written so far (paths are built node by node).
  std::size_t filled() const noexcept { return flags_.size(); }
  bool complete() const noexcept { return filled() == grid_.size(); }

  std::span<const double> left(std::size_t node) const;
  std::span<const double> right(std::size_t node) const;
  bool is_jump(std::size_t node) const { return flags_.at(node) != 0; }
  /// State at the node after jumps but before the impulses applied there.
  std::span<const double> pre_impulse(std::size_t node) const;

  /// Piecewise-constant read; Side::Left at a node returns X_{t-}.
  State read(double t, Side side = Side::Right) const;
  State history(double t) const { return pre_history_(t); }

  const std::vector<ImpulseRecord>& impulses() const noexcept { return impulses_; }

  void push_node(std::span<const double> left, std::span<const double> right, bool jump);
  void record_impulse(ImpulseRecord rec);

 private:
  DyadicGrid grid_;
  std::size_t dim_;
  PreHistory pre_history_;
  std::vector<double> left_, right_;
  std::vector<unsigned char> flags_;
  std::vector<ImpulseRecord> impulses_;
};

/// The path restricted to (-inf, t] as seen by functional coefficients at node
/// `node`, with `current` as X_t (which may differ from any stored value while
/// the node is being built or when evaluating a hypothetical impulse).
class PathView {
 public:
  PathView(const CadlagPath& path, std::size_t node, std::span<const double> current);

  const CadlagPath& path() const noexcept { return *path_; }
  std::size_t node() const noexcept { return node_; }
  double time() const noexcept { return path_->grid().time(node_); }
  std::size_t dim() const noexcept { return current_.size(); }
  std::span<const double> current() const noexcept { return current_; }
  double x(std::size_t component = 0) const { return current_[component]; }

  /// X_s for s <= time(); reads at or after the current node return current().
  State value(double s) const;
  double value(double s, std::size_t component) const;
  /// sup over stored nodes strictly before the current one (both sides) and |current|.
  double running_sup() const;

  PathView with_current(std::span<const double> current) const {
    return PathView(*path_, node_, current);
  }

 private:
  const CadlagPath* path_;
  std::size_t node_;
  std::span<const double> current_;
};

double norm(std::span<const double> x) noexcept;

/// max |X| over grid nodes in [s, t], both sides at jump nodes, including the
/// value in force at s.
double sup_norm(const CadlagPath& path, double s, double t);

/// Regression state built from the path up to the current node (no lookahead).
struct FeatureSpec {
  bool current = true;
  bool running_sup = false;
  std::vector<double> delays;        ///< X_{t - d} for each d (first component)
  std::vector<double> kernel_rates;  ///< ∫_0^t e^{-k (t-s)} X_s ds, left rule

  std::size_t size(std::size_t dim) const noexcept {
    return (current ? dim : 0) + (running_sup ? 1 : 0) + delays.size() + kernel_rates.size();
  }
};

void extract_features(const PathView& view, const FeatureSpec& spec, std::vector<double>& out);
std::vector<double> extract_features(const PathView& view, const FeatureSpec& spec);

/// View of a completed node (current = right value).
PathView node_view(const CadlagPath& path, std::size_t node);

/// CSV with columns t,X_left,X_right,jump_flag (component-suffixed when dim > 1).
void write_csv(std::ostream& os, const CadlagPath& path);

}  // namespace impulse
