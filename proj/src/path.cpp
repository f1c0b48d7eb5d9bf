#include "impulse/path.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "impulse/errors.hpp"

namespace impulse {

PreHistory constant_history(State x0) {
  return [x0 = std::move(x0)](double) { return x0; };
}

CadlagPath::CadlagPath(DyadicGrid grid, std::size_t dim, PreHistory pre_history)
    : grid_(grid), dim_(dim), pre_history_(std::move(pre_history)) {
  if (dim_ == 0) throw InvalidInput("path dimension must be positive");
  if (!pre_history_) throw InvalidInput("path needs a pre-history");
  left_.reserve(grid_.size() * dim_);
  right_.reserve(grid_.size() * dim_);
  flags_.reserve(grid_.size());
}

std::span<const double> CadlagPath::left(std::size_t node) const {
  if (node >= filled()) throw InvalidInput("node " + std::to_string(node) + " not simulated");
  return {left_.data() + node * dim_, dim_};
}

std::span<const double> CadlagPath::right(std::size_t node) const {
  if (node >= filled()) throw InvalidInput("node " + std::to_string(node) + " not simulated");
  return {right_.data() + node * dim_, dim_};
}

std::span<const double> CadlagPath::pre_impulse(std::size_t node) const {
  auto it = std::lower_bound(impulses_.begin(), impulses_.end(), node,
                             [](const ImpulseRecord& r, std::size_t n) { return r.node < n; });
  if (it != impulses_.end() && it->node == node) return it->pre;
  return right(node);
}

State CadlagPath::read(double t, Side side) const {
  if (t < 0.0) return pre_history_(t);
  if (t > grid_.end() * (1.0 + 1e-12) + 1e-12) throw InvalidInput("t beyond simulated horizon");
  std::span<const double> s;
  if (auto node = grid_.node_of(t)) {
    s = side == Side::Left ? left(*node) : right(*node);
  } else {
    s = right(grid_.floor_node(t));
  }
  return State(s.begin(), s.end());
}

void CadlagPath::push_node(std::span<const double> left, std::span<const double> right, bool jump) {
  if (left.size() != dim_ || right.size() != dim_) throw InvalidInput("state dimension mismatch");
  if (complete()) throw InvalidInput("path already complete");
  left_.insert(left_.end(), left.begin(), left.end());
  right_.insert(right_.end(), right.begin(), right.end());
  flags_.push_back(jump ? 1 : 0);
}

void CadlagPath::record_impulse(ImpulseRecord rec) { impulses_.push_back(std::move(rec)); }

PathView::PathView(const CadlagPath& path, std::size_t node, std::span<const double> current)
    : path_(&path), node_(node), current_(current) {}

State PathView::value(double s) const {
  const double t = time();
  if (s >= t - 1e-12 * std::max(1.0, t)) return State(current_.begin(), current_.end());
  return path_->read(s, Side::Right);
}

double PathView::value(double s, std::size_t component) const {
  const double t = time();
  if (s >= t - 1e-12 * std::max(1.0, t)) return current_[component];
  if (s < 0.0) return path_->history(s)[component];
  const auto& g = path_->grid();
  std::size_t i = g.node_of(s).value_or(g.floor_node(s));
  return path_->right(i)[component];
}

double PathView::running_sup() const {
  double m = norm(current_);
  for (std::size_t j = 0; j < node_; ++j)
    m = std::max({m, norm(path_->left(j)), norm(path_->right(j))});
  return m;
}

double norm(std::span<const double> x) noexcept {
  if (x.size() == 1) return std::abs(x[0]);
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

double sup_norm(const CadlagPath& path, double s, double t) {
  if (!(s <= t)) throw InvalidInput("sup_norm: empty window");
  if (s < 0.0) throw InvalidInput("sup_norm: window starts before 0");
  const auto& g = path.grid();
  if (t > g.end() * (1.0 + 1e-12) + 1e-12) throw InvalidInput("sup_norm: window beyond simulated horizon");
  const std::size_t first = g.floor_node(s);
  const std::size_t last = g.floor_node(t);
  // The value in force at s is the right value at floor(s); the left value
  // only belongs to the window when s is itself a node.
  double m = norm(path.right(first));
  if (g.node_of(s)) m = std::max(m, norm(path.left(first)));
  for (std::size_t i = first + 1; i <= last; ++i)
    m = std::max({m, norm(path.left(i)), norm(path.right(i))});
  return m;
}

void extract_features(const PathView& view, const FeatureSpec& spec, std::vector<double>& out) {
  out.clear();
  if (spec.current)
    for (double c : view.current()) out.push_back(c);
  if (spec.running_sup) out.push_back(view.running_sup());
  const double t = view.time();
  for (double d : spec.delays) out.push_back(view.value(t - d, 0));
  if (!spec.kernel_rates.empty()) {
    const auto& path = view.path();
    const double h = path.grid().step();
    for (double rate : spec.kernel_rates) {
      double acc = 0.0;
      for (std::size_t j = 0; j < view.node(); ++j)
        acc += std::exp(-rate * (t - path.grid().time(j))) * path.right(j)[0] * h;
      out.push_back(acc);
    }
  }
}

std::vector<double> extract_features(const PathView& view, const FeatureSpec& spec) {
  std::vector<double> out;
  extract_features(view, spec, out);
  return out;
}

PathView node_view(const CadlagPath& path, std::size_t node) {
  return PathView(path, node, path.right(node));
}

namespace {
void put(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}
}  // namespace

void write_csv(std::ostream& os, const CadlagPath& path) {
  const std::size_t d = path.dim();
  os << "t";
  if (d == 1) {
    os << ",X_left,X_right";
  } else {
    for (std::size_t c = 0; c < d; ++c) os << ",X_left_" << c;
    for (std::size_t c = 0; c < d; ++c) os << ",X_right_" << c;
  }
  os << ",jump_flag\n";
  for (std::size_t i = 0; i < path.filled(); ++i) {
    put(os, path.grid().time(i));
    for (double v : path.left(i)) {
      os << ',';
      put(os, v);
    }
    for (double v : path.right(i)) {
      os << ',';
      put(os, v);
    }
    os << ',' << (path.is_jump(i) ? 1 : 0) << '\n';
  }
}

}  // namespace impulse
