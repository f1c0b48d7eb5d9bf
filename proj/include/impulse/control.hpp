#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace impulse {

/// A point of the mark set U (an impulse value), possibly multidimensional.
using Mark = std::vector<double>;

/// Lexicographic total order on marks; argmax ties resolve to the smallest mark.
bool mark_less(const Mark& a, const Mark& b) noexcept;

/// Compact mark set U: either a finite point list or a closed box searched on a
/// dyadic discretization of the given level.
class MarkSet {
 public:
  static MarkSet finite(std::vector<Mark> points);
  static MarkSet box(Mark lower, Mark upper, int level);
  /// Convenience for scalar marks.
  static MarkSet interval(double lower, double upper, int level);

  bool is_box() const noexcept { return is_box_; }
  std::size_t dim() const noexcept { return dim_; }
  bool contains(const Mark& b, double tol = 1e-12) const;
  /// Search points in increasing mark_less order.
  const std::vector<Mark>& points() const noexcept { return points_; }
  int level() const noexcept { return level_; }
  const Mark& lower() const noexcept { return lower_; }
  const Mark& upper() const noexcept { return upper_; }

 private:
  bool is_box_ = false;
  std::size_t dim_ = 0;
  int level_ = 0;
  Mark lower_, upper_;
  std::vector<Mark> points_;
};

/// Nodes {0, 2^-l, 2*2^-l, ...} covering [0, T]; the last node is >= T.
class DyadicGrid {
 public:
  DyadicGrid(int level, double horizon);

  int level() const noexcept { return level_; }
  double step() const noexcept { return step_; }
  /// Index of the last node.
  std::size_t last() const noexcept { return last_; }
  std::size_t size() const noexcept { return last_ + 1; }
  double time(std::size_t i) const noexcept { return static_cast<double>(i) * step_; }
  double end() const noexcept { return time(last_); }
  double horizon() const noexcept { return horizon_; }

  /// Node index if t lies on the grid (to 1e-9 relative), otherwise nullopt.
  std::optional<std::size_t> node_of(double t) const noexcept;
  /// Smallest node index whose time is >= t.
  std::size_t ceil_node(double t) const noexcept;
  /// Largest node index whose time is <= t.
  std::size_t floor_node(double t) const noexcept;

 private:
  int level_;
  double horizon_;
  double step_;
  std::size_t last_;
};

struct Intervention {
  double time = 0.0;
  Mark mark;
};

/// A finite impulse control (t_1..t_n; b_1..b_n). Invariants are checked by
/// validate(), not enforced at construction, so invalid inputs can be reported.
class ImpulseControl {
 public:
  ImpulseControl() = default;
  explicit ImpulseControl(std::vector<Intervention> interventions)
      : interventions_(std::move(interventions)) {}

  std::size_t size() const noexcept { return interventions_.size(); }
  bool empty() const noexcept { return interventions_.empty(); }
  const Intervention& operator[](std::size_t i) const { return interventions_[i]; }
  const std::vector<Intervention>& interventions() const noexcept { return interventions_; }
  /// Time of the last intervention, or 0 for the empty control.
  double last_time() const noexcept;

  auto begin() const noexcept { return interventions_.begin(); }
  auto end() const noexcept { return interventions_.end(); }

  friend bool operator==(const ImpulseControl& a, const ImpulseControl& b);

 private:
  std::vector<Intervention> interventions_;
};

/// v ∘ w: w's times are clamped from below by v's last time and appended.
ImpulseControl compose(const ImpulseControl& v, const ImpulseControl& w);
/// [v]_k: the first min(k, n) interventions.
ImpulseControl truncate(const ImpulseControl& v, std::size_t k);
/// First violated invariant, or nullopt when the control is valid for U.
std::optional<std::string> validate(const ImpulseControl& v, const MarkSet& marks);

/// Controls serialize as a JSON array of {"t": time, "b": mark}. Scalar marks
/// are written as numbers; either form is accepted on input.
nlohmann::json to_json(const ImpulseControl& v);
ImpulseControl control_from_json(const nlohmann::json& j);

nlohmann::json mark_to_json(const Mark& b);
Mark mark_from_json(const nlohmann::json& j);

}  // namespace impulse
