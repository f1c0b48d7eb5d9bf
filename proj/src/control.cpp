#include "impulse/control.hpp"

#include <algorithm>
#include <cmath>

#include "impulse/errors.hpp"

namespace impulse {

bool mark_less(const Mark& a, const Mark& b) noexcept {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

MarkSet MarkSet::finite(std::vector<Mark> points) {
  if (points.empty()) throw InvalidInput("mark set must be nonempty");
  const std::size_t dim = points.front().size();
  for (const auto& p : points) {
    if (p.size() != dim || dim == 0) throw InvalidInput("mark set points must share a positive dimension");
    for (double c : p)
      if (!std::isfinite(c)) throw InvalidInput("mark set points must be finite");
  }
  std::sort(points.begin(), points.end(), mark_less);
  points.erase(std::unique(points.begin(), points.end()), points.end());
  MarkSet s;
  s.dim_ = dim;
  s.points_ = std::move(points);
  s.lower_ = s.points_.front();
  s.upper_ = s.points_.front();
  for (const auto& p : s.points_)
    for (std::size_t i = 0; i < dim; ++i) {
      s.lower_[i] = std::min(s.lower_[i], p[i]);
      s.upper_[i] = std::max(s.upper_[i], p[i]);
    }
  return s;
}

MarkSet MarkSet::box(Mark lower, Mark upper, int level) {
  if (lower.empty() || lower.size() != upper.size()) throw InvalidInput("box bounds must share a positive dimension");
  if (level < 0 || level > 20) throw InvalidInput("box discretization level out of range");
  for (std::size_t i = 0; i < lower.size(); ++i)
    if (!(lower[i] <= upper[i]) || !std::isfinite(lower[i]) || !std::isfinite(upper[i]))
      throw InvalidInput("box bounds must be finite with lower <= upper");
  MarkSet s;
  s.is_box_ = true;
  s.dim_ = lower.size();
  s.level_ = level;
  s.lower_ = lower;
  s.upper_ = upper;
  const std::size_t per_axis = (std::size_t{1} << level) + 1;
  std::size_t total = 1;
  for (std::size_t i = 0; i < s.dim_; ++i) total *= per_axis;
  s.points_.reserve(total);
  std::vector<std::size_t> idx(s.dim_, 0);
  for (std::size_t n = 0; n < total; ++n) {
    Mark p(s.dim_);
    for (std::size_t i = 0; i < s.dim_; ++i) {
      const double frac = static_cast<double>(idx[i]) / static_cast<double>(per_axis - 1);
      p[i] = lower[i] + (upper[i] - lower[i]) * frac;
    }
    s.points_.push_back(std::move(p));
    for (std::size_t i = s.dim_; i-- > 0;) {
      if (++idx[i] < per_axis) break;
      idx[i] = 0;
    }
  }
  std::sort(s.points_.begin(), s.points_.end(), mark_less);
  s.points_.erase(std::unique(s.points_.begin(), s.points_.end()), s.points_.end());
  return s;
}

MarkSet MarkSet::interval(double lower, double upper, int level) {
  return box(Mark{lower}, Mark{upper}, level);
}

bool MarkSet::contains(const Mark& b, double tol) const {
  if (b.size() != dim_) return false;
  if (is_box_) {
    for (std::size_t i = 0; i < dim_; ++i)
      if (b[i] < lower_[i] - tol || b[i] > upper_[i] + tol) return false;
    return true;
  }
  return std::any_of(points_.begin(), points_.end(), [&](const Mark& p) {
    for (std::size_t i = 0; i < dim_; ++i)
      if (std::abs(p[i] - b[i]) > tol) return false;
    return true;
  });
}

DyadicGrid::DyadicGrid(int level, double horizon) : level_(level), horizon_(horizon) {
  if (level < 0 || level > 30) throw InvalidInput("grid level out of range");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InvalidInput("grid horizon must be positive");
  step_ = std::ldexp(1.0, -level);
  const double scaled = horizon / step_;
  last_ = static_cast<std::size_t>(std::ceil(scaled - 1e-9 * std::max(1.0, scaled)));
  if (last_ == 0) last_ = 1;
}

std::optional<std::size_t> DyadicGrid::node_of(double t) const noexcept {
  if (t < -1e-12 || !std::isfinite(t)) return std::nullopt;
  const double scaled = t / step_;
  const double r = std::round(scaled);
  if (std::abs(scaled - r) > 1e-9 * std::max(1.0, std::abs(scaled))) return std::nullopt;
  if (r > static_cast<double>(last_)) return std::nullopt;
  return static_cast<std::size_t>(r);
}

std::size_t DyadicGrid::ceil_node(double t) const noexcept {
  if (t <= 0.0) return 0;
  if (auto n = node_of(t)) return *n;
  return static_cast<std::size_t>(std::ceil(t / step_));
}

std::size_t DyadicGrid::floor_node(double t) const noexcept {
  if (t <= 0.0) return 0;
  if (auto n = node_of(t)) return *n;
  return static_cast<std::size_t>(std::floor(t / step_));
}

double ImpulseControl::last_time() const noexcept {
  return interventions_.empty() ? 0.0 : interventions_.back().time;
}

bool operator==(const ImpulseControl& a, const ImpulseControl& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].time != b[i].time || a[i].mark != b[i].mark) return false;
  return true;
}

ImpulseControl compose(const ImpulseControl& v, const ImpulseControl& w) {
  std::vector<Intervention> out = v.interventions();
  out.reserve(v.size() + w.size());
  const double floor_time = v.empty() ? -INFINITY : v.last_time();
  for (const auto& iv : w) out.push_back({std::max(iv.time, floor_time), iv.mark});
  return ImpulseControl(std::move(out));
}

ImpulseControl truncate(const ImpulseControl& v, std::size_t k) {
  const auto& iv = v.interventions();
  return ImpulseControl({iv.begin(), iv.begin() + static_cast<std::ptrdiff_t>(std::min(k, iv.size()))});
}

std::optional<std::string> validate(const ImpulseControl& v, const MarkSet& marks) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& iv = v[i];
    if (!std::isfinite(iv.time) || iv.time < 0.0)
      return "negative or non-finite time at index " + std::to_string(i + 1);
    if (i > 0 && iv.time < v[i - 1].time) return "times decrease at index " + std::to_string(i + 1);
    if (!marks.contains(iv.mark)) return "mark outside U at index " + std::to_string(i + 1);
  }
  return std::nullopt;
}

nlohmann::json mark_to_json(const Mark& b) {
  if (b.size() == 1) return b.front();
  return nlohmann::json(b);
}

Mark mark_from_json(const nlohmann::json& j) {
  if (j.is_number()) return Mark{j.get<double>()};
  if (j.is_array()) return j.get<Mark>();
  throw InvalidInput("mark must be a number or an array of numbers");
}

nlohmann::json to_json(const ImpulseControl& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& iv : v) arr.push_back({{"t", iv.time}, {"b", mark_to_json(iv.mark)}});
  return arr;
}

ImpulseControl control_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw InvalidInput("control must be a JSON array of {t, b} records");
  std::vector<Intervention> out;
  for (const auto& rec : j) {
    if (!rec.is_object() || !rec.contains("t") || !rec.contains("b"))
      throw InvalidInput("control record must have fields t and b");
    out.push_back({rec.at("t").get<double>(), mark_from_json(rec.at("b"))});
  }
  return ImpulseControl(std::move(out));
}

}  // namespace impulse
