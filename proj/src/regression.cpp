#include "impulse/regression.hpp"

#include <cmath>
#include <functional>

#include "impulse/errors.hpp"

namespace impulse {

namespace {

std::vector<std::vector<int>> monomials(std::size_t dim, int degree) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(dim, 0);
  for (int total = 0; total <= degree; ++total) {
    std::function<void(std::size_t, int)> rec = [&](std::size_t i, int left) {
      if (i + 1 == dim || dim == 0) {
        if (dim > 0) cur[i] = left;
        out.push_back(cur);
        if (dim > 0) cur[i] = 0;
        return;
      }
      for (int e = left; e >= 0; --e) {
        cur[i] = e;
        rec(i + 1, left - e);
      }
      cur[i] = 0;
    };
    if (dim == 0) {
      if (total == 0) out.push_back({});
      continue;
    }
    rec(0, total);
  }
  return out;
}

double eval_monomial(const std::vector<int>& e, const double* z) {
  double v = 1.0;
  for (std::size_t i = 0; i < e.size(); ++i)
    for (int k = 0; k < e[i]; ++k) v *= z[i];
  return v;
}

}  // namespace

std::size_t Basis::size(std::size_t features) const {
  if (kind == Kind::Indicator) return 1;
  return monomials(features, degree).size();
}

SurfaceFit SurfaceFit::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Basis& basis, double ridge,
                           std::vector<std::string>* warnings, std::span<const char> mask) {
  if (X.rows() != y.size()) throw InvalidInput("regression: feature and target sizes differ");
  if (ridge < 0.0) throw InvalidInput("regression: ridge must be nonnegative");
  const auto n_all = static_cast<std::size_t>(X.rows());
  const auto f = static_cast<std::size_t>(X.cols());
  auto active = [&](std::size_t i) { return mask.empty() || mask[i] != 0; };
  std::size_t n = 0;
  double ysum = 0.0;
  for (std::size_t i = 0; i < n_all; ++i)
    if (active(i)) {
      ++n;
      ysum += y[static_cast<Eigen::Index>(i)];
    }
  SurfaceFit s;
  s.basis_ = basis;
  s.fallback_ = n ? ysum / static_cast<double>(n) : 0.0;
  if (n == 0) {
    s.coef_ = Eigen::VectorXd::Zero(0);
    return s;
  }

  if (basis.kind == Basis::Kind::Indicator) {
    std::map<std::vector<double>, std::pair<double, std::size_t>> acc;
    std::vector<double> key(f);
    for (std::size_t i = 0; i < n_all; ++i) {
      if (!active(i)) continue;
      for (std::size_t c = 0; c < f; ++c) key[c] = X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
      auto& a = acc[key];
      a.first += y[static_cast<Eigen::Index>(i)];
      a.second += 1;
    }
    for (const auto& [k, a] : acc) s.cells_[k] = a.first / static_cast<double>(a.second);
    return s;
  }

  s.mean_.assign(f, 0.0);
  s.scale_.assign(f, 1.0);
  std::vector<char> constant(f, 0);
  for (std::size_t c = 0; c < f; ++c) {
    double m = 0.0;
    for (std::size_t i = 0; i < n_all; ++i)
      if (active(i)) m += X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
    m /= static_cast<double>(n);
    double v = 0.0;
    for (std::size_t i = 0; i < n_all; ++i)
      if (active(i)) {
        const double d = X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) - m;
        v += d * d;
      }
    v /= static_cast<double>(n);
    s.mean_[c] = m;
    if (v > 1e-24 * std::max(1.0, m * m)) {
      s.scale_[c] = std::sqrt(v);
    } else {
      constant[c] = 1;
    }
  }
  for (auto& e : monomials(f, basis.degree)) {
    bool keep = true;
    for (std::size_t c = 0; c < f; ++c)
      if (constant[c] && e[c] > 0) keep = false;
    if (keep) s.monomials_.push_back(std::move(e));
  }
  const auto p = static_cast<Eigen::Index>(s.monomials_.size());
  Eigen::MatrixXd A(static_cast<Eigen::Index>(n), p);
  Eigen::VectorXd b(static_cast<Eigen::Index>(n));
  std::vector<double> z(f);
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < n_all; ++i) {
    if (!active(i)) continue;
    for (std::size_t c = 0; c < f; ++c)
      z[c] = (X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) - s.mean_[c]) / s.scale_[c];
    for (Eigen::Index k = 0; k < p; ++k) A(r, k) = eval_monomial(s.monomials_[static_cast<std::size_t>(k)], z.data());
    b[r] = y[static_cast<Eigen::Index>(i)];
    ++r;
  }
  const double nn = static_cast<double>(n);
  Eigen::MatrixXd G = (A.transpose() * A) / nn;
  const Eigen::VectorXd rhs = (A.transpose() * b) / nn;
  auto solve = [&](double lambda, Eigen::VectorXd& out) {
    Eigen::MatrixXd M = G;
    M.diagonal().array() += lambda;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return false;
    out = ldlt.solve(rhs);
    if (!out.allFinite()) return false;
    const double resid = (M * out - rhs).norm();
    return resid <= 1e-6 * std::max(1.0, rhs.norm());
  };
  if (!solve(ridge, s.coef_)) {
    const double fallback = std::max(1e-4, 1e-4 * G.diagonal().mean());
    if (warnings) warnings->push_back("singular regression; refit with ridge " + std::to_string(fallback));
    if (!solve(fallback, s.coef_)) throw InternalConsistencyError("regression failed even with ridge fallback");
  }
  return s;
}

double SurfaceFit::predict(std::span<const double> features) const {
  if (basis_.kind == Basis::Kind::Indicator) {
    auto it = cells_.find(std::vector<double>(features.begin(), features.end()));
    return it == cells_.end() ? fallback_ : it->second;
  }
  if (coef_.size() == 0) return fallback_;
  double z[16];
  std::vector<double> big;
  double* zp = z;
  if (features.size() > 16) {
    big.resize(features.size());
    zp = big.data();
  }
  for (std::size_t c = 0; c < features.size(); ++c) zp[c] = (features[c] - mean_[c]) / scale_[c];
  double v = 0.0;
  for (std::size_t k = 0; k < monomials_.size(); ++k) v += coef_[static_cast<Eigen::Index>(k)] * eval_monomial(monomials_[k], zp);
  return v;
}

std::size_t SurfaceFit::parameters() const noexcept {
  return basis_.kind == Basis::Kind::Indicator ? cells_.size() : monomials_.size();
}

nlohmann::json SurfaceFit::to_json() const {
  nlohmann::json j;
  if (basis_.kind == Basis::Kind::Indicator) {
    j["basis"] = "indicator";
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& [k, v] : cells_) cells.push_back({{"features", k}, {"value", v}});
    j["cells"] = cells;
  } else {
    j["basis"] = "polynomial";
    j["degree"] = basis_.degree;
    j["mean"] = mean_;
    j["scale"] = scale_;
    j["monomials"] = monomials_;
    j["coefficients"] = std::vector<double>(coef_.data(), coef_.data() + coef_.size());
  }
  j["fallback"] = fallback_;
  return j;
}

}  // namespace impulse
