#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace impulse {

struct Basis {
  enum class Kind { Polynomial, Indicator };
  Kind kind = Kind::Polynomial;
  int degree = 2;  ///< total degree for polynomial bases

  /// Number of basis functions for `features` inputs (indicator bases are data-dependent).
  std::size_t size(std::size_t features) const;
};

/// Ridge least-squares fit of y on a basis of standardized features.
/// Polynomial bases use all monomials of total degree <= degree; indicator
/// bases treat each distinct feature vector as its own cell (a saturated fit).
class SurfaceFit {
 public:
  /// Rows of X with mask[i] == 0 are ignored (mask may be empty).
  static SurfaceFit fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Basis& basis, double ridge,
                        std::vector<std::string>* warnings = nullptr, std::span<const char> mask = {});

  double predict(std::span<const double> features) const;
  std::size_t parameters() const noexcept;
  nlohmann::json to_json() const;

 private:
  Basis basis_;
  std::vector<double> mean_, scale_;
  std::vector<std::vector<int>> monomials_;
  Eigen::VectorXd coef_;
  std::map<std::vector<double>, double> cells_;
  double fallback_ = 0.0;
};

}  // namespace impulse
