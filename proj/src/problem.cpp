#include "impulse/problem.hpp"

#include <cmath>

#include "impulse/errors.hpp"

namespace impulse {

double ProblemSpec::disc(double t) const { return std::exp(-rho(t)); }

double sample_eta(const HorizonSpec& h, Rng& rng) {
  if (!h.eta_atoms.empty()) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (const auto& [t, p] : h.eta_atoms) {
      acc += p;
      if (u < acc) return t;
    }
    return h.eta_atoms.back().first;
  }
  if (h.eta_sampler) return h.eta_sampler(rng);
  throw InvalidInput("random horizon needs eta atoms or an eta sampler");
}

PathField scalar_field(std::function<double(double, double)> f) {
  return [f = std::move(f)](const PathView& v, std::span<double> out) { out[0] = f(v.time(), v.x()); };
}

JumpField scalar_jump(std::function<double(double, double, double)> f) {
  return [f = std::move(f)](const PathView& v, double z, std::span<double> out) {
    out[0] = f(v.time(), v.x(), z);
  };
}

ImpulseField scalar_impulse(std::function<double(double, double, double)> f) {
  return [f = std::move(f)](const PathView& v, const Mark& b, std::span<double> out) {
    out[0] = f(v.time(), v.x(), b.at(0));
  };
}

PathField zero_field() {
  return [](const PathView&, std::span<double> out) {
    for (double& o : out) o = 0.0;
  };
}

}  // namespace impulse
