#include <doctest.h>

#include <algorithm>

#include "impulse/control.hpp"

using namespace impulse;

namespace {

ImpulseControl ctl(std::initializer_list<std::pair<double, double>> items) {
  std::vector<Intervention> v;
  for (auto [t, b] : items) v.push_back({t, {b}});
  return ImpulseControl(std::move(v));
}

}  // namespace

TEST_CASE("compose clamps appended times to the last time of v") {
  const ImpulseControl r = compose(ctl({{1.0, 7.0}}), ctl({{0.5, 8.0}}));
  REQUIRE(r.size() == 2);
  CHECK(r[0].time == 1.0);
  CHECK(r[1].time == 1.0);
  CHECK(r[0].mark == Mark{7.0});
  CHECK(r[1].mark == Mark{8.0});
}

TEST_CASE("compose with the empty control is the identity") {
  const ImpulseControl v = ctl({{0.25, 1.0}, {0.75, 2.0}});
  CHECK(compose(ImpulseControl{}, v) == v);
  CHECK(compose(v, ImpulseControl{}) == v);
}

TEST_CASE("compose is associative and truncation recovers the prefix") {
  const ImpulseControl u = ctl({{0.5, 1.0}, {2.0, 2.0}});
  const ImpulseControl v = ctl({{1.0, 3.0}});
  const ImpulseControl w = ctl({{0.0, 4.0}, {3.0, 5.0}});
  CHECK(compose(compose(u, v), w) == compose(u, compose(v, w)));
  CHECK(truncate(compose(u, w), u.size()) == u);
  const ImpulseControl uv = compose(u, v);
  for (std::size_t i = 0; i < u.size(); ++i) CHECK(uv[i].time == u[i].time);
}

TEST_CASE("truncate keeps the first k interventions") {
  const ImpulseControl v = ctl({{1.0, 1.0}, {2.0, 2.0}});
  CHECK(truncate(v, 1) == ctl({{1.0, 1.0}}));
  CHECK(truncate(v, 0).empty());
  CHECK(truncate(ctl({{1.0, 1.0}}), 5) == ctl({{1.0, 1.0}}));
}

TEST_CASE("validate reports the first violated invariant") {
  const MarkSet U = MarkSet::finite({{1.0}, {2.0}});
  CHECK_FALSE(validate(ImpulseControl{}, U).has_value());
  CHECK_FALSE(validate(ctl({{0.5, 1.0}, {0.5, 2.0}}), U).has_value());

  const auto dec = validate(ctl({{1.0, 1.0}, {0.5, 2.0}}), U);
  REQUIRE(dec.has_value());
  CHECK(dec->find("times decrease at index 2") != std::string::npos);

  const auto out = validate(ctl({{1.0, 5.0}}), U);
  REQUIRE(out.has_value());
  CHECK(out->find("mark outside U") != std::string::npos);

  CHECK(validate(ctl({{-1.0, 1.0}}), U).has_value());
}

TEST_CASE("controls round-trip through JSON") {
  const ImpulseControl v = ctl({{0.25, 1.5}, {0.5, -2.0}});
  const nlohmann::json j = to_json(v);
  CHECK(j.is_array());
  CHECK(j[0]["t"] == 0.25);
  CHECK(j[0]["b"] == 1.5);
  CHECK(control_from_json(j) == v);
  CHECK(control_from_json(nlohmann::json::parse(R"([{"t": 1, "b": [2]}])")) == ctl({{1.0, 2.0}}));
}

TEST_CASE("interval mark sets are dyadic and contain their endpoints") {
  const MarkSet U = MarkSet::interval(0.0, 1.0, 2);
  REQUIRE(U.points().size() == 5);
  CHECK(U.points().front() == Mark{0.0});
  CHECK(U.points().back() == Mark{1.0});
  CHECK(U.contains({0.3}));
  CHECK_FALSE(U.contains({1.1}));
  for (std::size_t i = 1; i < U.points().size(); ++i) CHECK(mark_less(U.points()[i - 1], U.points()[i]));
  // Refining the level keeps every coarser point.
  const MarkSet fine = MarkSet::interval(0.0, 1.0, 3);
  for (const Mark& b : U.points())
    CHECK(std::find(fine.points().begin(), fine.points().end(), b) != fine.points().end());
}

TEST_CASE("dyadic grid covers the horizon") {
  const DyadicGrid g(3, 1.0);
  CHECK(g.step() == 0.125);
  CHECK(g.last() == 8);
  CHECK(g.end() >= 1.0);
  CHECK(g.node_of(0.5) == std::optional<std::size_t>{4});
  CHECK_FALSE(g.node_of(0.3).has_value());
  CHECK(g.ceil_node(0.3) == 3);
  CHECK(g.floor_node(0.3) == 2);
  const DyadicGrid uneven(2, 0.9);
  CHECK(uneven.end() >= 0.9);
  CHECK(uneven.last() == 4);
}
