#include <cmath>
#include <vector>

#include "doctest.h"
#include "mcsim/core.hpp"

using namespace mcsim;
using doctest::Approx;

namespace {

DvfsParams fig_params() {
  DvfsParams p;
  p.f_base = 4.0e9;
  p.f_turbo = 4.4e9;
  p.v_dd = 1.2;
  p.v_min = 1.0;
  p.tdp_watts = 88.0;
  return p;
}

// least-squares slope of ln(P) against ln(f) over sampled points
double loglog_slope(const DvfsParams& p, double f_lo, double f_hi, int n) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    double f = f_lo + (f_hi - f_lo) * i / (n - 1);
    double x = std::log(f);
    double y = std::log(dynamic_power(p, f));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_CASE("power curve is calibrated to the TDP at the base frequency") {
  DvfsParams p = fig_params();
  CHECK(dynamic_power(p, 4.0e9) == 88.0);  // exact by construction
  CHECK(knee_frequency(p) == Approx(4.0e9 / 1.2).epsilon(1e-12));
  // below the knee the voltage floor makes P linear in f
  CHECK(dynamic_power(p, 2.0e9) == Approx(88.0 * (1.0 / 1.2) * (1.0 / 1.2) * 0.5).epsilon(1e-12));
  CHECK(dynamic_power(p, 2.0e9) == Approx(30.5555555555).epsilon(1e-9));
  // at the knee
  CHECK(dynamic_power(p, knee_frequency(p)) == Approx(50.925925925925).epsilon(1e-9));
  // above the knee the curve is cubic: P(f_turbo) = tdp * 1.1^3
  CHECK(dynamic_power(p, 4.4e9) == Approx(88.0 * 1.1 * 1.1 * 1.1).epsilon(1e-12));
  CHECK(dynamic_power(p, 4.4e9) == Approx(117.128).epsilon(1e-9));
}

TEST_CASE("the two regime formulas agree at the knee") {
  DvfsParams p = fig_params();
  double k = knee_frequency(p);
  double below = dynamic_power(p, k * (1.0 - 1e-9));
  double above = dynamic_power(p, k * (1.0 + 1e-9));
  double at = dynamic_power(p, k);
  CHECK(std::abs(below - at) / at < 1e-8);
  CHECK(std::abs(above - at) / at < 1e-8);
}

TEST_CASE("log-log slopes: cubic above the knee, linear below") {
  DvfsParams p = fig_params();
  double k = knee_frequency(p);
  double hi = loglog_slope(p, k * 1.001, p.f_turbo, 64);
  double lo = loglog_slope(p, 0.5e9, k * 0.999, 64);
  CHECK(hi == Approx(3.0).epsilon(0.05 / 3.0));
  CHECK(lo == Approx(1.0).epsilon(0.01));
}

TEST_CASE("frequencies outside (0, f_turbo] are rejected") {
  DvfsParams p = fig_params();
  CHECK_THROWS_AS(dynamic_power(p, 0.0), SimError);
  CHECK_THROWS_AS(dynamic_power(p, -1.0e9), SimError);
  CHECK_THROWS_AS(dynamic_power(p, 4.5e9), SimError);
  CHECK_NOTHROW(dynamic_power(p, 4.4e9));
  try {
    dynamic_power(p, 9e9);
  } catch (const SimError& e) {
    CHECK(e.code() == Err::FrequencyOutOfRange);
  }
}

TEST_CASE("governor step selection") {
  const std::size_t n = 4;
  CHECK(governor_select(GovernorPolicy::Performance, 0.0, 0, n) == 3);
  CHECK(governor_select(GovernorPolicy::Performance, 1.0, 2, n) == 3);
  CHECK(governor_select(GovernorPolicy::Powersave, 1.0, 3, n) == 0);
  // ondemand: up above 0.8, down below 0.3, hold in between
  CHECK(governor_select(GovernorPolicy::Ondemand, 0.9, 1, n) == 2);
  CHECK(governor_select(GovernorPolicy::Ondemand, 0.2, 1, n) == 0);
  CHECK(governor_select(GovernorPolicy::Ondemand, 0.5, 1, n) == 1);
  CHECK(governor_select(GovernorPolicy::Ondemand, 0.8, 1, n) == 1);   // boundary holds
  CHECK(governor_select(GovernorPolicy::Ondemand, 0.3, 1, n) == 1);   // boundary holds
  CHECK(governor_select(GovernorPolicy::Ondemand, 0.95, 3, n) == 3);  // clamped at top
  CHECK(governor_select(GovernorPolicy::Ondemand, 0.05, 0, n) == 0);  // clamped at bottom
}

TEST_CASE("store buffer FIFO and occupancy") {
  StoreBuffer sb(2);
  CHECK(sb.enabled());
  CHECK(sb.empty());
  CHECK(!sb.full());
  sb.push({0x100, 8, 1, 0});
  sb.push({0x200, 8, 2, 1});
  CHECK(sb.full());
  CHECK(sb.front().address == 0x100);
  sb.pop();
  CHECK(sb.front().address == 0x200);
  CHECK(!sb.full());
  StoreBuffer off(0);
  CHECK(!off.enabled());
}

TEST_CASE("forwarding returns the youngest covering store") {
  StoreBuffer sb(8);
  sb.push({0x1000, 8, 0xAAAA, 0});
  sb.push({0x1000, 8, 0xBBBB, 1});
  auto v = sb.forward(0x1000, 8);
  REQUIRE(v.has_value());
  CHECK(*v == 0xBBBB);
}

TEST_CASE("forwarding carves bytes out of a wider store") {
  StoreBuffer sb(8);
  sb.push({0x1000, 8, 0x0807060504030201ull, 0});
  CHECK(sb.forward(0x1000, 8).value() == 0x0807060504030201ull);
  CHECK(sb.forward(0x1002, 2).value() == 0x0403);
  CHECK(sb.forward(0x1007, 1).value() == 0x08);
  CHECK(sb.forward(0x1000, 4).value() == 0x04030201);
  CHECK(!sb.forward(0x0ff8, 8).has_value());
  CHECK(!sb.forward(0x1008, 8).has_value());
}

TEST_CASE("partial overlap forces a load to wait") {
  StoreBuffer sb(8);
  sb.push({0x1000, 4, 0xdead, 0});
  // [0x1002, 0x1006) overlaps [0x1000, 0x1004) without being covered
  CHECK(sb.partial_overlap(0x1002, 4));
  CHECK(!sb.forward(0x1002, 4).has_value());
  // fully covered access: forwardable, not partial
  CHECK(!sb.partial_overlap(0x1000, 2));
  CHECK(sb.forward(0x1000, 2).value() == 0xdead);
  // disjoint access: neither
  CHECK(!sb.partial_overlap(0x1008, 4));
  CHECK(!sb.forward(0x1008, 4).has_value());
  // a wider load over a narrower store is a partial overlap too
  CHECK(sb.partial_overlap(0x0ffc, 8));
}
