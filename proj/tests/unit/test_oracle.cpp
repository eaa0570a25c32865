#include <cmath>
#include <limits>

#include "doctest.h"
#include "json.hpp"
#include "pmpthermo/error.hpp"
#include "pmpthermo/lindblad.hpp"
#include "pmpthermo/oracle.hpp"
#include "pmpthermo/planner.hpp"

using namespace pmpthermo;
using namespace pmpthermo::oracle;

namespace {

constexpr double kZ = 0.3;

// every (level, bath) sequence, no pruning
struct Enumerated {
  double best = std::numeric_limits<double>::infinity();
  std::uint64_t feasible = 0;
};
Enumerated enumerate_all(double p_in, double p_out, const ProtocolGrid& g, double tol) {
  Enumerated e;
  const int choices = 2 * static_cast<int>(g.u_levels.size());
  std::vector<int> digit(static_cast<std::size_t>(g.n_intervals), 0);
  const double dt = g.tau / g.n_intervals;
  while (true) {
    double p = p_in, heat = 0.0;
    for (int d : digit) {
      const double u = g.u_levels[static_cast<std::size_t>(d / 2)];
      const double beta = d % 2 == 0 ? 1.0 : kZ;
      const double n = 1.0 / (1.0 + std::exp(beta * u));
      const double next = n + (p - n) * std::exp(-dt);
      heat -= u * (next - p);
      p = next;
    }
    if (std::fabs(p - p_out) <= tol) {
      ++e.feasible;
      e.best = std::min(e.best, heat);
    }
    std::size_t k = 0;
    while (k < digit.size() && ++digit[k] == choices) digit[k++] = 0;
    if (k == digit.size()) break;
  }
  return e;
}

}  // namespace

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(ProtocolGrid::uniform(9, 4, 1.0, 12.0, 5.0).validate(), DomainError);
  CHECK_THROWS_AS(ProtocolGrid::uniform(4, 13, 1.0, 12.0, 5.0).validate(), DomainError);
  CHECK_THROWS_AS(ProtocolGrid::uniform(4, 4, 1.0, 12.0, -1.0).validate(), DomainError);
  const auto g = ProtocolGrid::uniform(4, 12, 1.0, 12.0, 5.0);
  CHECK(g.u_levels.front() == 1.0);
  CHECK(g.u_levels.back() == 12.0);
  CHECK(g.u_levels[1] == doctest::Approx(2.0));
}

TEST_CASE("exact propagation matches master-equation integration") {
  PiecewiseProtocol pr;
  pr.u = {1.0, 4.0, 2.5, 7.0};
  pr.bath = {Branch::cold, Branch::hot, Branch::cold, Branch::hot};
  pr.durations = {0.7, 1.3, 0.4, 2.0};
  const auto prop = propagate(0.2, pr, kZ);

  Protocol protocol;
  for (std::size_t i = 0; i < pr.size(); ++i) {
    const bool cold = pr.bath[i] == Branch::cold;
    protocol.append_constant(pr.durations[i], ControlVector{{pr.u[i]}, cold ? 1.0 : 0.0, cold ? 0.0 : 1.0});
  }
  const auto res = integrate(DensityMatrix::qubit(0.2), protocol, OpenSystem::qubit(1.0, kZ));
  CHECK(prop.p_final == doctest::Approx(res.final_state(1, 1).real()).epsilon(1e-9));
  CHECK(prop.heat == doctest::Approx(res.ledger.heat_released).epsilon(1e-8));
  CHECK(pr.total_time() == doctest::Approx(4.4));
}

TEST_CASE("pruned search equals full enumeration") {
  for (int n : {2, 3, 4}) {
    const auto g = ProtocolGrid::uniform(n, 8, 1.0, 12.0, 6.969213981);
    const auto ref = enumerate_all(0.07, 0.26, g, 2e-2);
    SearchOptions opts;
    opts.target_tolerance = 2e-2;
    const auto r = grid_search(0.07, 0.26, g, kZ, opts);
    REQUIRE(ref.feasible > 0);
    CHECK(r.feasible);
    CHECK(r.q_best == doctest::Approx(ref.best).epsilon(1e-13));
    CHECK(propagate(0.07, r.protocol, kZ).heat == doctest::Approx(r.q_best).epsilon(1e-13));
  }
}

TEST_CASE("infeasible grid reports the closest approach") {
  const auto g = ProtocolGrid::uniform(2, 3, 1.0, 2.0, 0.05);
  const auto r = grid_search(0.07, 0.4, g, kZ);
  CHECK_FALSE(r.feasible);
  CHECK(r.closest_approach > 1e-3);
}

TEST_CASE("search is independent of the thread count") {
  const auto g = ProtocolGrid::uniform(5, 12, 1.0, 12.0, 6.969213981);
  SearchOptions one, three;
  three.threads = 3;
  const auto a = grid_search(0.07, 0.26, g, kZ, one);
  const auto b = grid_search(0.07, 0.26, g, kZ, three);
  CHECK(a.q_best == b.q_best);
  CHECK(a.protocol.u == b.protocol.u);
  CHECK(a.protocol.bath == b.protocol.bath);
}

TEST_CASE("terminal repair and local refinement") {
  const auto g = ProtocolGrid::uniform(6, 12, 1.0, 12.0, 6.969213981);
  const auto seed = grid_search(0.07, 0.26, g, kZ).protocol;
  auto repaired = seed;
  REQUIRE(repair_terminal(0.07, 0.26, repaired, kZ, 50.0));
  CHECK(propagate(0.07, repaired, kZ).p_final == doctest::Approx(0.26).epsilon(1e-12));

  const auto refined = local_refine(0.07, 0.26, seed, kZ);
  REQUIRE(refined.feasible);
  REQUIRE_FALSE(refined.history.empty());
  for (std::size_t i = 1; i < refined.history.size(); ++i) CHECK(refined.history[i] <= refined.history[i - 1]);
  const auto final_prop = propagate(0.07, refined.protocol, kZ);
  CHECK(final_prop.p_final == doctest::Approx(0.26).epsilon(1e-10));
  CHECK(refined.protocol.total_time() == doctest::Approx(6.969213981).epsilon(1e-12));
}

TEST_CASE("brute force does not beat the planner") {
  const double tau = plan::build_trajectory({0.07, 1.0}, {0.26, 6.0}, -0.05, kZ, 0).total_time;
  const auto ref = pmp_reference(0.07, 1.0, 0.26, 6.0, kZ, tau, 1e-3);
  const auto report = compare(0.07, 0.26, ProtocolGrid::uniform(6, 12, 1.0, 12.0, tau), kZ, ref);
  CHECK(report.q_brute >= report.q_pmp - report.discretization_bound);
  CHECK(report.gap == doctest::Approx(report.q_brute - report.q_pmp));
  const auto j = nlohmann::json::parse(report_json(report));
  for (const char* key : {"q_pmp", "q_brute", "gap", "n_protocols_evaluated", "wall_time"}) CHECK(j.contains(key));
  CHECK(j.size() == 5);
}
