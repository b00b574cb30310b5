#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "coxstaff/experiments.hpp"
#include "coxstaff/io.hpp"

using namespace coxstaff;

TEST_CASE("model document round trip") {
  ModelSpec m;
  m.pattern = sine_pattern(17.5, 0.8);
  m.pattern.delta = 0.5;
  m.params = {0.87, 7, 0.13, WDistribution::lognormal};
  const json doc = model_to_json(m);
  for (const char* key : {"delta", "rates", "alpha", "lag", "var_w", "w_dist"}) CHECK(doc.contains(key));
  const ModelSpec back = model_from_json(json::parse(doc.dump()));
  CHECK(back.pattern.rates == m.pattern.rates);
  CHECK(back.pattern.delta == 0.5);
  CHECK(back.params.alpha == 0.87);
  CHECK(back.params.lag == 7);
  CHECK(back.params.var_w == 0.13);
  CHECK(back.params.w_dist == WDistribution::lognormal);
}

TEST_CASE("model document errors") {
  CHECK_THROWS_AS(model_from_json(json::parse(R"({"delta":1,"rates":[1,2,3]})")), DomainError);
  CHECK_THROWS_AS(model_from_json(json::parse(R"({"delta":1,"rates":[1,2,3],"alpha":0.5,"lag":2,"var_w":0.1})")),
                  ConstraintError);
  CHECK_THROWS_AS(model_from_json(json::parse(R"({"delta":1,"rates":"x","alpha":0.5,"lag":0,"var_w":0.1})")),
                  DomainError);
  const auto m = model_from_json(json::parse(R"({"delta":1,"rates":[1,2,3],"alpha":0.5,"lag":1,"var_w":0})"));
  CHECK(m.params.w_dist == WDistribution::deterministic);
  CHECK_THROWS_AS(read_model("/nonexistent/model.json"), IoError);
}

TEST_CASE("number formatting round trips") {
  for (double x : {0.1, 1.0 / 3.0, 35.0, 1e-300, 123456.789, -2.5}) CHECK(std::stod(format_double(x)) == x);
  CHECK(format_double(35.0) == "35");
  CHECK(format_double(std::nan("")) == "nan");
}

TEST_CASE("moment and schedule CSV") {
  MomentCurve c;
  c.m_inf = Eigen::VectorXd::LinSpaced(3, 1.0, 3.0);
  c.v_inf = Eigen::VectorXd::LinSpaced(3, 2.0, 4.0);
  std::ostringstream out;
  write_moments_csv(out, c);
  CHECK(out.str() == "slot,m_inf,v_inf\n0,1,2\n1,2,3\n2,3,4\n");

  StaffingSchedule s;
  s.levels = {4, 7, 1};
  s.epsilon = 0.05;
  s.beta = 1.5;
  s.rule = StaffingRule::slope;
  s.gamma = 0.25;
  std::ostringstream sched;
  write_schedule_csv(sched, s);
  CHECK(sched.str() == "slot,servers\n0,4\n1,7\n2,1\n");
  std::istringstream in(sched.str());
  CHECK(read_schedule_csv(in).levels == s.levels);
  const json meta = schedule_metadata(s);
  CHECK(meta["total"] == 12);
  CHECK(meta["rule"] == "slope");
  CHECK(meta["gamma"] == 0.25);
  CHECK(meta["epsilon"] == 0.05);
  s.gamma.reset();
  CHECK(schedule_metadata(s)["gamma"].is_null());

  std::istringstream bad_header("slot,level\n0,1\n");
  CHECK_THROWS_AS(read_schedule_csv(bad_header), DomainError);
  std::istringstream bad_value("slot,servers\n0,1.5\n");
  CHECK_THROWS_AS(read_schedule_csv(bad_value), DomainError);
  std::istringstream out_of_order("slot,servers\n1,3\n");
  CHECK_THROWS_AS(read_schedule_csv(out_of_order), DomainError);
}

TEST_CASE("counts CSV") {
  std::istringstream good("slot_0,slot_1,slot_2\n1,2,3\n4,5,6\n\n");
  const ArrivalCounts c = read_counts_csv(good, 0.5);
  CHECK(c.counts.rows() == 2);
  CHECK(c.counts(1, 2) == 6.0);
  CHECK(c.delta == 0.5);
  std::istringstream one("slot_0,slot_1\n1,2\n");
  CHECK_THROWS_WITH_AS(read_counts_csv(one), doctest::Contains("need ≥ 2 days"), DomainError);
  std::istringstream header("slot_0,slot_2\n1,2\n3,4\n");
  CHECK_THROWS_AS(read_counts_csv(header), DomainError);
  std::istringstream ragged("slot_0,slot_1\n1,2\n3\n");
  CHECK_THROWS_AS(read_counts_csv(ragged), DomainError);
  std::istringstream junk("slot_0,slot_1\n1,2\n3,x\n");
  CHECK_THROWS_AS(read_counts_csv(junk), DomainError);
  std::istringstream empty("");
  CHECK_THROWS_AS(read_counts_csv(empty), DomainError);
}

TEST_CASE("fit records") {
  FitResult base;
  base.mse = 7.4;
  FitResult zero;
  zero.lag = 0;
  zero.var_w = 0.02;
  zero.mse_star = 5.5;
  zero.mse = 6.0;
  zero.gain = 0.19;
  FitResult five = zero;
  five.lag = 5;
  five.alpha = 1.0;
  const std::vector<FitResult> rows{base, zero, five};
  const json doc = fit_results_json(rows);
  REQUIRE(doc.is_array());
  CHECK(doc[0]["lag"].is_null());
  CHECK(doc[0]["alpha"].is_null());
  CHECK(doc[0]["mse_star"].is_null());
  CHECK(doc[1]["alpha"].is_null());
  CHECK(doc[1]["lag"] == 0);
  CHECK(doc[2]["alpha"] == 1.0);
  for (const auto& rec : doc)
    for (const char* key : {"lag", "alpha", "var_w", "mse_star", "mse", "gain"}) CHECK(rec.contains(key));
}

TEST_CASE("simulation records") {
  SimulationResult r;
  r.delay_prob = Eigen::VectorXd::Constant(2, 0.1);
  r.delay_prob[1] = std::nan("");
  r.delay_prob_se = Eigen::VectorXd::Zero(2);
  r.exceedance_prob = Eigen::VectorXd::Constant(2, 0.05);
  r.occupancy_mean = Eigen::VectorXd::Constant(2, 3.0);
  r.occupancy_var = Eigen::VectorXd::Constant(2, 4.0);
  r.system_mean = r.occupancy_mean;
  r.system_var = r.occupancy_var;
  r.arrivals = Eigen::VectorXd::Constant(2, 10.0);
  r.seed = 5;
  r.n_replications = 3;
  const json doc = simulation_to_json(r);
  CHECK(doc["delay_prob"][1].is_null());
  CHECK(doc["seed"] == 5);
  CHECK(doc["n_replications"] == 3);
  for (const char* key : {"exceedance_prob", "occupancy_mean", "occupancy_var", "abandon_frac", "counts"})
    CHECK(doc.contains(key));
  std::ostringstream csv;
  write_simulation_csv(csv, r);
  CHECK(csv.str() == "slot,delay_prob,exceedance_prob,occ_mean,occ_var\n0,0.1,0.05,3,4\n1,,0.05,3,4\n");
}

TEST_CASE("survival CSV") {
  std::istringstream in("t,survival\n0,1\n1,0.5\n3,0\n");
  const ServiceSpec s = read_survival_csv(in);
  CHECK(s.kind == ServiceKind::tabulated);
  CHECK(s.mean() == doctest::Approx(0.75 + 0.5));
  CHECK(s.survival_at(2.0) == doctest::Approx(0.25));
  std::istringstream bad("t,survival\n0,0.9\n1,0\n");
  CHECK_THROWS_AS(read_survival_csv(bad), DomainError);
}

TEST_CASE("text files") {
  const auto dir = std::filesystem::temp_directory_path() / "coxstaff_io_test";
  std::filesystem::create_directories(dir);
  write_text_file(dir / "a.txt", "hello\n");
  CHECK(read_text_file(dir / "a.txt") == "hello\n");
  CHECK_THROWS_AS(read_text_file(dir / "missing.txt"), IoError);
  CHECK_THROWS_AS(write_text_file(dir / "no" / "such" / "dir.txt", "x"), IoError);
  std::filesystem::remove_all(dir);
}
