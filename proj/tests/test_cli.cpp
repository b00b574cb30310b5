#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "coxstaff/experiments.hpp"
#include "coxstaff/io.hpp"

using namespace coxstaff;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "coxstaff_cli_test";

struct Run {
  int code = -1;
  std::string output;
};

Run run(const std::string& args) {
  const fs::path log = kWork / "last.log";
  const std::string cmd = std::string(COXSTAFF_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.output = read_text_file(log);
  return r;
}

std::string path(const std::string& name) { return (kWork / name).string(); }

void write_model(const std::string& name, const DailyPattern& p, const BusynessParams& params) {
  write_text_file(kWork / name, model_to_json({p, params}).dump() + "\n");
}

void write_counts(const std::string& name, const BusynessParams& params, int days, std::uint64_t seed) {
  DailyPattern p = sine_pattern(14.0, 0.6);
  Rng rng = make_stream(seed, 0);
  const RatePath path = sample_rate_path(p, params, days, rng);
  const auto times = sample_arrivals(path, p, rng);
  Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(days, 24);
  for (double t : times) {
    const long slot = static_cast<long>(std::floor(t));
    ++counts(slot / 24, slot % 24);
  }
  std::ostringstream out;
  for (int j = 0; j < 24; ++j) out << (j ? "," : "") << "slot_" << j;
  out << '\n';
  for (int d = 0; d < days; ++d) {
    for (int j = 0; j < 24; ++j) out << (j ? "," : "") << counts(d, j);
    out << '\n';
  }
  write_text_file(kWork / name, out.str());
}

struct Workspace {
  Workspace() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
  }
  ~Workspace() { fs::remove_all(kWork); }
};

}  // namespace

TEST_CASE("cli") {
  Workspace ws;
  write_model("base.json", sine_pattern(17.5, 0.8), {1.0, 5, 0.1, WDistribution::gamma});

  SUBCASE("usage errors") {
    CHECK(run("").code == 2);
    CHECK(run("frobnicate").code == 2);
    CHECK(run("staff --model " + path("base.json") + " --epsilon abc").code == 2);
    CHECK(run("--help").code == 0);
  }

  SUBCASE("fit on a synthetic instance with lag 5") {
    write_counts("counts.csv", {0.5, 5, 0.5, WDistribution::gamma}, 20'000, 1);
    const Run r = run("fit --counts " + path("counts.csv") + " --max-lag 8 --out " + path("fit.json"));
    REQUIRE(r.code == 0);
    CHECK(r.output.find("selected lag 5") != std::string::npos);
    const json fits = json::parse(read_text_file(kWork / "fit.json"));
    REQUIRE(fits.size() == 10);
    CHECK(fits[0]["lag"].is_null());
    const json& five = fits[6];
    CHECK(five["lag"] == 5);
    CHECK(std::abs(five["alpha"].get<double>() - 0.5) < 0.05);
    CHECK(std::abs(five["var_w"].get<double>() - 0.5) < 0.05);
    const json sel = json::parse(read_text_file(kWork / "fit.selection.json"));
    CHECK(sel["selected_lag"] == 5);
  }

  SUBCASE("fit on Poisson data selects lag 0") {
    write_counts("poisson.csv", {1.0, 0, 0.0, WDistribution::deterministic}, 2'000, 2);
    const Run r = run("fit --counts " + path("poisson.csv"));
    REQUIRE(r.code == 0);
    CHECK(r.output.find("selected lag 0") != std::string::npos);
  }

  SUBCASE("fit input errors") {
    write_text_file(kWork / "one.csv", "slot_0,slot_1,slot_2\n1,2,3\n");
    const Run one = run("fit --counts " + path("one.csv"));
    CHECK(one.code == 2);
    CHECK(one.output.find("need ≥ 2 days") != std::string::npos);
    write_text_file(kWork / "bad.csv", "slot_0,slot_1\n1,2\n3,oops\n");
    CHECK(run("fit --counts " + path("bad.csv")).code == 2);
    CHECK(run("fit --counts " + path("missing.csv")).code == 4);
    write_text_file(kWork / "small.csv", "slot_0,slot_1,slot_2,slot_3\n1,2,3,4\n2,3,4,5\n");
    CHECK(run("fit --counts " + path("small.csv") + " --max-lag 2").code == 2);
  }

  SUBCASE("moments and staffing outputs") {
    REQUIRE(run("moments --model " + path("base.json") + " --out " + path("m.csv")).code == 0);
    const std::string csv = read_text_file(kWork / "m.csv");
    CHECK(csv.rfind("slot,m_inf,v_inf\n", 0) == 0);
    REQUIRE(run("moments --model " + path("base.json") + " --method numeric --out " + path("mn.csv")).code == 0);
    REQUIRE(run("staff --model " + path("base.json") + " --rule slope --gamma 0.5 --out " + path("s/slope.csv")).code ==
            0);
    const json meta = json::parse(read_text_file(kWork / "s" / "slope.json"));
    CHECK(meta["rule"] == "slope");
    CHECK(meta["gamma"] == 0.5);
    REQUIRE(run("staff --model " + path("base.json") + " --out " + path("s/base.csv")).code == 0);
    CHECK(json::parse(read_text_file(kWork / "s" / "base.json"))["total"] == meta["total"]);
  }

  SUBCASE("constant model gives a constant schedule") {
    DailyPattern flat;
    flat.rates = Eigen::VectorXd::Constant(24, 10.0);
    write_model("flat.json", flat, {1.0, 0, 0.0, WDistribution::deterministic});
    REQUIRE(run("staff --model " + path("flat.json") + " --mu 1 --out " + path("flat.csv")).code == 0);
    std::istringstream in(read_text_file(kWork / "flat.csv"));
    const auto s = read_schedule_csv(in);
    for (int level : s.levels) CHECK(level == s.levels.front());
  }

  SUBCASE("validation and numerical failures") {
    CHECK(run("staff --model " + path("base.json") + " --rule slope --gamma 1.5").code == 2);
    CHECK(run("staff --model " + path("base.json") + " --rule fancy").code == 2);
    CHECK(run("staff --model " + path("base.json") + " --epsilon 0.7").code == 2);
    CHECK(run("staff --model " + path("nope.json")).code == 4);
    write_text_file(kWork / "broken.json", "{\"delta\": 1,");
    CHECK(run("staff --model " + path("broken.json")).code == 2);
    write_model("wide.json", sine_pattern(5.0, 0.2), {0.5, 12, 0.1, WDistribution::gamma});
    const Run wide = run("moments --model " + path("wide.json"));
    CHECK(wide.code == 2);
    CHECK(wide.output.find("[arrival-model]") != std::string::npos);
    // survival tail far beyond the truncation cap
    write_text_file(kWork / "tail.csv", "t,survival\n0,1\n10000000,0.0000001\n");
    CHECK(run("moments --model " + path("base.json") + " --service " + path("tail.csv")).code == 3);
  }

  SUBCASE("pipeline is reproducible") {
    const std::string args =
        "pipeline --model " + path("base.json") + " --epsilon 0.05 --abandonment-ratio 1 --reps 300 --horizon-days 2";
    REQUIRE(run(args + " --out " + path("p1")).code == 0);
    REQUIRE(run(args + " --threads 2 --out " + path("p2")).code == 0);
    for (const char* f : {"moments.csv", "schedule.csv", "schedule.json", "simulation.json", "simulation.csv",
                          "evaluation.json"})
      CHECK(read_text_file(kWork / "p1" / f) == read_text_file(kWork / "p2" / f));
    const json eval = json::parse(read_text_file(kWork / "p1" / "evaluation.json"));
    const double mean_delay = eval["mean_delay"].get<double>();
    CHECK(mean_delay > 0.0);
    CHECK(eval["max_delay"].get<double>() >= mean_delay);
    CHECK(eval["slots_violating"].get<int>() > 0);
    CHECK(run("pipeline --model " + path("base.json") + " --rule slope --gamma 2 --out " + path("p3")).code == 2);
    DailyPattern flat;
    flat.rates = Eigen::VectorXd::Constant(24, 17.5);
    write_model("flat.json", flat, {1.0, 5, 0.1, WDistribution::gamma});
    REQUIRE(run("pipeline --model " + path("flat.json") + " --abandonment-ratio 1 --reps 300 --horizon-days 2 --out " +
                path("p4"))
                .code == 0);
    const json flat_eval = json::parse(read_text_file(kWork / "p4" / "evaluation.json"));
    CHECK(std::abs(flat_eval["mean_delay"].get<double>() - 0.05) <= 0.02);
  }

  SUBCASE("simulate and evaluate a saved schedule") {
    REQUIRE(run("staff --model " + path("base.json") + " --epsilon 0.1 --out " + path("sched.csv")).code == 0);
    const std::string common = "--model " + path("base.json") + " --schedule " + path("sched.csv") + " --reps 50";
    REQUIRE(run("simulate " + common + " --out " + path("sim.json")).code == 0);
    CHECK(fs::exists(kWork / "sim.csv"));
    const Run e = run("evaluate " + common + " --epsilon 0.1 --out " + path("eval.json"));
    REQUIRE(e.code == 0);
    CHECK(e.output.find("max delay") != std::string::npos);
    const json summary = json::parse(read_text_file(kWork / "eval.summary.json"));
    for (const char* key : {"max_delay", "mean_delay", "std_delay", "slots_violating"}) CHECK(summary.contains(key));
    CHECK(run("simulate --model " + path("base.json") + " --schedule " + path("missing.csv")).code == 4);
  }

  SUBCASE("tune") {
    const Run r = run("tune --model " + path("base.json") + " --rule slope --tuning-reps 20 --out " + path("t.csv"));
    REQUIRE(r.code == 0);
    const json meta = json::parse(read_text_file(kWork / "t.json"));
    CHECK(meta["gamma"].is_number());
    const Run b = run("tune --model " + path("base.json") + " --abandonment-ratio 1 --tune-beta --tuning-reps 50");
    CHECK(b.code == 0);
  }
}
