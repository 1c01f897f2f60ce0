#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bnpc/cli/config.hpp"
#include "bnpc/cli/csv_io.hpp"
#include "bnpc/cli/dgp.hpp"
#include "bnpc/cli/pipeline.hpp"
#include "bnpc/cli/store.hpp"
#include "oracles.hpp"

using namespace bnpc;
using namespace bnpc::cli;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("bnpc_test_" + name);
  fs::remove_all(p);
  return p;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::ConfigError;
}

RunConfig small_config() {
  RunConfig c;
  c.iterations = 120;
  c.burn_in = 60;
  c.n_trees = 20;
  c.tau_trees = 10;
  c.seed = 11;
  c.estimands = {"pate", "sate"};
  return c;
}

Dataset small_data(const std::string& name = "linear_confounded", int n = 80) {
  DgpSpec s;
  s.name = name;
  s.n = n;
  s.p = 5;
  s.seed = 5;
  return simulate(s).data;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("csv parsing") {
  Schema s;
  {
    std::istringstream is("y,a,x1\n1.0,0,2\n2.0,1,\n");
    const Dataset d = read_dataset(is, s);
    CHECK(d.n() == 2);
    CHECK(std::isnan(d.x(1, 0)));
    CHECK(d.covariate_names == std::vector<std::string>{"x1"});
  }
  {
    std::istringstream is("y,a,x1\n1.0,0,2\n2.0,2,1\n");
    try {
      read_dataset(is, s);
      FAIL("expected NonBinaryTreatment");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::NonBinaryTreatment);
      CHECK(std::string(e.what()).find("row 3") != std::string::npos);
    }
  }
  {
    std::istringstream is("");
    CHECK(kind_of([&] { read_dataset(is, s); }) == ErrorKind::EmptyFile);
  }
  {
    std::istringstream is("y,a,x1\n");
    CHECK(kind_of([&] { read_dataset(is, s); }) == ErrorKind::EmptyFile);
  }
  {
    std::istringstream is("y,a,x1\n1,0,abc\n");
    CHECK(kind_of([&] { read_dataset(is, s); }) == ErrorKind::ParseError);
  }
  {
    std::istringstream is("y,a,x1\n1,0\n");
    CHECK(kind_of([&] { read_dataset(is, s); }) == ErrorKind::ParseError);
  }
  {
    std::istringstream is("y,a,x1\n,0,1\n");
    CHECK(kind_of([&] { read_dataset(is, s); }) == ErrorKind::ParseError);
  }
}

TEST_CASE("csv round trip is exact") {
  Dataset d = small_data("mediation_linear", 50);
  d.x(3, 1) = std::numeric_limits<double>::quiet_NaN();
  const Schema s = schema_for(d);
  std::stringstream ss;
  write_dataset(ss, d, s);
  const Dataset r = read_dataset(ss, s);
  CHECK(r.y == d.y);
  CHECK(r.a == d.a);
  CHECK(*r.m == *d.m);
  for (Eigen::Index i = 0; i < d.x.size(); ++i) {
    const double u = d.x.data()[i], v = r.x.data()[i];
    CHECK(((std::isnan(u) && std::isnan(v)) || u == v));
  }
}

TEST_CASE("simulated datasets") {
  for (const auto& name : dgp_names()) {
    DgpSpec s;
    s.name = name;
    s.n = 100;
    s.p = 5;
    const auto a = simulate(s);
    const auto b = simulate(s);
    CHECK(a.data.y == b.data.y);
    CHECK(a.data.x == b.data.x);
    CHECK(!a.truth.values.empty());
    a.data.validate();
  }
  DgpSpec s;
  s.name = "homogeneous_bcf";
  s.params["effect"] = 3.5;
  CHECK(simulate(s).truth.values.at("pate") == 3.5);
  s.name = "mediation_linear";
  s.params = {{"gamma", 2.0}, {"lambda", 0.5}, {"beta", 1.0}};
  const auto m = simulate(s).truth.values;
  CHECK(m.at("delta") == doctest::Approx(1.0));
  CHECK(m.at("total") == doctest::Approx(2.0));
  s.name = "no_such";
  CHECK_THROWS_AS(simulate(s), Error);
}

TEST_CASE("configuration") {
  std::istringstream is("# comment\nmodel = bart\niterations = 300\nburn_in=100\nestimands = pate, median\n");
  const RunConfig c = RunConfig::from_key_values(parse_key_values(is));
  CHECK(c.model == "bart");
  CHECK(c.iterations == 300);
  CHECK(c.n_draws() == 200);
  CHECK(c.estimands == std::vector<std::string>{"pate", "median"});
  CHECK(RunConfig::from_key_values(c.to_key_values()).to_key_values() == c.to_key_values());

  std::istringstream bad("colour = red\n");
  CHECK(kind_of([&] { RunConfig::from_key_values(parse_key_values(bad)); }) == ErrorKind::ConfigError);
  RunConfig v;
  v.burn_in = v.iterations;
  CHECK(kind_of([&] { v.validate(); }) == ErrorKind::ConfigError);
  v = RunConfig{};
  v.model = "bcf";
  v.propensity = "none";
  CHECK(kind_of([&] { v.validate(); }) == ErrorKind::ConfigError);
}

TEST_CASE("fit is deterministic and resumable") {
  const Dataset d = small_data();
  RunConfig c = small_config();
  c.chains = 2;
  const fs::path s1 = scratch("fit1"), s2 = scratch("fit2"), s3 = scratch("fit3");
  CHECK(run_fit(c, d, s1) == FitStatus::Complete);
  CHECK(run_fit(c, d, s2) == FitStatus::Complete);
  CHECK(slurp(s1 / "manifest.json") == slurp(s2 / "manifest.json"));
  const Manifest m = read_manifest(s1);
  CHECK(m.chains.size() == 2);
  CHECK(m.chains[0].n_draws == c.n_draws());
  CHECK(slurp(s1 / "chain_1.txt") != slurp(s1 / "chain_2.txt"));

  FitOptions stop;
  stop.stop_after = 70;
  CHECK(run_fit(c, d, s3, stop) == FitStatus::Interrupted);
  FitOptions resume;
  resume.resume = true;
  CHECK(run_fit(c, d, s3, resume) == FitStatus::Complete);
  CHECK(slurp(s1 / "manifest.json") == slurp(s3 / "manifest.json"));

  RunConfig other = c;
  other.seed = 12;
  const fs::path s4 = scratch("fit4");
  run_fit(c, d, s4, stop);
  CHECK(kind_of([&] { run_fit(other, d, s4, resume); }) == ErrorKind::ConfigError);

  EstimateRequest req;
  const auto r1 = run_estimate(s1, req);
  const auto r2 = run_estimate(s1, req);
  REQUIRE(r1.size() == 2);
  CHECK(record_json(r1[0]) == record_json(r2[0]));
  CHECK(r1[0].estimand == "pate");
  CHECK(r1[0].n_draws == 2 * static_cast<std::size_t>(c.n_draws()));
  CHECK(r1[0].estimate == doctest::Approx(oracle::mean(r1[0].draws)));
  CHECK(r1[0].ci_lower <= r1[0].estimate);
  CHECK(r1[0].estimate <= r1[0].ci_upper);
  const auto j = nlohmann::json::parse(record_json(r1[0]));
  for (const char* key : {"estimand", "estimate", "ci_lower", "ci_upper", "level", "mc_se", "n_draws", "seed", "histogram"}) {
    CHECK(j.contains(key));
  }
  int total = 0;
  for (int v : r1[0].counts) total += v;
  CHECK(total == static_cast<int>(r1[0].n_draws));

  req.estimands = {"median"};
  req.k = 2;
  req.seed = 3;
  const auto med = run_estimate(s1, req);
  CHECK(med[0].seed == 3);
  req.estimands = {"mediation"};
  CHECK(kind_of([&] { run_estimate(s1, req); }) == ErrorKind::IncompatibleEstimand);
  req.estimands = {"subgroup"};
  req.subgroup = "x1 > 0 & x2 <= 1";
  CHECK(run_estimate(s1, req).size() == 1);
  req.subgroup = "nope > 0";
  CHECK_THROWS_AS(run_estimate(s1, req), Error);

  const OverlapReport o = store_overlap(s1, 0.0);
  CHECK(o.n_violations() == 0);
  CHECK(nlohmann::json::parse(overlap_report_json(o)).contains("n_violations"));
}

TEST_CASE("other models through the pipeline") {
  const Dataset d = small_data();
  for (const char* model : {"bart", "sparse_shared", "sparse_horseshoe", "hahn_reparam", "gp"}) {
    RunConfig c = small_config();
    c.model = model;
    const fs::path s = scratch(std::string("m_") + model);
    CHECK(run_fit(c, d, s) == FitStatus::Complete);
    const auto r = run_estimate(s, EstimateRequest{});
    CHECK(std::isfinite(r[0].estimate));
  }
}

TEST_CASE("predicates") {
  const auto p = parse_predicate("x1 >= 0.5 & x2 != 2", {"x1", "x2"});
  const std::vector<double> yes{0.5, 1.0}, no1{0.4, 1.0}, no2{0.9, 2.0};
  CHECK(p(yes));
  CHECK(!p(no1));
  CHECK(!p(no2));
  CHECK_THROWS_AS(parse_predicate("x1 ~ 3", {"x1"}), Error);
}

TEST_CASE("ric report") {
  RicDiagnostic d;
  d.rows.push_back({1, {0.1, -0.1}, 0.14});
  auto j = nlohmann::json::parse(ric_report_json(d, 4));
  CHECK(j["decreasing"].is_null());
  d.rows.push_back({10, {0.01, -0.01}, 0.014});
  j = nlohmann::json::parse(ric_report_json(d, 4));
  CHECK(j["decreasing"] == true);
  CHECK(j["rows"].size() == 2);
}

TEST_CASE("mediation pipeline") {
  const Dataset d = small_data("mediation_linear", 120);
  RunConfig c = small_config();
  c.model = "bart";
  c.k = 2;
  const auto r = run_mediate(c, d);
  REQUIRE(r.size() == 5);
  CHECK(r[0].estimand == "zeta0");
  Dataset no_m = d;
  no_m.m.reset();
  CHECK(kind_of([&] { run_mediate(c, no_m); }) == ErrorKind::IncompatibleEstimand);
}

TEST_CASE("sha256") {
  const fs::path p = fs::temp_directory_path() / "bnpc_sha.txt";
  {
    std::ofstream os(p);
    os << "abc";
  }
  CHECK(sha256_hex(p) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
