#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "ace/cli.hpp"
#include "ace/io.hpp"
#include "fixtures.hpp"

using namespace ace;
using namespace ace::test;
namespace fs = std::filesystem;

namespace {

struct Workspace {
  fs::path dir;
  Workspace() : dir(fs::temp_directory_path() / ("ace_cli_" + std::to_string(std::rand()))) {
    fs::create_directories(dir);
    write_text(dir / "product.json", network_to_json(product_net()));
    write_text(dir / "constant.json", network_to_json(constant_net(2, 0.75)));
    write_text(dir / "data.csv", "x1,x2\n0,1\n1,3\n0.5,2\n0.25,2\n");
    write_text(dir / "domains.json", R"({"x1": [0, 1], "x2": [0, 4]})");
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "ace");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

Index data_rows(const std::string& csv) {
  Index n = 0;
  for (char c : csv) n += c == '\n' ? 1 : 0;
  return n - 1;
}

}  // namespace

TEST_CASE("sweep writes one row per grid value") {
  Workspace w;
  const Run r = run({"sweep", "--net", w / "product.json", "--data", w / "data.csv", "--feature", "x1", "--num", "7",
                     "--method", "exact", "--output", w / "sweep.csv"});
  CHECK(r.code == 0);
  const std::string csv = read_text(w / "sweep.csv");
  CHECK(csv.rfind("alpha,interventional_expectation,ace,predictive_variance,method\n", 0) == 0);
  CHECK(data_rows(csv) == 7);
}

TEST_CASE("oracle and exact sweeps agree on a quadratic network") {
  Workspace w;
  for (const char* method : {"exact", "oracle"}) {
    const Run r = run({"sweep", "--net", w / "product.json", "--data", w / "data.csv", "--feature", "x2", "--num",
                       "9", "--method", method, "--output", w / (std::string(method) + ".csv")});
    REQUIRE(r.code == 0);
  }
  const Table exact = parse_csv(read_text(w / "exact.csv"), {"method", "predictive_variance"});
  const Table oracle = parse_csv(read_text(w / "oracle.csv"), {"method", "predictive_variance"});
  CHECK((exact.values.col(1) - oracle.values.col(1)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("bad flags exit 2 with usage") {
  Workspace w;
  const Run missing = run({"sweep", "--net", w / "product.json", "--data", w / "data.csv", "--output", w / "s.csv"});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("--feature") != std::string::npos);
  CHECK(missing.err.find("Usage") != std::string::npos);
  CHECK(run({}).code == 2);
  CHECK(run({"sweep", "--net", w / "product.json", "--data", w / "data.csv", "--feature", "nope", "--output",
             w / "s.csv"})
            .code == 2);
  CHECK(run({"sweep", "--net", w / "product.json", "--data", w / "data.csv", "--feature", "x1", "--method", "magic",
             "--output", w / "s.csv"})
            .code == 2);
}

TEST_CASE("file and parse problems exit 3, numerical problems exit 4") {
  Workspace w;
  CHECK(run({"sweep", "--net", w / "absent.json", "--data", w / "data.csv", "--feature", "x1", "--output",
             w / "s.csv"})
            .code == 3);
  write_text(w / "broken.csv", "x1,x2\n1,oops\n");
  CHECK(run({"sweep", "--net", w / "product.json", "--data", w / "broken.csv", "--feature", "x1", "--output",
             w / "s.csv"})
            .code == 3);
  const Run degenerate = run({"sweep", "--net", w / "product.json", "--data", w / "data.csv", "--feature", "x1",
                              "--low", "1", "--high", "1", "--output", w / "s.csv"});
  CHECK(degenerate.code == 4);
  CHECK(degenerate.err.find("sweep") != std::string::npos);
}

TEST_CASE("ace on constant and product networks") {
  Workspace w;
  Run r = run({"ace", "--net", w / "constant.json", "--data", w / "data.csv", "--feature", "x1", "--num", "11",
               "--output", w / "c.csv"});
  REQUIRE(r.code == 0);
  Table t = parse_csv(read_text(w / "c.csv"), {"method"});
  CHECK(t.values.col(2).cwiseAbs().maxCoeff() < 1e-12);

  // mean(x2) = 2 on the fixture, domain of x1 is [0, 1].
  r = run({"ace", "--net", w / "product.json", "--data", w / "data.csv", "--domains", w / "domains.json",
           "--feature", "x1", "--num", "11", "--alpha-at", "0", "0.25", "0.8", "--output", w / "p.csv"});
  REQUIRE(r.code == 0);
  const std::string text = read_text(w / "p.csv");
  CHECK(text.rfind("# baseline=", 0) == 0);
  t = parse_csv(text, {"method"});
  REQUIRE(t.values.rows() == 3);
  for (Index j = 0; j < 3; ++j) CHECK(std::abs(t.values(j, 2) - (2.0 * t.values(j, 0) - 1.0)) < 1e-6);
  CHECK(read_text(w / "p.csv.regressor.json").find("\"baseline\"") != std::string::npos);
}

TEST_CASE("ace warns about high variance on a sparse sweep") {
  Workspace w;
  write_text(w / "bump.json",
             network_to_json(Network({{Matrix{{8.0, 0.0}}, Vector::Constant(1, -4.0), Activation::square},
                                      {Matrix{{-1.0}}, Vector::Zero(1), Activation::sigmoid}})));
  const Run r = run({"ace", "--net", w / "bump.json", "--data", w / "data.csv", "--feature", "x1", "--num", "3",
                     "--max-order", "10", "--output", w / "a.csv"});
  CHECK(r.code == 0);
  CHECK(r.err.find("high predictive variance") != std::string::npos);
}

TEST_CASE("synth is deterministic, train and tau run end to end") {
  Workspace w;
  REQUIRE(run({"synth", "--n", "1000", "--seed", "7", "--output", w / "a.csv", "--labels", w / "al.csv"}).code == 0);
  REQUIRE(run({"synth", "--n", "1000", "--seed", "7", "--output", w / "b.csv", "--labels", w / "bl.csv"}).code == 0);
  CHECK(read_text(w / "a.csv") == read_text(w / "b.csv"));
  CHECK(read_text(w / "al.csv") == read_text(w / "bl.csv"));

  Rng rng(101);
  write_text(w / "flat.json", network_to_json(zero_recurrence_gru(rng, 1, 2, 1)));
  const Run tau = run({"tau", "--net", w / "flat.json", "--data", w / "a.csv", "--out-step", "8"});
  CHECK(tau.code == 0);
  CHECK(tau.out == "0\n");

  write_text(w / "small.csv", "seq_id,step,x\n0,0,1\n0,1,0\n1,0,-1\n1,1,0.1\n");
  write_text(w / "small_labels.csv", "seq_id,label\n0,1\n1,0\n");
  const Run train = run({"train", "--kind", "gru", "--data", w / "small.csv", "--labels", w / "small_labels.csv",
                         "--hidden", "1", "--epochs", "5", "--lr", "0.5", "--output", w / "g.json", "--log",
                         w / "log.csv"});
  CHECK(train.code == 0);
  CHECK(std::holds_alternative<GruNetwork>(load_network(w / "g.json")));
  CHECK(data_rows(read_text(w / "log.csv")) == 5);

  const Run sal = run({"saliency", "--net", w / "g.json", "--data", w / "small.csv", "--instance", "0", "--num",
                       "5", "--output", w / "sal.csv", "--pgm", w / "sal.pgm"});
  CHECK(sal.code == 0);
  CHECK(read_text(w / "sal.pgm").rfind("P2\n1 2\n255\n", 0) == 0);
}

TEST_CASE("mlp training from a labelled table") {
  Workspace w;
  write_text(w / "table.csv", "a,b,cls\n0,0,0\n0.1,0.2,0\n1,1,1\n0.9,0.8,1\n");
  const Run r = run({"train", "--data", w / "table.csv", "--label-column", "cls", "--hidden", "3", "--epochs", "50",
                     "--lr", "0.5", "--normalize", "--normalized-data", w / "norm.csv", "--output", w / "m.json"});
  CHECK(r.code == 0);
  CHECK(std::get<Network>(load_network(w / "m.json")).input_dim() == 2);
  CHECK(parse_csv(read_text(w / "norm.csv")).values.maxCoeff() == 1.0);
}
