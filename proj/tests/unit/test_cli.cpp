#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "coopcause/cli.hpp"
#include "coopcause/error.hpp"
#include "doctest.h"

namespace fs = std::filesystem;
using coopcause::cli::kExitOk;
using coopcause::cli::kExitRuntime;
using coopcause::cli::kExitUsage;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = coopcause::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / ("coopcause_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& leaf) const { return path_ / leaf; }
  std::string str() const { return path_.string(); }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void put(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> v;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

}  // namespace

TEST_CASE("run writes the three files and is reproducible") {
  TempDir a("run_a"), b("run_b");
  const auto r1 = cli({"run", "--scenario", "incident_1.1", "--seed", "3", "--out", a.str()});
  const auto r2 = cli({"run", "--scenario", "incident_1.1", "--seed", "3", "--out", b.str()});
  REQUIRE(r1.code == kExitOk);
  REQUIRE(r2.code == kExitOk);
  for (const char* f : {"events.csv", "metrics.csv", "accuracy.csv"}) {
    CAPTURE(f);
    REQUIRE(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  CHECK(lines(slurp(a / "metrics.csv")).size() == 2);

  SUBCASE("report reproduces metrics from the log") {
    const auto rep = cli({"report", "--log", (a / "events.csv").string(), "--scenario", "incident_1.1"});
    REQUIRE(rep.code == kExitOk);
    CHECK(rep.out == slurp(a / "metrics.csv"));
  }
}

TEST_CASE("usage errors exit 2") {
  const auto bad_method = cli({"run", "--scenario", "incident_1.1", "--method", "XY"});
  CHECK(bad_method.code == kExitUsage);
  CHECK(bad_method.err.find("unknown method 'XY'") != std::string::npos);

  const auto no_seeds = cli({"compare", "--scenario", "incident_1.1", "--seeds", "0"});
  CHECK(no_seeds.code == kExitUsage);
  CHECK(no_seeds.err.find("--seeds") != std::string::npos);

  const auto bad_rate = cli({"sweep", "--scenario", "incident_1.1", "--rates", "0.5,1.2"});
  CHECK(bad_rate.code == kExitUsage);
  CHECK(bad_rate.err.find("penetration out of range") != std::string::npos);

  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"run"}).code == kExitUsage);
  CHECK(cli({"run", "--scenario", "no_such_scenario"}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("compare with BP alone reports zero improvement") {
  TempDir d("compare");
  const auto r = cli({"compare", "--scenario", "incident_1.1", "--methods", "BP", "--seeds", "2", "--jobs", "1",
                      "--out", d.str()});
  REQUIRE(r.code == kExitOk);
  const auto summary = lines(slurp(d / "summary.csv"));
  REQUIRE(summary.size() == 2);
  CHECK(summary[0].find("improvement-vs-BP-pct") != std::string::npos);
  // improvement is the sixth column
  std::istringstream row(summary[1]);
  std::string field;
  for (int i = 0; i < 6; ++i) std::getline(row, field, ',');
  CHECK(field == "0.0000");
  CHECK(lines(slurp(d / "metrics.csv")).size() == 3);
}

TEST_CASE("sweep writes one row per rate and seed") {
  TempDir d("sweep");
  const auto r = cli({"sweep", "--scenario", "incident_1.1", "--method", "VP", "--rates", "0,1", "--seeds", "1",
                      "--jobs", "1", "--out", d.str()});
  REQUIRE(r.code == kExitOk);
  CHECK(lines(slurp(d / "sweep.csv")).size() >= 3);
}

TEST_CASE("mine") {
  TempDir d("mine");
  put(d / "plain.txt", "SE,We\nSE,Re\nSE,We\n");
  put(d / "labeled.txt", "SE,We|We\nSE,Re|SE\n");

  SUBCASE("minsup 1 leaves no rules") {
    const auto r = cli({"mine", "--dataset", (d / "plain.txt").string(), "--minsup", "1.0"});
    REQUIRE(r.code == kExitOk);
    CHECK(lines(r.out).size() == 1);
  }
  SUBCASE("a frequent pair yields a rule") {
    const auto r = cli({"mine", "--dataset", (d / "plain.txt").string(), "--minsup", "0.5", "--mincon", "0.6"});
    REQUIRE(r.code == kExitOk);
    CHECK(lines(r.out).size() > 1);
  }
  SUBCASE("supervised mining needs labels") {
    const auto r = cli({"mine", "--dataset", (d / "plain.txt").string(), "--supervised"});
    CHECK(r.code == kExitUsage);
    CHECK(cli({"mine", "--dataset", (d / "labeled.txt").string(), "--supervised", "--minsup", "0.1"}).code ==
          kExitOk);
  }
  SUBCASE("dataset and scenario are exclusive") {
    CHECK(cli({"mine"}).code == kExitUsage);
    CHECK(cli({"mine", "--dataset", (d / "plain.txt").string(), "--from-scenario", "incident_1.1"}).code ==
          kExitUsage);
  }
  SUBCASE("rulebook file") {
    const auto r = cli({"mine", "--from-scenario", "incident_1.1", "--truths", "I,Wo", "--samples", "250",
                        "--out", d.str()});
    REQUIRE(r.code == kExitOk);
    const std::string book = slurp(d / "rulebook.csv");
    CHECK(book.find("SE") != std::string::npos);
  }
}

TEST_CASE("combine") {
  TempDir d("combine");
  put(d / "table2.txt",
      "# two reports\n"
      "We:0.8\nWe,Re:0.1\nOMEGA:0.1\n\n"
      "We:0.6\nWe,Re:0.2\nOMEGA:0.2\n");
  put(d / "vacuous.txt", "OMEGA:1\n");
  put(d / "conflict.txt", "I:1\n\nWe:1\n");
  put(d / "short.txt", "I:0.5\nWe:0.4\n");

  SUBCASE("conjunctive") {
    const auto r = cli({"combine", "--masses", (d / "table2.txt").string(), "--betp"});
    REQUIRE(r.code == kExitOk);
    const auto l = lines(r.out);
    CHECK(l[0] == "subset,mass");
    CHECK(r.out.find("We,0.92") != std::string::npos);
    CHECK(r.out.find("cause,betp") != std::string::npos);
  }
  SUBCASE("vacuous mass echoes") {
    const auto r = cli({"combine", "--masses", (d / "vacuous.txt").string()});
    REQUIRE(r.code == kExitOk);
    CHECK(lines(r.out) == std::vector<std::string>{"subset,mass", "OMEGA,1"});
  }
  SUBCASE("total conflict under Dempster") {
    const auto r = cli({"combine", "--masses", (d / "conflict.txt").string(), "--rule", "dempster"});
    CHECK(r.code == kExitRuntime);
    CHECK(r.err.find("K=1") != std::string::npos);
  }
  SUBCASE("malformed file") {
    const auto r = cli({"combine", "--masses", (d / "short.txt").string()});
    CHECK(r.code == kExitUsage);
    CHECK(r.err.find("ending line 2") != std::string::npos);
    CHECK(cli({"combine", "--masses", (d / "missing.txt").string()}).code == kExitUsage);
    CHECK(cli({"combine", "--masses", (d / "table2.txt").string(), "--rule", "average"}).code == kExitUsage);
  }
}

TEST_CASE("mass file parsing") {
  std::istringstream in("I:0.5 # first\nOMEGA:0.5\n# only a comment\n\n\nWe,Re:1\n");
  const auto m = coopcause::cli::parse_masses(in);
  CHECK(m.size() == 2);
  std::istringstream bad("I:0.5\nnot a line\n");
  CHECK_THROWS_WITH_AS(coopcause::cli::parse_masses(bad), doctest::Contains("line 2"), coopcause::ConfigError);
}

TEST_CASE("the installed binary maps errors to exit codes") {
  const std::string bin = COOPCAUSE_BIN;
  const auto status = [&](const std::string& args) {
    const int raw = std::system((bin + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  CHECK(status("--help") == 0);
  CHECK(status("run --scenario incident_1.1 --method XY") == 2);
}
