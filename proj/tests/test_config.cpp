#include <filesystem>

#include "catch_amalgamated.hpp"
#include "run_config.hpp"

using namespace fkp;
using namespace fkp::cli;
using Catch::Matchers::ContainsSubstring;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("fkp_test_config_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("valid configuration") {
  const auto c = parse_config("subcommand = experiment\nalpha = 2\nsigma = -1\nc = 2\n");
  CHECK(c.subcommand == "experiment");
  CHECK(c.params.alpha == 2.0);
  CHECK(c.params.sigma == -1);
  CHECK(c.params.c == 2.0);
  CHECK(c.nx == 512);
  CHECK(c.ny == 128);
  CHECK(c.perturbation.kind == PerturbationKind::localized);
  CHECK(c.perturbation.rho == 0.1);
  CHECK(c.grid().x.half_width() == 60.0);
  CHECK(c.grid().y.half_width() == 30.0);
}

TEST_CASE("invalid configurations name the offending key") {
  CHECK_THROWS_WITH(parse_config("subcommand=spectrum\nalpha=0.2\n"), ContainsSubstring("alpha must be in (1/3, 2]"));
  CHECK_THROWS_WITH(parse_config("subcommand=spectrum\nnx=500\n"), ContainsSubstring("power of two required"));
  CHECK_THROWS_WITH(parse_config("subcommand=spectrum\nfoo=1\n"), ContainsSubstring("unknown key 'foo'"));
  CHECK_THROWS_WITH(parse_config("alpha=2\n"), ContainsSubstring("missing required key 'subcommand'"));
  CHECK_THROWS_WITH(parse_config("subcommand=spectrum\nc=1\nc=2\n"), ContainsSubstring("line 3: duplicate key 'c'"));
  CHECK_THROWS_WITH(parse_config("subcommand=spectrum\nc\n"), ContainsSubstring("expected key=value"));
  CHECK_THROWS_WITH(parse_config("subcommand=sweep\n"), ContainsSubstring("sweep_alpha"));
  CHECK_THROWS_AS(parse_config("subcommand=fly\n"), PreconditionError);
  CHECK_THROWS_AS(parse_config("subcommand=evolve\ndt=-1\n"), PreconditionError);
  CHECK_THROWS_AS(parse_config("subcommand=evolve\nperturbation=psi3\n"), PreconditionError);
  CHECK_THROWS_AS(parse_config("subcommand=evolve\ncadence=0\n"), PreconditionError);
  CHECK_THROWS_AS(parse_config("subcommand=sweep\nsweep_alpha=1,0.2\n"), PreconditionError);
  CHECK_THROWS_AS(parse_config_file("/nonexistent/fkp.cfg"), PreconditionError);
}

TEST_CASE("comments, overrides and canonical text") {
  const std::string text =
      "# transverse run\n"
      "subcommand = experiment   # trailing comment\n"
      "\n"
      "alpha = 1.5\n"
      "perturbation = psi2\n";
  const auto c = parse_config(text, {"rho=0.2", "alpha=1.7"});
  CHECK(c.params.alpha == 1.7);
  CHECK(c.perturbation.rho == 0.2);
  CHECK(c.perturbation.kind == PerturbationKind::y_periodic);

  const auto again = parse_config(to_text(c));
  CHECK(to_text(again) == to_text(c));
  CHECK(again.params.alpha == 1.7);
}

TEST_CASE("ground-state run writes a verifiable manifest") {
  const auto dir = scratch("gs");
  const auto c = parse_config("subcommand=ground-state\nnx=256\nny=8\nLx=40\n", {"out_dir=" + dir.string()});
  const auto m = run(c);
  REQUIRE(m.completed());
  CHECK(std::filesystem::exists(dir / "profile.csv"));
  CHECK(std::filesystem::exists(dir / "profile.fkps"));
  CHECK(std::filesystem::exists(dir / "config.txt"));
  CHECK(m.summary["amplitude"].get<double>() == Catch::Approx(6.0).epsilon(1e-10));

  const auto back = read_manifest(dir / "manifest.json");
  CHECK(back.status == "completed");
  CHECK(back.code_version == version);
  CHECK(back.files.size() == m.files.size());
  CHECK(stale_files(dir / "manifest.json").empty());

  const auto snap = io::read_snapshot(dir / "profile.fkps");
  CHECK(snap.field.grid.x.size() == 256);
  CHECK(snap.field.grid.y.size() == 8);

  io::write_text(dir / "profile.csv", "x,q\n0,0\n");
  const auto stale = stale_files(dir / "manifest.json");
  REQUIRE(stale.size() == 1);
  CHECK(stale.front() == "profile.csv");
  std::filesystem::remove_all(dir);
}

TEST_CASE("evolve is deterministic") {
  const auto dir = scratch("det");
  const auto c = parse_config("subcommand=evolve\nnx=128\nny=8\nLx=30\nLy=10\ndt=5e-3\nt_end=0.2\ncadence=10\n",
                              {"out_dir=" + dir.string()});
  const auto first = run(c);
  const auto csv = io::read_bytes(dir / "diagnostics.csv");
  const auto second = run(c);
  REQUIRE(first.completed());
  REQUIRE(second.completed());
  CHECK(io::read_bytes(dir / "diagnostics.csv") == csv);
  REQUIRE(first.files.size() == second.files.size());
  for (std::size_t i = 0; i < first.files.size(); ++i) {
    CHECK(first.files[i].path == second.files[i].path);
    CHECK(first.files[i].sha256 == second.files[i].sha256);
  }
  CHECK(first.summary["soliton_error"].get<double>() <= 1e-4);
  std::filesystem::remove_all(dir);
}

TEST_CASE("sweep over alpha writes one child manifest per value") {
  const auto dir = scratch("sweep");
  const auto c = parse_config(
      "subcommand=sweep\nsweep_of=ground-state\nsweep_alpha=0.9,1.35,1.7,2\nLx=400\nnx=8192\nny=8\nworkers=2\n",
      {"out_dir=" + dir.string()});
  const auto m = run(c);
  CHECK(m.status == "completed");
  REQUIRE(m.children.size() == 4);
  for (const auto& name : {"alpha_0.9", "alpha_1.35", "alpha_1.7", "alpha_2"}) {
    const auto child = read_manifest(dir / name / "manifest.json");
    CHECK(child.status == "completed");
    CHECK(stale_files(dir / name / "manifest.json").empty());
  }
  CHECK(stale_files(dir / "manifest.json").empty());
  std::filesystem::remove_all(dir);
}

TEST_CASE("a failing run records an error status") {
  const auto dir = scratch("err");
  const auto m = run(parse_config("subcommand=ground-state\nalpha=1\nLx=20\nnx=1024\n", {"out_dir=" + dir.string()}));
  CHECK(m.status == "error");
  CHECK_FALSE(m.message.empty());
  CHECK(read_manifest(dir / "manifest.json").status == "error");
  std::filesystem::remove_all(dir);
}
