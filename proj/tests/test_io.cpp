#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "catch_amalgamated.hpp"
#include "fkp/io.hpp"

using namespace fkp;

namespace {

io::Snapshot random_snapshot(std::size_t nx, std::size_t ny, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  io::Snapshot s{RealField2D(Grid2D{Grid1D(60.0, nx), Grid1D(30.0, ny)}), 1.25, FkpParams{1.5, -1, 2.0}};
  for (auto& v : s.field.values) v = nd(rng);
  return s;
}

}  // namespace

TEST_CASE("snapshot round trip is bitwise") {
  const auto s = random_snapshot(64, 16, 1);
  const auto bytes = io::encode_snapshot(s);
  CHECK(bytes.size() == 64 + 8 * 64 * 16);
  CHECK(bytes.substr(0, 4) == "FKPS");
  const auto back = io::decode_snapshot(bytes);
  CHECK(back.field.grid.x.size() == 64);
  CHECK(back.field.grid.y.size() == 16);
  CHECK(back.field.grid.x.half_width() == 60.0);
  CHECK(back.field.grid.y.half_width() == 30.0);
  CHECK(back.t == 1.25);
  CHECK(back.params.alpha == 1.5);
  CHECK(back.params.sigma == -1);
  CHECK(back.params.c == 2.0);
  for (std::size_t j = 0; j < s.field.values.size(); ++j)
    CHECK(std::bit_cast<std::uint64_t>(back.field.values[j]) == std::bit_cast<std::uint64_t>(s.field.values[j]));
  CHECK(io::encode_snapshot(back) == bytes);
}

TEST_CASE("snapshot file size and zero payload") {
  const auto dir = std::filesystem::temp_directory_path() / "fkp_test_io";
  std::filesystem::create_directories(dir);
  const io::Snapshot zero{RealField2D(Grid2D{Grid1D(60.0, 512), Grid1D(30.0, 128)}), 0.0, FkpParams{2.0, 1, 2.0}};
  const auto path = dir / "zero.fkps";
  io::write_snapshot(zero, path);
  CHECK(std::filesystem::file_size(path) == 64 + 8 * 512 * 128);
  const auto back = io::read_snapshot(path);
  CHECK(back.params.sigma == 1);
  for (double v : back.field.values) CHECK(v == 0.0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("corrupt snapshots are rejected") {
  const auto good = io::encode_snapshot(random_snapshot(16, 8, 2));

  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(io::decode_snapshot(bad_magic), ValidityError);

  CHECK_THROWS_AS(io::decode_snapshot(good.substr(0, 40)), ValidityError);
  CHECK_THROWS_AS(io::decode_snapshot(good.substr(0, good.size() - 8)), ValidityError);
  CHECK_THROWS_AS(io::decode_snapshot(good + "x"), ValidityError);

  auto bad_version = good;
  bad_version[4] = 7;
  CHECK_THROWS_AS(io::decode_snapshot(bad_version), ValidityError);

  auto bad_dims = good;
  bad_dims[8] = 32;  // nx 16 -> 32
  CHECK_THROWS_AS(io::decode_snapshot(bad_dims), ValidityError);

  auto s = random_snapshot(16, 8, 3);
  s.field.values[5] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(io::encode_snapshot(s), PreconditionError);
}

TEST_CASE("format_double round trips") {
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> ud(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = ud(rng) * std::pow(10.0, static_cast<int>(i % 40) - 20);
    CHECK(io::parse_double(io::format_double(v)) == v);
  }
  CHECK(io::format_double(0.1) == "0.1");
  CHECK(io::format_double(2.0) == "2");
  CHECK(io::parse_double(io::format_double(std::numeric_limits<double>::denorm_min())) ==
        std::numeric_limits<double>::denorm_min());
  CHECK_THROWS_AS(io::parse_double("1.5x"), PreconditionError);
  CHECK_THROWS_AS(io::parse_double(""), PreconditionError);
}

TEST_CASE("diagnostics CSV round trip") {
  DiagnosticsSeries s;
  s.t = {0.0, 0.1, 0.2};
  s.sup_norm = {6.0, 6.000001, 5.9999};
  s.mass = {4072.935, 4072.935, 4072.9350001};
  s.mass_rel_err = {0.0, 1e-15, -2.5e-14};

  const auto plain = io::diagnostics_csv(s);
  CHECK(plain.substr(0, plain.find('\n')) == "t,sup_norm,mass,mass_rel_err,perturbation_sup,energy");
  auto back = io::parse_diagnostics_csv(plain);
  CHECK(back.t == s.t);
  CHECK(back.sup_norm == s.sup_norm);
  CHECK(back.mass == s.mass);
  CHECK(back.mass_rel_err == s.mass_rel_err);
  CHECK_FALSE(back.has_perturbation());
  CHECK_FALSE(back.has_energy());

  s.perturbation_sup = {0.6, 0.7, 0.9};
  s.energy = {-12.0, -12.0, -12.0000001};
  back = io::parse_diagnostics_csv(io::diagnostics_csv(s));
  CHECK(back.perturbation_sup == s.perturbation_sup);
  CHECK(back.energy == s.energy);

  CHECK_THROWS_AS(io::parse_diagnostics_csv("t,sup\n0,1\n"), PreconditionError);
  CHECK_THROWS_AS(io::parse_diagnostics_csv(std::string(io::diagnostics_header) + "\n0,1,2\n"), PreconditionError);
  CHECK_THROWS_AS(io::parse_diagnostics_csv(std::string(io::diagnostics_header) + "\n0,1,2,3,4,\n0,1,2,3,,\n"),
                  PreconditionError);
}
