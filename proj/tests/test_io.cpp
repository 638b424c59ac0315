#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "anisoperc/cli.hpp"
#include "anisoperc/io.hpp"
#include "anisoperc/manifest.hpp"

using namespace anisoperc;
using nlohmann::json;

namespace {

std::string error_of(const json& j) {
  try {
    manifest_from_json(j);
  } catch (const ManifestError& e) {
    return e.what();
  }
  return {};
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
  return s;
}

}  // namespace

TEST_CASE("lattice spec round trip") {
  LatticeSpec mixed = LatticeSpec::nearest(3, 1, 10, 6, Boundary::free);
  mixed.boundary_s = Boundary::periodic;
  const std::vector<LatticeSpec> specs{
      LatticeSpec::nearest(2, 1, 32, 8),
      LatticeSpec::nearest(1, 2, 7, 5, Boundary::free),
      mixed,
      LatticeSpec::layered(2, 9, 3),
      LatticeSpec::spread_out(2, 1, 12, 12, 2, Boundary::periodic, RangeNorm::l1),
  };
  for (const auto& s : specs) {
    const auto j = lattice_to_json(s);
    CHECK(lattice_from_json(json::parse(j.dump())) == s);
  }
  CHECK(lattice_to_json(mixed)["boundary"] == json{{"d", "free"}, {"s", "periodic"}});
  CHECK(lattice_to_json(specs[0])["boundary"] == "periodic");
  const auto j = lattice_to_json(specs[0]);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  CHECK(join(keys) == "d,s,side_d,side_s,boundary,variant,range,norm,layers,multigraph");

  // layered without side_s infers layers + 1
  const LatticeSpec lay = lattice_from_json(json{{"variant", "layered"}, {"layers", 2}, {"boundary", {{"d", "free"}, {"s", "periodic"}}}});
  CHECK(lay.side_s == 3);
}

TEST_CASE("manifest errors name the offending key") {
  CHECK(error_of(json{{"lattice", {{"dims", 2}}}}).find("lattice.dims") != std::string::npos);
  CHECK(error_of(json{{"bogus", 1}}).find("bogus") != std::string::npos);
  CHECK(error_of(json{{"params", {{"p", "high"}}}}).find("params.p") != std::string::npos);
  CHECK(error_of(json{{"params", {{"p", {0.2, 1.5}}}}}).find("params.p[1]") != std::string::npos);
  CHECK(error_of(json{{"lattice", {{"boundary", "sticky"}}}}).find("lattice.boundary") != std::string::npos);
  CHECK(error_of(json{{"lattice", {{"boundary", 3}}}}).find("lattice.boundary") != std::string::npos);
  CHECK(error_of(json{{"lattice", {{"side_d", 1}}}}).find("lattice") != std::string::npos);
  CHECK(error_of(json{{"estimators", {{"tol", 1e-5}}}}).find("estimators.tol") != std::string::npos);
  CHECK(error_of(json{{"estimators", {{"L", {16, 2.5}}}}}).find("estimators.L[1]") != std::string::npos);
  CHECK(error_of(json{{"check", {{"p_c", {{"two", 0.5}}}}}}).find("check.p_c.two") != std::string::npos);
  CHECK(error_of(json{{"schema_version", 99}}).find("schema_version") != std::string::npos);
  CHECK(error_of(json{{"seeds", {{"master", -1}}}}).find("seeds.master") != std::string::npos);
  CHECK(error_of(json{{"params", {{"p", 0.3}}}}).empty());
}

TEST_CASE("manifest round trip and hash") {
  Manifest m;
  m.lattice = LatticeSpec::nearest(3, 1, 16, 4, Boundary::free);
  m.p_grid = {0.1, 0.2};
  m.q_grid = {0.5};
  m.p_c = 0.25;
  m.seed = 12345678901234ull;
  m.sizes = {16, 24};
  m.check_pc = {{3, 0.2488126}};
  m.fit_input = "curve.csv";
  const auto j = manifest_to_json(m);
  const Manifest back = manifest_from_json(json::parse(j.dump()));
  CHECK(manifest_to_json(back) == j);
  CHECK(manifest_hash(back) == manifest_hash(m));

  Manifest other = m;
  other.out_dir = "/elsewhere";
  CHECK(manifest_hash(other) == manifest_hash(m));
  other.seed += 1;
  CHECK(manifest_hash(other) != manifest_hash(m));

  // Layering: keys absent from the file keep the base value.
  Manifest base;
  base.replicas = 7;
  const Manifest layered = manifest_from_json(json{{"seeds", {{"master", 9}}}}, base);
  CHECK(layered.replicas == 7);
  CHECK(layered.seed == 9);
  CHECK(manifest_from_json(json{{"params", {{"p", 0.3}}}}).p_grid == std::vector<double>{0.3});

  const auto dir = std::filesystem::temp_directory_path() / "anisoperc_test_io";
  write_text(dir / "m.json", j.dump(2));
  CHECK(manifest_hash(load_manifest(dir / "m.json")) == manifest_hash(m));
  write_text(dir / "bad.json", "{ not json");
  CHECK_THROWS_AS(load_manifest(dir / "bad.json"), ManifestError);
  CHECK_THROWS_AS(load_manifest(dir / "missing.json"), SpecError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("p_c resolution") {
  Manifest m;
  CHECK(m.resolved_pc() == 0.5);
  m.lattice = LatticeSpec::nearest(9, 1, 4, 4);
  CHECK_THROWS_AS(m.resolved_pc(), ManifestError);
  m.p_c = 0.05;
  CHECK(m.resolved_pc() == 0.05);
}

TEST_CASE("csv writer and reader") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1e-12) == "1e-12");
  CHECK(format_double(std::nan("")) == "nan");
  CHECK(csv_cell(ojson("a,b")) == "\"a,b\"");
  CHECK(csv_cell(ojson("say \"hi\"")) == "\"say \"\"hi\"\"\"");
  CHECK(csv_cell(ojson(nullptr)) == "nan");
  CHECK(csv_cell(ojson(true)) == "true");
  CHECK(csv_cell(ojson(std::uint64_t{18446744073709551615ull})) == "18446744073709551615");

  Table t({"x", "label", "y"});
  t.add(ojson{{"x", 0.25}, {"label", "a,\"b\""}, {"y", num(std::nan(""))}});
  t.add(ojson{{"x", 3}, {"label", "plain"}, {"y", 1.5}});
  CHECK_THROWS(t.add(ojson{{"label", "x"}, {"x", 1}, {"y", 2}}));
  CHECK_THROWS(t.add(ojson{{"x", 1}}));
  CHECK(t.csv() == "x,label,y\n0.25,\"a,\"\"b\"\"\",nan\n3,plain,1.5\n");
  CHECK(t.jsonl() == "{\"x\":0.25,\"label\":\"a,\\\"b\\\"\",\"y\":null}\n{\"x\":3,\"label\":\"plain\",\"y\":1.5}\n");

  const CsvData d = parse_csv(t.csv());
  REQUIRE(d.rows.size() == 2);
  CHECK(d.rows[0][1] == "a,\"b\"");
  CHECK(d.column("y") == 2);
  CHECK(d.column("z") == -1);
  CHECK(std::isnan(parse_double(d.rows[0][2])));
  CHECK(parse_double("0.25") == 0.25);
  CHECK_THROWS_AS(parse_double("0.25x"), SpecError);
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("golden headers") {
  CHECK(join(cli::curve_header()) ==
        "p,pc_minus_p,qc,qc_lo,qc_hi,bound_line,L,samples,flag,bound_holds,ratio,p_c,seed,schema_version,manifest_hash");
}
