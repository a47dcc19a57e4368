#include <doctest.h>

#include <sstream>

#include "litter/error.hpp"
#include "litter/taxonomy.hpp"
#include "support.hpp"

using namespace litter;

TEST_CASE("default table has 25 classes and the five named ones") {
  const auto t = Taxonomy::default_taxonomy();
  CHECK(t.size() == 25);
  for (const char* name : {"Beverage and meal packages", "Cigarettes and derivatives", "Leaves",
                           "Newspapers and papers", "Vegetable waste"}) {
    bool found = false;
    for (const auto& c : t.classes()) found = found || c.name == name;
    CHECK_MESSAGE(found, name);
  }
  // Placeholder names are marked as such.
  int placeholders = 0;
  for (const auto& c : t.classes()) placeholders += c.name.rfind("Placeholder", 0) == 0;
  CHECK(placeholders == 19);
}

TEST_CASE("leaf and leaf-pile roll up to Leaves") {
  const auto t = load_taxonomy_string(R"([
    {"class_id": 3, "name": "leaf", "report_category": "Leaves"},
    {"class_id": 6, "name": "leaf-pile", "report_category": "Leaves"}])");
  CHECK(t.rollup(3) == "Leaves");
  CHECK(t.rollup(6) == "Leaves");
  CHECK(t.report_categories() == std::vector<std::string>{"Leaves"});

  const auto d = Taxonomy::default_taxonomy();
  CHECK(d.rollup(3) == "Leaves");
  CHECK(d.rollup(6) == "Leaves");
}

TEST_CASE("duplicate ids are rejected") {
  CHECK_THROWS_AS(load_taxonomy_string(R"([
    {"class_id": 3, "name": "a", "report_category": "A"},
    {"class_id": 3, "name": "b", "report_category": "B"}])"),
                  TaxonomyError);
}

TEST_CASE("malformed documents are rejected") {
  CHECK_THROWS_AS(load_taxonomy_string("{}"), TaxonomyError);
  CHECK_THROWS_AS(load_taxonomy_string("[{\"class_id\": 0, \"name\": \"x\", \"report_category\": \"x\"}]"),
                  TaxonomyError);
  CHECK_THROWS_AS(load_taxonomy_string("[{\"class_id\": 26, \"name\": \"x\", \"report_category\": \"x\"}]"),
                  TaxonomyError);
  CHECK_THROWS_AS(load_taxonomy_string("[{\"class_id\": 2, \"name\": \"\", \"report_category\": \"x\"}]"),
                  TaxonomyError);
  CHECK_THROWS_AS(load_taxonomy_string("[{\"class_id\": \"2\", \"name\": \"x\", \"report_category\": \"x\"}]"),
                  TaxonomyError);
  CHECK_THROWS_AS(load_taxonomy_string("not json"), TaxonomyError);
}

TEST_CASE("unknown id is an error") {
  const auto t = Taxonomy::default_taxonomy();
  CHECK_THROWS_AS(t.rollup(99), TaxonomyError);
  CHECK_FALSE(t.contains(99));
  CHECK_FALSE(t.contains(-1));
}

TEST_CASE("load, save, load round trip") {
  testing_support::TempDir dir("taxonomy");
  const auto t = Taxonomy::default_taxonomy();
  save_taxonomy_file(t, dir / "t.json");
  const auto back = load_taxonomy_file(dir / "t.json");
  CHECK(back == t);
  CHECK(taxonomy_to_json(back) == taxonomy_to_json(t));
  // Whitespace differences do not matter.
  CHECK(load_taxonomy_string(taxonomy_to_json(t, -1)) == t);
}
