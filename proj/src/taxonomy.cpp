#include "litter/taxonomy.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "litter/error.hpp"

namespace litter {

using ordered_json = nlohmann::ordered_json;

Taxonomy::Taxonomy(std::vector<WasteClass> classes, TaxonomyLimits limits) : classes_(std::move(classes)) {
  if (classes_.size() > limits.max_classes) {
    throw TaxonomyError("taxonomy has " + std::to_string(classes_.size()) + " classes, limit is " +
                        std::to_string(limits.max_classes));
  }
  index_.assign(static_cast<std::size_t>(limits.max_class_id) + 1, -1);
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    const WasteClass& c = classes_[i];
    if (c.class_id < 1 || c.class_id > limits.max_class_id) {
      throw TaxonomyError("class_id " + std::to_string(c.class_id) + " outside [1, " +
                          std::to_string(limits.max_class_id) + "]");
    }
    if (c.name.empty()) throw TaxonomyError("class " + std::to_string(c.class_id) + " has an empty name");
    if (c.report_category.empty()) {
      throw TaxonomyError("class " + std::to_string(c.class_id) + " has an empty report_category");
    }
    int& slot = index_[static_cast<std::size_t>(c.class_id)];
    if (slot != -1) throw TaxonomyError("duplicate class_id " + std::to_string(c.class_id));
    slot = static_cast<int>(i);
  }
}

bool Taxonomy::contains(int class_id) const noexcept {
  return class_id >= 0 && static_cast<std::size_t>(class_id) < index_.size() &&
         index_[static_cast<std::size_t>(class_id)] >= 0;
}

const WasteClass& Taxonomy::at(int class_id) const {
  if (!contains(class_id)) throw TaxonomyError("unknown class_id " + std::to_string(class_id));
  return classes_[static_cast<std::size_t>(index_[static_cast<std::size_t>(class_id)])];
}

const std::string& Taxonomy::rollup(int class_id) const { return at(class_id).report_category; }

std::vector<std::string> Taxonomy::report_categories() const {
  std::vector<std::string> out;
  for (const auto& c : classes_) {
    if (std::find(out.begin(), out.end(), c.report_category) == out.end()) out.push_back(c.report_category);
  }
  return out;
}

Taxonomy Taxonomy::default_taxonomy() {
  std::vector<WasteClass> classes = {
      {1, "Beverage and meal packages", "Beverage and meal packages"},
      {2, "Cigarettes and derivatives", "Cigarettes and derivatives"},
      {3, "Leaves", "Leaves"},
      {4, "Newspapers and papers", "Newspapers and papers"},
      {5, "Vegetable waste", "Vegetable waste"},
      {6, "Leaf piles", "Leaves"},
  };
  // Ids 7-25 have no established names; replace them with a site-specific taxonomy file.
  for (int id = 7; id <= 25; ++id) {
    char name[40];
    std::snprintf(name, sizeof(name), "Placeholder category %02d", id);
    classes.push_back({id, name, name});
  }
  return Taxonomy(std::move(classes));
}

namespace {

Taxonomy from_json(const nlohmann::json& doc, TaxonomyLimits limits) {
  if (!doc.is_array()) throw TaxonomyError("taxonomy document must be a JSON list");
  std::vector<WasteClass> classes;
  classes.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& item = doc[i];
    const std::string where = "taxonomy entry " + std::to_string(i);
    if (!item.is_object()) throw TaxonomyError(where + " is not an object");
    const auto id = item.find("class_id");
    const auto name = item.find("name");
    const auto category = item.find("report_category");
    if (id == item.end() || !id->is_number_integer()) throw TaxonomyError(where + ": class_id must be an integer");
    if (name == item.end() || !name->is_string()) throw TaxonomyError(where + ": name must be a string");
    if (category == item.end() || !category->is_string()) {
      throw TaxonomyError(where + ": report_category must be a string");
    }
    const auto raw_id = id->get<std::int64_t>();
    if (raw_id < 1 || raw_id > limits.max_class_id) {
      throw TaxonomyError(where + ": class_id " + std::to_string(raw_id) + " outside [1, " +
                          std::to_string(limits.max_class_id) + "]");
    }
    classes.push_back({static_cast<int>(raw_id), name->get<std::string>(), category->get<std::string>()});
  }
  return Taxonomy(std::move(classes), limits);
}

}  // namespace

Taxonomy load_taxonomy(std::istream& in, TaxonomyLimits limits) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw TaxonomyError(std::string("taxonomy parse failure: ") + e.what());
  }
  return from_json(doc, limits);
}

Taxonomy load_taxonomy_string(std::string_view text, TaxonomyLimits limits) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw TaxonomyError(std::string("taxonomy parse failure: ") + e.what());
  }
  return from_json(doc, limits);
}

Taxonomy load_taxonomy_file(const std::filesystem::path& path, TaxonomyLimits limits) {
  std::ifstream in(path);
  if (!in) throw TaxonomyError("cannot open taxonomy file " + path.string());
  return load_taxonomy(in, limits);
}

std::string taxonomy_to_json(const Taxonomy& taxonomy, int indent) {
  ordered_json doc = ordered_json::array();
  for (const auto& c : taxonomy.classes()) {
    doc.push_back({{"class_id", c.class_id}, {"name", c.name}, {"report_category", c.report_category}});
  }
  return doc.dump(indent);
}

void save_taxonomy_file(const Taxonomy& taxonomy, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw TaxonomyError("cannot write taxonomy file " + path.string());
  out << taxonomy_to_json(taxonomy) << '\n';
}

}  // namespace litter
