#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace litter {

struct WasteClass {
  int class_id = 0;
  std::string name;
  /// Cleanliness-reporting bucket. Several training classes may share one.
  std::string report_category;

  friend bool operator==(const WasteClass&, const WasteClass&) = default;
};

struct TaxonomyLimits {
  int max_class_id = 25;
  std::size_t max_classes = 25;
};

/// Validated, immutable class table.
class Taxonomy {
 public:
  Taxonomy() = default;
  /// Throws TaxonomyError on duplicate ids, empty names or ids outside [1, limits.max_class_id].
  explicit Taxonomy(std::vector<WasteClass> classes, TaxonomyLimits limits = {});

  const std::vector<WasteClass>& classes() const noexcept { return classes_; }
  std::size_t size() const noexcept { return classes_.size(); }

  bool contains(int class_id) const noexcept;
  const WasteClass& at(int class_id) const;
  const std::string& rollup(int class_id) const;

  /// Distinct report categories in first-appearance order.
  std::vector<std::string> report_categories() const;

  /// The shipped 25-class table.
  static Taxonomy default_taxonomy();

  friend bool operator==(const Taxonomy& a, const Taxonomy& b) { return a.classes_ == b.classes_; }

 private:
  std::vector<WasteClass> classes_;
  // Dense lookup: index_[class_id] is the position in classes_ or -1.
  std::vector<int> index_;
};

Taxonomy load_taxonomy(std::istream& in, TaxonomyLimits limits = {});
Taxonomy load_taxonomy_string(std::string_view text, TaxonomyLimits limits = {});
Taxonomy load_taxonomy_file(const std::filesystem::path& path, TaxonomyLimits limits = {});

std::string taxonomy_to_json(const Taxonomy& taxonomy, int indent = 2);
void save_taxonomy_file(const Taxonomy& taxonomy, const std::filesystem::path& path);

}  // namespace litter
