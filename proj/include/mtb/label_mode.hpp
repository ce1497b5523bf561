#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace mtb {

enum class LabelModeKind { All2One, All2All, All2Random };

std::string label_mode_name(LabelModeKind k);
LabelModeKind label_mode_from_name(const std::string& name);

// Label modification rule. All2Random keeps one fixed uniformly drawn target
// per trigger (the table is built once per (seed, catalog) and recorded in
// the manifest); the literal per-sample reading is selectable via
// `per_sample` for comparison runs.
struct LabelMode {
  LabelModeKind kind = LabelModeKind::All2One;
  int num_classes = 0;
  int target = 0;              // All2One
  std::uint64_t seed = 0;      // All2Random
  bool per_sample = false;     // All2Random: draw per sample instead of per trigger
  std::map<std::string, int> target_table;  // All2Random per-trigger targets

  static LabelMode all2one(int target, int num_classes);
  static LabelMode all2all(int num_classes);
  static LabelMode all2random(std::uint64_t seed, int num_classes, bool per_sample = false);

  // Fixes the per-trigger target table for this catalog. No-op for other
  // kinds. Must be called before assign/resolve under All2Random.
  void bind_catalog(const std::vector<std::string>& trigger_ids);

  // Backdoor label for a victim with clean label y poisoned by trigger_id.
  // sample_key participates only in the per-sample All2Random variant.
  int assign(int y, const std::string& trigger_id, std::uint64_t sample_key = 0) const;

  nlohmann::json to_json() const;
  static LabelMode from_json(const nlohmann::json& j);
};

}  // namespace mtb
