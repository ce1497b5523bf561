#include "mtb/label_mode.hpp"

#include "mtb/error.hpp"
#include "mtb/rng.hpp"

namespace mtb {

std::string label_mode_name(LabelModeKind k) {
  switch (k) {
    case LabelModeKind::All2One: return "all2one";
    case LabelModeKind::All2All: return "all2all";
    case LabelModeKind::All2Random: return "all2random";
  }
  return "all2one";
}

LabelModeKind label_mode_from_name(const std::string& name) {
  if (name == "all2one") return LabelModeKind::All2One;
  if (name == "all2all") return LabelModeKind::All2All;
  if (name == "all2random") return LabelModeKind::All2Random;
  throw PreconditionError("unknown label mode: " + name);
}

LabelMode LabelMode::all2one(int target, int num_classes) {
  if (target < 0 || target >= num_classes) {
    throw PreconditionError("all2one: target " + std::to_string(target) + " out of range");
  }
  LabelMode m;
  m.kind = LabelModeKind::All2One;
  m.target = target;
  m.num_classes = num_classes;
  return m;
}

LabelMode LabelMode::all2all(int num_classes) {
  LabelMode m;
  m.kind = LabelModeKind::All2All;
  m.num_classes = num_classes;
  return m;
}

LabelMode LabelMode::all2random(std::uint64_t seed, int num_classes, bool per_sample) {
  LabelMode m;
  m.kind = LabelModeKind::All2Random;
  m.seed = seed;
  m.num_classes = num_classes;
  m.per_sample = per_sample;
  return m;
}

void LabelMode::bind_catalog(const std::vector<std::string>& trigger_ids) {
  if (kind != LabelModeKind::All2Random || per_sample) return;
  target_table.clear();
  // Targets are drawn in catalog order from one stream so the table is a
  // pure function of (seed, catalog).
  SplitMix64 rng(derive_seed(seed, "all2random-table"));
  for (const auto& id : trigger_ids) {
    target_table[id] = static_cast<int>(rng.next_below(num_classes));
  }
}

int LabelMode::assign(int y, const std::string& trigger_id, std::uint64_t sample_key) const {
  if (y < 0 || y >= num_classes) {
    throw PreconditionError("assign_label: label " + std::to_string(y) + " out of range");
  }
  switch (kind) {
    case LabelModeKind::All2One:
      return target;
    case LabelModeKind::All2All:
      return (y + 1) % num_classes;
    case LabelModeKind::All2Random: {
      if (per_sample) {
        SplitMix64 rng(derive_seed(seed, sample_key ^ 0x5EED'5A3Fu));
        return static_cast<int>(rng.next_below(num_classes));
      }
      auto it = target_table.find(trigger_id);
      if (it == target_table.end()) {
        throw ConsistencyError("all2random: trigger '" + trigger_id + "' missing from target table");
      }
      return it->second;
    }
  }
  return target;
}

nlohmann::json LabelMode::to_json() const {
  nlohmann::json j;
  j["mode"] = label_mode_name(kind);
  j["num_classes"] = num_classes;
  if (kind == LabelModeKind::All2One) j["target"] = target;
  if (kind == LabelModeKind::All2Random) {
    j["seed"] = seed;
    j["per_sample"] = per_sample;
    if (!per_sample) j["target_table"] = target_table;
  }
  return j;
}

LabelMode LabelMode::from_json(const nlohmann::json& j) {
  LabelMode m;
  m.kind = label_mode_from_name(j.at("mode").get<std::string>());
  m.num_classes = j.at("num_classes").get<int>();
  if (m.kind == LabelModeKind::All2One) m.target = j.at("target").get<int>();
  if (m.kind == LabelModeKind::All2Random) {
    m.seed = j.at("seed").get<std::uint64_t>();
    m.per_sample = j.value("per_sample", false);
    if (j.contains("target_table")) {
      m.target_table = j.at("target_table").get<std::map<std::string, int>>();
    }
  }
  return m;
}

}  // namespace mtb
