#include "selfdesc/descriptions.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "selfdesc/io.hpp"
#include "selfdesc/rng.hpp"

namespace selfdesc::descriptions {

namespace {

void append_unique(std::vector<TypeId>& out, const TypeId& value) {
  if (std::find(out.begin(), out.end(), value) == out.end()) out.push_back(value);
}

bool is_other(const TypeId& t) { return t == kOtherType; }

bool is_other_only(const MentionDescription& d) {
  return d.concepts.size() == 1 && is_other(d.concepts.front());
}

}  // namespace

void DescriptionConfig::validate() const {
  if (max_concepts < 1) throw PreconditionError("max_concepts must be >= 1");
  if (!(other_threshold >= 0.0 && other_threshold <= 1.0)) {
    throw PreconditionError("other_threshold must lie in [0, 1]");
  }
}

void DescriptionMap::put(DescriptionEntry entry) {
  const auto it = index_.find(entry.type);
  if (it != index_.end()) {
    entries_[it->second] = std::move(entry);
    return;
  }
  index_.emplace(entry.type, entries_.size());
  entries_.push_back(std::move(entry));
}

const DescriptionEntry* DescriptionMap::find(const TypeId& type) const {
  const auto it = index_.find(type);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

const std::vector<TypeId>& DescriptionMap::concepts(const TypeId& type) const {
  static const std::vector<TypeId> kNone;
  const auto* e = find(type);
  return e ? e->concepts : kNone;
}

DescriptionMap build_cooccurrence_descriptions(
    const std::vector<AnnotatedSentence>& corpus) {
  std::vector<TypeId> order;
  std::unordered_map<TypeId, std::vector<TypeId>> concepts;
  for (const auto& s : corpus) {
    for (const auto& m : s.mentions) {
      for (const auto& t : m.types) {
        if (is_other(t)) continue;
        auto [it, fresh] = concepts.try_emplace(t);
        if (fresh) order.push_back(t);
        for (const auto& u : m.types) {
          if (u != t && !is_other(u)) append_unique(it->second, u);
        }
      }
    }
  }
  DescriptionMap out;
  for (const auto& t : order) out.put({t, std::move(concepts[t]), false});
  return out;
}

std::vector<TypeId> sample_concepts(const std::vector<TypeId>& full,
                                    const DescriptionConfig& cfg,
                                    std::uint64_t draw_key) {
  cfg.validate();
  if (full.size() <= cfg.max_concepts) return full;
  Rng rng(derive_seed(derive_seed(cfg.rng_seed, "concepts"), draw_key));
  std::vector<TypeId> out;
  for (auto i : rng.sample_indices(full.size(), cfg.max_concepts)) {
    out.push_back(full[i]);
  }
  return out;
}

DescriptionMap fuse_mention_descriptions(const DescriptionsByType& per_type) {
  DescriptionMap out;
  for (const auto& [type, descs] : per_type) {
    std::vector<TypeId> fused;
    for (const auto& d : descs) {
      for (const auto& c : d.concepts) {
        if (!is_other(c) && c != type) append_unique(fused, c);
      }
    }
    out.put({type, std::move(fused), false});
  }
  return out;
}

FilterResult apply_filtering(const DescriptionsByType& per_type,
                             const DescriptionConfig& cfg) {
  cfg.validate();
  FilterResult result;
  for (const auto& [type, descs] : per_type) {
    if (descs.empty()) {
      throw PreconditionError("type '" + type + "' has no mention descriptions");
    }
    double freq = 0.0;
    if (cfg.counting == OtherCounting::kPerDescription) {
      const auto n = std::count_if(descs.begin(), descs.end(), is_other_only);
      freq = static_cast<double>(n) / static_cast<double>(descs.size());
    } else {
      std::size_t others = 0;
      std::size_t total = 0;
      for (const auto& d : descs) {
        total += d.concepts.size();
        others += static_cast<std::size_t>(
            std::count_if(d.concepts.begin(), d.concepts.end(), is_other));
      }
      freq = total == 0 ? 0.0
                        : static_cast<double>(others) / static_cast<double>(total);
    }
    const bool filtered = freq > cfg.other_threshold;
    DescriptionEntry entry{type, {}, filtered};
    if (!filtered) {
      entry.concepts = fuse_mention_descriptions({{type, descs}}).concepts(type);
    }
    result.map.put(std::move(entry));
    result.report.push_back({type, freq, filtered});
  }
  return result;
}

DescriptionsByType collect_mention_descriptions(
    const std::vector<AnnotatedSentence>& corpus, const Describer& describe) {
  DescriptionsByType out;
  std::unordered_map<TypeId, std::size_t> slot;
  for (const auto& s : corpus) {
    std::vector<std::string> surfaces;
    for (const auto& m : s.mentions) {
      if (std::find(surfaces.begin(), surfaces.end(), m.surface) == surfaces.end()) {
        surfaces.push_back(m.surface);
      }
    }
    if (surfaces.empty()) continue;
    const auto labels = describe(s, surfaces);
    for (const auto& m : s.mentions) {
      const auto pos = static_cast<std::size_t>(
          std::find(surfaces.begin(), surfaces.end(), m.surface) - surfaces.begin());
      std::vector<TypeId> concepts;
      if (pos < labels.size()) concepts = labels[pos];
      if (concepts.empty()) concepts = {TypeId(kOtherType)};
      for (const auto& t : m.types) {
        if (is_other(t)) continue;
        auto [it, fresh] = slot.try_emplace(t, out.size());
        if (fresh) out.push_back({t, {}});
        out[it->second].second.push_back({m.surface, concepts});
      }
    }
  }
  return out;
}

void write_descriptions(const std::filesystem::path& path,
                        const DescriptionMap& map) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& e : map.entries()) {
    io::write_jsonl_line(out, io::Json{{"type", e.type},
                                       {"concepts", e.concepts},
                                       {"filtered", e.filtered}});
  }
}

DescriptionMap read_descriptions(const std::filesystem::path& path) {
  DescriptionMap map;
  io::for_each_jsonl(path, [&](const io::Json& j) {
    DescriptionEntry e;
    try {
      e.type = make_type_id(j.at("type").get<std::string>());
      for (const auto& c : j.at("concepts")) {
        e.concepts.push_back(make_type_id(c.get<std::string>()));
      }
      e.filtered = j.value("filtered", false);
    } catch (const io::Json::exception& ex) {
      throw DataError(path.string() + ": bad description record: " + ex.what());
    }
    if (e.type.empty()) throw DataError(path.string() + ": empty type id");
    if (map.find(e.type)) {
      throw DataError(path.string() + ": duplicate type '" + e.type + "'");
    }
    map.put(std::move(e));
  });
  return map;
}

}  // namespace selfdesc::descriptions
