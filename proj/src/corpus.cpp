#include "selfdesc/corpus.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "selfdesc/codec.hpp"
#include "selfdesc/text.hpp"

namespace selfdesc::corpus {

void BuildConfig::validate() const {
  if (min_type_instances < 1) {
    throw PreconditionError("min_type_instances must be >= 1");
  }
  if (max_type_tokens < 1) {
    throw PreconditionError("max_type_tokens must be >= 1");
  }
  if (jobs < 1) throw PreconditionError("jobs must be >= 1");
}

BuildDiagnostics& BuildDiagnostics::operator+=(const BuildDiagnostics& o) {
  malformed_items += o.malformed_items;
  malformed_pages += o.malformed_pages;
  invalid_anchors += o.invalid_anchors;
  unknown_anchor_targets += o.unknown_anchor_targets;
  unsafe_mentions += o.unsafe_mentions;
  cross_sentence_mentions += o.cross_sentence_mentions;
  dropped_sentences += o.dropped_sentences;
  return *this;
}

io::Json BuildDiagnostics::to_json() const {
  return io::Json{{"malformed_items", malformed_items},
                  {"malformed_pages", malformed_pages},
                  {"invalid_anchors", invalid_anchors},
                  {"unknown_anchor_targets", unknown_anchor_targets},
                  {"unsafe_mentions", unsafe_mentions},
                  {"cross_sentence_mentions", cross_sentence_mentions},
                  {"dropped_sentences", dropped_sentences}};
}

KnowledgeBase::KnowledgeBase(std::vector<KbItem> items)
    : items_(std::move(items)) {
  for (std::size_t i = 0; i < items_.size(); ++i) {
    const auto& item = items_[i];
    if (!by_id_.emplace(item.id, i).second) {
      throw DataError("duplicate KB item id '" + item.id + "'");
    }
    by_label_.emplace(item.label, i);
    for (const auto& a : item.aliases) by_alias_.emplace(a, i);
  }
}

const KbItem* KnowledgeBase::find(const std::string& id) const {
  const auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &items_[it->second];
}

const KbItem* KnowledgeBase::find_by_name(const std::string& title) const {
  if (const auto it = by_label_.find(title); it != by_label_.end()) {
    return &items_[it->second];
  }
  if (const auto it = by_alias_.find(title); it != by_alias_.end()) {
    return &items_[it->second];
  }
  return nullptr;
}

std::string KnowledgeBase::resolve_claim(const std::string& value) const {
  if (const auto* item = find(value)) return item->label;
  return value;
}

namespace {

bool string_array(const io::Json& j, const char* key,
                  std::vector<std::string>& out) {
  if (!j.contains(key)) return true;
  const auto& arr = j.at(key);
  if (!arr.is_array()) return false;
  for (const auto& v : arr) {
    if (!v.is_string()) return false;
    out.push_back(v.get<std::string>());
  }
  return true;
}

}  // namespace

bool kb_item_from_json(const io::Json& j, KbItem& out) {
  if (!j.is_object() || !j.contains("id") || !j.at("id").is_string() ||
      !j.contains("label") || !j.at("label").is_string()) {
    return false;
  }
  out = KbItem{};
  out.id = j.at("id").get<std::string>();
  out.label = j.at("label").get<std::string>();
  if (out.id.empty()) return false;
  return string_array(j, "aliases", out.aliases) &&
         string_array(j, "instance_of", out.instance_of) &&
         string_array(j, "subclass_of", out.subclass_of) &&
         string_array(j, "occupation", out.occupation);
}

bool page_from_json(const io::Json& j, WikiPage& out) {
  if (!j.is_object() || !j.contains("title") || !j.at("title").is_string() ||
      !j.contains("text") || !j.at("text").is_string()) {
    return false;
  }
  out = WikiPage{};
  out.title = j.at("title").get<std::string>();
  out.text = j.at("text").get<std::string>();
  if (j.contains("anchors")) {
    if (!j.at("anchors").is_array()) return false;
    for (const auto& a : j.at("anchors")) {
      if (!a.is_object() || !a.contains("surface") || !a.contains("target") ||
          !a.contains("offset") || !a.at("surface").is_string() ||
          !a.at("target").is_string() || !a.at("offset").is_number_unsigned()) {
        return false;
      }
      out.anchors.push_back({a.at("surface").get<std::string>(),
                             a.at("target").get<std::string>(),
                             a.at("offset").get<std::size_t>()});
    }
  }
  return true;
}

std::vector<KbItem> read_kb(const std::filesystem::path& path,
                            BuildDiagnostics& diag) {
  std::vector<KbItem> items;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    KbItem item;
    const auto j = io::Json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !kb_item_from_json(j, item)) {
      ++diag.malformed_items;
      continue;
    }
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<WikiPage> read_pages(const std::filesystem::path& path,
                                 BuildDiagnostics& diag) {
  std::vector<WikiPage> pages;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    WikiPage page;
    const auto j = io::Json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !page_from_json(j, page)) {
      ++diag.malformed_pages;
      continue;
    }
    pages.push_back(std::move(page));
  }
  return pages;
}

TypeId truncate_type_name(std::string_view name, const BuildConfig& cfg) {
  const auto tokens =
      text::split_whitespace(text::normalize_identifier(name, true));
  if (tokens.size() <= cfg.max_type_tokens) return text::join(tokens, " ");
  std::vector<std::string> prefix;
  for (const auto& tok : tokens) {
    const bool stop = std::find(cfg.preposition_stoplist.begin(),
                                cfg.preposition_stoplist.end(),
                                tok) != cfg.preposition_stoplist.end();
    if (stop) break;
    prefix.push_back(tok);
  }
  if (prefix.empty()) prefix = tokens;
  if (prefix.size() > cfg.max_type_tokens) prefix.resize(cfg.max_type_tokens);
  return text::join(prefix, " ");
}

namespace {

std::vector<TypeId> claimed_types(const KbItem& item, const KnowledgeBase& kb,
                                  const BuildConfig& cfg) {
  std::vector<TypeId> out;
  std::set<TypeId> seen;
  for (const auto* claims : {&item.instance_of, &item.subclass_of,
                             &item.occupation}) {
    for (const auto& value : *claims) {
      const auto resolved = kb.resolve_claim(value);
      if (text::trim(resolved).empty()) continue;
      auto type = truncate_type_name(resolved, cfg);
      if (type.empty() || type == kOtherType) continue;
      if (seen.insert(type).second) out.push_back(std::move(type));
    }
  }
  return out;
}

}  // namespace

TypeDictionary build_type_dictionary(const KnowledgeBase& kb,
                                     const BuildConfig& cfg) {
  cfg.validate();
  std::map<TypeId, std::size_t> counts;
  for (const auto& item : kb.items()) {
    for (const auto& t : claimed_types(item, kb, cfg)) ++counts[t];
  }
  TypeDictionary dict;
  for (const auto& [type, n] : counts) {
    if (n >= cfg.min_type_instances) dict.set(type, n);
  }
  return dict;
}

std::vector<TypeId> item_types(const KbItem& item, const KnowledgeBase& kb,
                               const TypeDictionary& dict,
                               const BuildConfig& cfg) {
  std::vector<TypeId> out;
  for (auto& t : claimed_types(item, kb, cfg)) {
    if (dict.contains(t)) out.push_back(std::move(t));
  }
  if (out.empty()) out.emplace_back(kOtherType);
  return out;
}

namespace {

const std::set<std::u32string>& abbreviations() {
  static const std::set<std::u32string> kAbbrev = {
      U"Dr.",  U"Mr.",  U"Mrs.", U"Ms.",  U"Prof.", U"St.",  U"Jr.",
      U"Sr.",  U"Gen.", U"Col.", U"Lt.",  U"Sgt.",  U"Capt.", U"Rev.",
      U"Hon.", U"Mt.",  U"Ft.",  U"vs.",  U"e.g.",  U"i.e.", U"No."};
  return kAbbrev;
}

// "A.", "J.K.", "U.S." -- single letters each followed by a period.
bool is_initials(std::u32string_view tok) {
  if (tok.size() < 2 || tok.size() % 2 != 0) return false;
  for (std::size_t i = 0; i < tok.size(); i += 2) {
    if (!text::is_alnum(tok[i]) || tok[i + 1] != U'.') return false;
  }
  return true;
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> split_sentences(
    std::string_view utf8) {
  const auto cps = text::decode(utf8);
  const std::size_t n = cps.size();
  std::vector<std::pair<std::size_t, std::size_t>> spans;

  auto emit = [&](std::size_t start, std::size_t end) {
    while (start < end && text::is_space(cps[start])) ++start;
    while (end > start && text::is_space(cps[end - 1])) --end;
    if (start < end) spans.emplace_back(start, end);
  };

  std::size_t start = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const char32_t c = cps[i];
    if (c != U'.' && c != U'!' && c != U'?') continue;
    if (i + 1 >= n || !text::is_space(cps[i + 1])) continue;
    std::size_t j = i + 1;
    while (j < n && text::is_space(cps[j])) ++j;
    if (j >= n || !text::is_upper_or_digit(cps[j])) continue;
    if (c == U'.') {
      std::size_t w = i;
      while (w > start && !text::is_space(cps[w - 1])) --w;
      const std::u32string_view token(cps.data() + w, i + 1 - w);
      if (abbreviations().count(std::u32string(token)) > 0 ||
          is_initials(token)) {
        continue;
      }
    }
    emit(start, i + 1);
    start = j;
  }
  emit(start, n);
  return spans;
}

namespace {

struct RawMention {
  std::size_t start;
  std::size_t end;
  std::string surface;
  std::vector<TypeId> types;
};

bool overlaps(const RawMention& m, std::size_t start, std::size_t end) {
  return start < m.end && m.start < end;
}

bool word_boundary(const std::u32string& text, std::size_t start,
                   std::size_t end) {
  const bool left_ok = start == 0 || !text::is_alnum(text[start - 1]);
  const bool right_ok = end >= text.size() || !text::is_alnum(text[end]);
  return left_ok && right_ok;
}

std::vector<std::size_t> phrase_occurrences(const std::u32string& text,
                                            const std::u32string& phrase) {
  std::vector<std::size_t> out;
  std::size_t from = 0;
  while (auto pos = text::find(text, phrase, from)) {
    if (word_boundary(text, *pos, *pos + phrase.size())) {
      out.push_back(*pos);
      from = *pos + phrase.size();
    } else {
      from = *pos + 1;
    }
  }
  return out;
}

}  // namespace

std::vector<AnnotatedSentence> harvest_mentions(const WikiPage& page,
                                                const KnowledgeBase& kb,
                                                const TypeDictionary& dict,
                                                const BuildConfig& cfg,
                                                BuildDiagnostics& diag) {
  const auto cps = text::decode(page.text);
  std::vector<RawMention> mentions;

  for (const auto& anchor : page.anchors) {
    const auto surface = text::decode(anchor.surface);
    if (surface.empty() || anchor.offset + surface.size() > cps.size() ||
        cps.compare(anchor.offset, surface.size(), surface) != 0) {
      ++diag.invalid_anchors;
      continue;
    }
    RawMention m{anchor.offset, anchor.offset + surface.size(), anchor.surface,
                 {}};
    if (const auto* item = kb.find(anchor.target)) {
      m.types = item_types(*item, kb, dict, cfg);
    } else {
      ++diag.unknown_anchor_targets;
      m.types = {std::string(kOtherType)};
    }
    const bool duplicate = std::any_of(
        mentions.begin(), mentions.end(), [&](const RawMention& other) {
          return other.start == m.start && other.end == m.end;
        });
    if (!duplicate) mentions.push_back(std::move(m));
  }

  // Unanchored self-mentions: the page item's label and aliases, ranked by
  // frequency on the page.
  if (const auto* self = kb.find_by_name(page.title);
      self != nullptr && cfg.top_np_count > 0) {
    std::vector<std::string> candidates{self->label};
    for (const auto& a : self->aliases) {
      if (std::find(candidates.begin(), candidates.end(), a) ==
          candidates.end()) {
        candidates.push_back(a);
      }
    }
    struct Ranked {
      std::string phrase;
      std::vector<std::size_t> occurrences;
    };
    std::vector<Ranked> ranked;
    for (const auto& c : candidates) {
      if (text::trim(c).empty()) continue;
      auto occ = phrase_occurrences(cps, text::decode(c));
      if (!occ.empty()) ranked.push_back({c, std::move(occ)});
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const Ranked& a, const Ranked& b) {
                       return a.occurrences.size() > b.occurrences.size();
                     });
    if (ranked.size() > cfg.top_np_count) ranked.resize(cfg.top_np_count);
    // Overlaps between the kept phrases go to the longer one.
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const Ranked& a, const Ranked& b) {
                       return text::length(a.phrase) > text::length(b.phrase);
                     });
    const auto self_types = item_types(*self, kb, dict, cfg);
    for (const auto& r : ranked) {
      const auto len = text::length(r.phrase);
      for (const auto start : r.occurrences) {
        const bool taken = std::any_of(
            mentions.begin(), mentions.end(), [&](const RawMention& m) {
              return overlaps(m, start, start + len);
            });
        if (!taken) {
          mentions.push_back({start, start + len, r.phrase, self_types});
        }
      }
    }
  }

  std::sort(mentions.begin(), mentions.end(),
            [](const RawMention& a, const RawMention& b) {
              if (a.start != b.start) return a.start < b.start;
              return a.end > b.end;
            });

  std::vector<AnnotatedSentence> out;
  std::vector<bool> placed(mentions.size(), false);
  const auto spans = split_sentences(page.text);
  for (std::size_t s = 0; s < spans.size(); ++s) {
    const auto [start, end] = spans[s];
    AnnotatedSentence sentence;
    sentence.sentence.id = page.title + "#" + std::to_string(s);
    sentence.sentence.text =
        text::encode(std::u32string_view(cps).substr(start, end - start));
    for (std::size_t i = 0; i < mentions.size(); ++i) {
      const auto& m = mentions[i];
      if (m.start >= start && m.end <= end) {
        placed[i] = true;
        if (!codec::is_round_trip_safe_surface(m.surface)) {
          ++diag.unsafe_mentions;
          continue;
        }
        sentence.mentions.push_back({m.surface, m.types});
      }
    }
    if (sentence.mentions.empty()) {
      ++diag.dropped_sentences;
      continue;
    }
    sort_mentions(sentence);
    out.push_back(std::move(sentence));
  }
  diag.cross_sentence_mentions += static_cast<std::size_t>(
      std::count(placed.begin(), placed.end(), false));
  return out;
}

CorpusBuild build_corpus(const KnowledgeBase& kb,
                         const std::vector<WikiPage>& pages,
                         const BuildConfig& cfg) {
  cfg.validate();
  CorpusBuild build;
  build.dictionary = build_type_dictionary(kb, cfg);

  std::set<std::string> titles;
  for (const auto& p : pages) {
    if (!titles.insert(p.title).second) {
      throw DataError("duplicate page title '" + p.title + "'");
    }
  }

  std::vector<std::vector<AnnotatedSentence>> per_page(pages.size());
  std::vector<BuildDiagnostics> per_page_diag(pages.size());
  std::vector<std::exception_ptr> failures(pages.size());
  const auto work = [&](std::size_t worker, std::size_t workers) {
    for (std::size_t i = worker; i < pages.size(); i += workers) {
      try {
        per_page[i] = harvest_mentions(pages[i], kb, build.dictionary, cfg,
                                       per_page_diag[i]);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min(cfg.jobs, std::max<std::size_t>(1, pages.size()));
  if (workers <= 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work, w, workers);
    for (auto& t : threads) t.join();
  }

  for (std::size_t i = 0; i < pages.size(); ++i) {
    if (failures[i]) std::rethrow_exception(failures[i]);
    build.diagnostics += per_page_diag[i];
    for (auto& s : per_page[i]) build.sentences.push_back(std::move(s));
  }
  return build;
}

void write_dictionary(const std::filesystem::path& path,
                      const TypeDictionary& dict) {
  std::ostringstream out;
  for (const auto& [type, n] : dict.entries()) {
    io::write_jsonl_line(out, io::Json{{"type", type}, {"count", n}});
  }
  io::write_file(path, out.str());
}

TypeDictionary count_types(const std::vector<AnnotatedSentence>& corpus) {
  std::map<TypeId, std::size_t> counts;
  for (const auto& s : corpus) {
    for (const auto& m : s.mentions) {
      for (const auto& t : m.types) {
        if (t != kOtherType) ++counts[t];
      }
    }
  }
  TypeDictionary dict;
  for (const auto& [t, c] : counts) dict.set(t, c);
  return dict;
}

TypeDictionary read_dictionary(const std::filesystem::path& path) {
  TypeDictionary dict;
  io::for_each_jsonl(path, [&](const io::Json& j) {
    dict.set(j.at("type").get<std::string>(), j.at("count").get<std::size_t>());
  });
  return dict;
}

}  // namespace selfdesc::corpus
