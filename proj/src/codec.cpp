#include "selfdesc/codec.hpp"

#include "selfdesc/text.hpp"

namespace selfdesc::codec {

using C = CodecConfig;

namespace {

std::vector<std::string> split_on(std::string_view s, std::string_view sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      return out;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + sep.size();
  }
}

std::string render_entry(const ConceptDescription& entry) {
  if (entry.concepts.empty()) return entry.type;
  std::string out = entry.type;
  out.append(C::type_desc_colon);
  out.append(C::type_desc_open);
  out.append(text::join(entry.concepts, C::concept_separator));
  out.append(C::type_desc_close);
  return out;
}

std::string_view strip_descriptor(std::string_view text,
                                  std::string_view descriptor) {
  auto t = text::trim(text);
  if (!text::starts_with(t, descriptor)) {
    throw DataError("prompt does not start with " + std::string(descriptor));
  }
  t.remove_prefix(descriptor.size());
  return text::trim(t);
}

}  // namespace

std::string serialize_prompt_md(const PromptMD& prompt) {
  std::string out(C::md_descriptor);
  out.push_back(' ');
  out.append(text::join(prompt.targets(), C::pair_separator_emit));
  return out;
}

std::string serialize_prompt_eg(const PromptEG& prompt) {
  std::vector<std::string> parts;
  parts.reserve(prompt.entries().size());
  for (const auto& e : prompt.entries()) parts.push_back(render_entry(e));
  std::string out(C::eg_descriptor);
  out.push_back(' ');
  out.append(text::join(parts, C::type_list_separator));
  return out;
}

std::string serialize_target(const TargetSequence& target) {
  if (target.pairs.empty()) return "";
  std::vector<std::string> clauses;
  clauses.reserve(target.pairs.size());
  for (const auto& p : target.pairs) {
    std::string clause = p.surface;
    clause.append(C::copula);
    clause.append(text::join(p.labels, C::concept_separator));
    clauses.push_back(std::move(clause));
  }
  std::string out = text::join(clauses, C::pair_separator_emit);
  out.append(C::clause_terminator);
  return out;
}

ParseResult parse_generated(Task task, std::string_view text) {
  ParseResult result;
  result.target.task = task;
  auto body = text::trim(text);
  if (text::ends_with(body, C::clause_terminator)) {
    body.remove_suffix(C::clause_terminator.size());
  }
  if (text::trim(body).empty()) return result;

  std::vector<std::string> clauses;
  for (const auto& chunk : split_on(body, C::pair_separator_emit)) {
    const auto pieces = split_on(chunk, C::pair_separator_alt);
    std::string current = pieces.front();
    for (std::size_t i = 1; i < pieces.size(); ++i) {
      if (text::contains(current, C::copula)) {
        clauses.push_back(std::move(current));
        current = pieces[i];
      } else {
        current.append(C::pair_separator_alt);
        current.append(pieces[i]);
      }
    }
    clauses.push_back(std::move(current));
  }

  for (const auto& raw : clauses) {
    const auto clause = text::trim(raw);
    const auto pos = clause.rfind(C::copula);
    if (pos == std::string_view::npos) {
      result.diagnostics.push_back("no copula in clause '" +
                                   std::string(clause) + "'");
      continue;
    }
    const auto surface = text::trim(clause.substr(0, pos));
    const auto rhs = text::trim(clause.substr(pos + C::copula.size()));
    if (surface.empty() || rhs.empty()) {
      result.diagnostics.push_back("empty side in clause '" +
                                   std::string(clause) + "'");
      continue;
    }
    TargetPair pair{std::string(surface), {}};
    if (task == Task::EntityGeneration) {
      pair.labels.emplace_back(rhs);
    } else {
      for (const auto& label : split_on(rhs, C::concept_separator)) {
        const auto l = text::trim(label);
        if (!l.empty()) pair.labels.emplace_back(l);
      }
      if (pair.labels.empty()) {
        result.diagnostics.push_back("no concepts in clause '" +
                                     std::string(clause) + "'");
        continue;
      }
    }
    result.target.pairs.push_back(std::move(pair));
  }
  return result;
}

PromptMD parse_prompt_md(std::string_view text) {
  const auto body = strip_descriptor(text, C::md_descriptor);
  if (body.empty()) throw DataError("MD prompt has no targets");
  std::vector<std::string> targets;
  for (const auto& t : split_on(body, C::pair_separator_emit)) {
    targets.emplace_back(text::trim(t));
  }
  try {
    return PromptMD(std::move(targets));
  } catch (const PreconditionError& e) {
    throw DataError(e.what());
  }
}

PromptEG parse_prompt_eg(std::string_view text) {
  const auto body = strip_descriptor(text, C::eg_descriptor);
  if (body.empty()) throw DataError("EG prompt has no types");
  std::vector<ConceptDescription> entries;
  for (const auto& raw : split_on(body, C::type_list_separator)) {
    const auto entry = text::trim(raw);
    if (entry.empty()) continue;  // tolerate a trailing separator
    std::string open(C::type_desc_colon);
    open.append(C::type_desc_open);
    const auto pos = entry.find(open);
    ConceptDescription d;
    if (pos != std::string_view::npos &&
        text::ends_with(entry, C::type_desc_close)) {
      d.type = make_type_id(entry.substr(0, pos));
      const auto inner = text::trim(entry.substr(
          pos + open.size(),
          entry.size() - pos - open.size() - C::type_desc_close.size()));
      if (!inner.empty()) {
        for (const auto& c : split_on(inner, C::concept_separator)) {
          d.concepts.push_back(make_type_id(c));
        }
      }
    } else {
      d.type = make_type_id(entry);
    }
    entries.push_back(std::move(d));
  }
  try {
    return PromptEG(std::move(entries));
  } catch (const PreconditionError& e) {
    throw DataError(e.what());
  }
}

bool contains_reserved_separator(std::string_view s) {
  return text::contains(s, C::copula) ||
         text::contains(s, C::pair_separator_emit) ||
         text::contains(s, C::concept_separator) ||
         text::contains(s, C::clause_terminator);
}

bool is_round_trip_safe_surface(std::string_view surface) {
  if (surface.empty() || text::trim(surface).size() != surface.size()) {
    return false;
  }
  return !text::contains(surface, C::copula) &&
         !text::contains(surface, C::pair_separator_emit) &&
         !text::ends_with(surface, C::clause_terminator) &&
         !text::ends_with(surface, ";");
}

}  // namespace selfdesc::codec
