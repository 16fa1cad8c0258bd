#include "selfdesc/io.hpp"

#include <fstream>
#include <sstream>

#include "selfdesc/text.hpp"

namespace selfdesc::io {

Json to_json(const AnnotatedSentence& s) {
  Json mentions = Json::array();
  for (const auto& m : s.mentions) {
    mentions.push_back(Json{{"surface", m.surface}, {"types", m.types}});
  }
  return Json{{"id", s.sentence.id},
              {"text", s.sentence.text},
              {"mentions", std::move(mentions)}};
}

AnnotatedSentence annotated_sentence_from_json(const Json& j) {
  AnnotatedSentence s;
  s.sentence.id = j.at("id").get<std::string>();
  s.sentence.text = j.at("text").get<std::string>();
  if (j.contains("mentions")) {
    for (const auto& m : j.at("mentions")) {
      TypedMention mention;
      mention.surface = m.at("surface").get<std::string>();
      for (const auto& t : m.at("types")) {
        mention.types.push_back(make_type_id(t.get<std::string>()));
      }
      s.mentions.push_back(std::move(mention));
    }
  }
  return s;
}

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const Json&)>& on_record) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    Json record;
    try {
      record = Json::parse(line);
    } catch (const Json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " +
                      e.what());
    }
    try {
      on_record(record);
    } catch (const Json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " +
                      e.what());
    }
  }
}

std::vector<Json> read_jsonl(const std::filesystem::path& path) {
  std::vector<Json> out;
  for_each_jsonl(path, [&](const Json& j) { out.push_back(j); });
  return out;
}

std::vector<AnnotatedSentence> read_corpus(const std::filesystem::path& path) {
  std::vector<AnnotatedSentence> out;
  for_each_jsonl(path, [&](const Json& j) {
    out.push_back(annotated_sentence_from_json(j));
  });
  return out;
}

void write_jsonl_line(std::ostream& out, const Json& record) {
  out << record.dump(-1, ' ', false, Json::error_handler_t::strict) << '\n';
}

void write_corpus(std::ostream& out, const std::vector<AnnotatedSentence>& corpus) {
  for (const auto& s : corpus) write_jsonl_line(out, to_json(s));
}

void write_corpus(const std::filesystem::path& path,
                  const std::vector<AnnotatedSentence>& corpus) {
  std::ostringstream buffer;
  write_corpus(buffer, corpus);
  write_file(path, buffer.str());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
}

}  // namespace selfdesc::io
