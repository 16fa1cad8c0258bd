#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "selfdesc/core.hpp"

namespace selfdesc::io {

// Output objects keep schema key order; inputs accept either ordering.
using Json = nlohmann::ordered_json;

Json to_json(const AnnotatedSentence& s);
AnnotatedSentence annotated_sentence_from_json(const Json& j);

// Calls `on_record` for every non-blank line. Parse failures are rethrown
// as DataError naming the file and line.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const Json&)>& on_record);
std::vector<Json> read_jsonl(const std::filesystem::path& path);

std::vector<AnnotatedSentence> read_corpus(const std::filesystem::path& path);
void write_corpus(std::ostream& out, const std::vector<AnnotatedSentence>& corpus);
void write_corpus(const std::filesystem::path& path,
                  const std::vector<AnnotatedSentence>& corpus);

// One compact record per line, UTF-8, LF endings.
void write_jsonl_line(std::ostream& out, const Json& record);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace selfdesc::io
