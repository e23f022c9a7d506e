#pragma once

#include <map>
#include <string>
#include <vector>

namespace rdlm {

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);

// key=value file with '#' comments and blank lines. Used for sampler config
// files, hardware profiles and run snapshots.
std::map<std::string, std::string> parse_kv_file(const std::string& path);
std::map<std::string, std::string> parse_kv_lines(const std::string& text);
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace rdlm
