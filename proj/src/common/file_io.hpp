#pragma once

#include <string>
#include <string_view>

namespace divseg {

// Whole-file binary read/write; failures raise IoError naming the path.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

}  // namespace divseg
