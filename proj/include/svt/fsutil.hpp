#pragma once

#include <filesystem>
#include <string>

namespace svt {

std::string read_file(const std::filesystem::path& path);

// write-temp-then-rename; creates parent directories
void atomic_write_file(const std::filesystem::path& path,
                       const std::string& contents);

}  // namespace svt
