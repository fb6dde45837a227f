#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace speechyolo {

// Writes `contents` to `path` via a sibling temp file and rename, so a
// reader never observes a partially written file under the final name.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace speechyolo
