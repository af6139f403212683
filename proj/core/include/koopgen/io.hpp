#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "koopgen/types.hpp"

namespace koopgen::io {

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

std::string read_text(const std::filesystem::path& path);
// Writes through a temporary file and renames it into place.
void write_text(const std::filesystem::path& path, std::string_view text);

// Simple CSV with a single header row. Values are parsed as doubles.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};
CsvTable read_csv(const std::filesystem::path& path);

// Little-endian dense matrix file: magic, rows, cols, column-major doubles.
void write_matrix(const std::filesystem::path& path, const Mat& m);
Mat read_matrix(const std::filesystem::path& path);
void write_cmatrix(const std::filesystem::path& path, const CMat& m);
CMat read_cmatrix(const std::filesystem::path& path);

// Dense CSV dump without header, one matrix row per line.
void write_matrix_csv(const std::filesystem::path& path, const Mat& m);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace koopgen::io
