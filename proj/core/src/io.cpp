#include "koopgen/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "koopgen/error.hpp"

namespace koopgen {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "invalid input";
    case ErrorKind::kUnsupported: return "unsupported";
    case ErrorKind::kDivergence: return "divergence";
    case ErrorKind::kDegenerateData: return "degenerate dataset";
    case ErrorKind::kInsufficientRank: return "insufficient rank";
    case ErrorKind::kNotPositiveDefinite: return "not positive definite";
    case ErrorKind::kDegenerateMode: return "degenerate mode";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kDependency: return "missing dependency";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kValidation:
    case ErrorKind::kInvalidInput:
      return 2;
    case ErrorKind::kDivergence:
    case ErrorKind::kDegenerateData:
    case ErrorKind::kInsufficientRank:
    case ErrorKind::kNotPositiveDefinite:
    case ErrorKind::kDegenerateMode:
      return 3;
    case ErrorKind::kDependency:
      return 4;
    default:
      return 1;
  }
}

}  // namespace koopgen

namespace koopgen::io {

namespace {

constexpr std::array<char, 8> kRealMagic = {'K', 'G', 'M', 'A', 'T', 'R', '1', '\0'};
constexpr std::array<char, 8> kComplexMagic = {'K', 'G', 'M', 'A', 'T', 'C', '1', '\0'};

void write_header(std::ofstream& out, const std::array<char, 8>& magic,
                  std::uint64_t rows, std::uint64_t cols) {
  out.write(magic.data(), magic.size());
  out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
  out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
}

std::pair<Index, Index> read_header(std::ifstream& in,
                                    const std::array<char, 8>& magic,
                                    const std::filesystem::path& path) {
  std::array<char, 8> got{};
  std::uint64_t rows = 0, cols = 0;
  in.read(got.data(), got.size());
  in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
  in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
  if (!in || got != magic) {
    throw Error(ErrorKind::kIo, "bad matrix file header: " + path.string());
  }
  return {static_cast<Index>(rows), static_cast<Index>(cols)};
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return in;
}

template <typename Writer>
void atomic_write(const std::filesystem::path& path, Writer&& writer) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
    writer(out);
    if (!out) throw Error(ErrorKind::kIo, "write failed: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

std::string format_double(double value) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) return "nan";
  return std::string(buf.data(), end);
}

std::string read_text(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  atomic_write(path, [&](std::ofstream& out) {
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
  });
}

CsvTable read_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  CsvTable table;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(s);
    while (std::getline(ls, cell, ',')) {
      auto b = cell.find_first_not_of(" \t\r");
      auto e = cell.find_last_not_of(" \t\r");
      cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    return cells;
  };
  if (!std::getline(in, line)) {
    throw Error(ErrorKind::kIo, "empty csv: " + path.string());
  }
  table.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = split(line);
    if (cells.size() != table.header.size()) {
      throw Error(ErrorKind::kIo, "ragged csv row in " + path.string());
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) {
      double v = 0.0;
      auto [p, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      if (ec != std::errc() || p != c.data() + c.size()) {
        throw Error(ErrorKind::kIo, "bad number '" + c + "' in " + path.string());
      }
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_matrix(const std::filesystem::path& path, const Mat& m) {
  atomic_write(path, [&](std::ofstream& out) {
    write_header(out, kRealMagic, m.rows(), m.cols());
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(double)));
  });
}

Mat read_matrix(const std::filesystem::path& path) {
  auto in = open_in(path);
  auto [rows, cols] = read_header(in, kRealMagic, path);
  Mat m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!in) throw Error(ErrorKind::kIo, "truncated matrix file " + path.string());
  return m;
}

void write_cmatrix(const std::filesystem::path& path, const CMat& m) {
  atomic_write(path, [&](std::ofstream& out) {
    write_header(out, kComplexMagic, m.rows(), m.cols());
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(Complex)));
  });
}

CMat read_cmatrix(const std::filesystem::path& path) {
  auto in = open_in(path);
  auto [rows, cols] = read_header(in, kComplexMagic, path);
  CMat m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(m.size() * sizeof(Complex)));
  if (!in) throw Error(ErrorKind::kIo, "truncated matrix file " + path.string());
  return m;
}

void write_matrix_csv(const std::filesystem::path& path, const Mat& m) {
  std::string text;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) text += ',';
      text += format_double(m(i, j));
    }
    text += '\n';
  }
  write_text(path, text);
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(),
             nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  return sha256_hex(read_text(path));
}

}  // namespace koopgen::io
