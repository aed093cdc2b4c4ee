// Copyright 2026 The lmeval Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lmeval/io.h"

#include <openssl/evp.h>
#include <zlib.h>

#include <array>
#include <fstream>
#include <memory>
#include <sstream>

#include "lmeval/error.h"

namespace lmeval {
namespace {

struct GzCloser {
  void operator()(gzFile f) const { gzclose(f); }
};
using GzHandle = std::unique_ptr<std::remove_pointer_t<gzFile>, GzCloser>;

}  // namespace

void ForEachLine(const std::filesystem::path& path,
                 const std::function<void(std::string_view, std::size_t)>& fn) {
  // gzopen reads uncompressed files unchanged.
  GzHandle file(gzopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open " + path.string());
  gzbuffer(file.get(), 1 << 17);

  std::array<char, 1 << 16> chunk;
  std::string line;
  std::size_t line_number = 0;
  bool have_partial = false;
  while (true) {
    const int n = gzread(file.get(), chunk.data(),
                         static_cast<unsigned>(chunk.size()));
    if (n < 0) {
      int errnum = 0;
      throw IoError("read error in " + path.string() + ": " +
                    gzerror(file.get(), &errnum));
    }
    if (n == 0) break;
    std::string_view data(chunk.data(), static_cast<std::size_t>(n));
    while (!data.empty()) {
      const auto nl = data.find('\n');
      if (nl == std::string_view::npos) {
        line.append(data);
        have_partial = true;
        break;
      }
      line.append(data.substr(0, nl));
      data.remove_prefix(nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      fn(line, ++line_number);
      line.clear();
      have_partial = false;
    }
  }
  if (have_partial && !line.empty()) {
    if (line.back() == '\r') line.pop_back();
    fn(line, ++line_number);
  }
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void WriteFile(const std::filesystem::path& path, std::string_view contents) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) {
      throw IoError("cannot create " + path.parent_path().string() + ": " +
                    ec.message());
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  out.close();
  if (!out) throw IoError("write failed for " + path.string());
}

std::string Sha256Hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

}  // namespace lmeval
