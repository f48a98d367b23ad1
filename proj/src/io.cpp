#include "caol/io.hpp"

#include "caol/majorizers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace caol {

namespace {

constexpr char kImageMagic[8] = {'C', 'A', 'O', 'L', 'I', 'M', 'G', '0'};
constexpr char kBankMagic[8] = {'C', 'A', 'O', 'L', 'F', 'B', '0', '0'};
constexpr char kMajMagic[8] = {'C', 'A', 'O', 'L', 'M', 'J', '0', '0'};

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::invalid_argument(path + ": " + what);
}

void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

void write_f64(std::ostream& os, const double* p, size_t n) {
  // Little-endian hosts only; asserted at build time for the supported
  // platforms via the byte-order macro.
#if defined(__BYTE_ORDER__) && __BYTE_ORDER__ != __ORDER_LITTLE_ENDIAN__
#error "big-endian hosts need byte swapping in io.cpp"
#endif
  os.write(reinterpret_cast<const char*>(p), n * sizeof(double));
}

void read_f64(std::istream& is, double* p, size_t n) {
  is.read(reinterpret_cast<char*>(p), n * sizeof(double));
}

}  // namespace

Image load_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(path, "cannot open");
  std::string magic;
  is >> magic;
  if (magic != "P5") fail(path, "not a binary PGM (P5) file");
  // Netpbm allows '#' comments between tokens.
  auto next_int = [&]() -> long {
    for (;;) {
      int c = is.peek();
      if (c == '#') {
        std::string line;
        std::getline(is, line);
      } else if (std::isspace(c)) {
        is.get();
      } else {
        break;
      }
    }
    long v;
    is >> v;
    return v;
  };
  const long w = next_int();
  const long h = next_int();
  const long maxval = next_int();
  is.get();  // single whitespace before raster
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535)
    fail(path, "bad PGM header");
  Image out(h, w);
  if (maxval <= 255) {
    std::vector<unsigned char> buf(static_cast<size_t>(h) * w);
    is.read(reinterpret_cast<char*>(buf.data()), buf.size());
    if (!is) fail(path, "truncated PGM raster");
    for (Eigen::Index i = 0; i < out.size(); ++i)
      out.v[i] = buf[i] / static_cast<double>(maxval);
  } else {
    std::vector<unsigned char> buf(static_cast<size_t>(h) * w * 2);
    is.read(reinterpret_cast<char*>(buf.data()), buf.size());
    if (!is) fail(path, "truncated PGM raster");
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      const unsigned sample = (static_cast<unsigned>(buf[2 * i]) << 8) |
                              buf[2 * i + 1];  // 16-bit PGM is big-endian
      out.v[i] = sample / static_cast<double>(maxval);
    }
  }
  return out;
}

void save_pgm(const Image& x, const std::string& path, int maxval) {
  require(maxval >= 1 && maxval <= 65535, "save_pgm: maxval out of range");
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(path, "cannot open for writing");
  os << "P5\n" << x.w << " " << x.h << "\n" << maxval << "\n";
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double c = std::clamp(x.v[i], 0.0, 1.0);
    const unsigned q =
        static_cast<unsigned>(std::lround(c * maxval));
    if (maxval <= 255) {
      const unsigned char b = static_cast<unsigned char>(q);
      os.write(reinterpret_cast<const char*>(&b), 1);
    } else {
      const unsigned char b[2] = {static_cast<unsigned char>(q >> 8),
                                  static_cast<unsigned char>(q & 0xff)};
      os.write(reinterpret_cast<const char*>(b), 2);
    }
  }
}

Image load_raw(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(path, "cannot open");
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kImageMagic, 8) != 0)
    fail(path, "bad raw image magic");
  const uint32_t h = read_u32(is);
  const uint32_t w = read_u32(is);
  if (h < 1 || w < 1) fail(path, "bad raw image header");
  Image out(h, w);
  read_f64(is, out.v.data(), out.size());
  if (!is) fail(path, "truncated raw image");
  return out;
}

void save_raw(const Image& x, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(path, "cannot open for writing");
  os.write(kImageMagic, 8);
  write_u32(os, static_cast<uint32_t>(x.h));
  write_u32(os, static_cast<uint32_t>(x.w));
  write_f64(os, x.v.data(), x.size());
}

Image load_image(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(path, "cannot open");
  char head[8] = {0};
  is.read(head, 8);
  is.close();
  if (std::memcmp(head, kImageMagic, 8) == 0) return load_raw(path);
  if (head[0] == 'P' && head[1] == '5') return load_pgm(path);
  fail(path, "unrecognized image format");
}

FilterBank load_filterbank(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(path, "cannot open");
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kBankMagic, 8) != 0)
    fail(path, "bad filter bank magic");
  const uint32_t rh = read_u32(is);
  const uint32_t rw = read_u32(is);
  const uint32_t k = read_u32(is);
  if (rh < 1 || rw < 1 || k < 1) fail(path, "bad filter bank header");
  FilterBank bank(rh, rw, k);
  read_f64(is, bank.d.data(), static_cast<size_t>(bank.taps()) * k);
  if (!is) fail(path, "truncated filter bank");
  return bank;
}

void save_filterbank(const FilterBank& bank, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(path, "cannot open for writing");
  os.write(kBankMagic, 8);
  write_u32(os, static_cast<uint32_t>(bank.rh));
  write_u32(os, static_cast<uint32_t>(bank.rw));
  write_u32(os, static_cast<uint32_t>(bank.count()));
  write_f64(os, bank.d.data(),
            static_cast<size_t>(bank.taps()) * bank.count());
}

Majorizer load_majorizer(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(path, "cannot open");
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMajMagic, 8) != 0)
    fail(path, "bad majorizer magic");
  char tag;
  is.read(&tag, 1);
  const uint32_t n = read_u32(is);
  if (n < 1) fail(path, "bad majorizer dimension");
  switch (tag) {
    case 0: {
      Eigen::MatrixXd m(n, n);
      read_f64(is, m.data(), static_cast<size_t>(n) * n);
      if (!is) fail(path, "truncated majorizer");
      return Majorizer::dense(std::move(m));
    }
    case 1: {
      Eigen::VectorXd d(n);
      read_f64(is, d.data(), n);
      if (!is) fail(path, "truncated majorizer");
      return Majorizer::diagonal(std::move(d));
    }
    case 2: {
      double c;
      read_f64(is, &c, 1);
      if (!is) fail(path, "truncated majorizer");
      return Majorizer::scaled_identity(c, n);
    }
    default:
      fail(path, "unknown majorizer form tag");
  }
}

void save_majorizer(const Majorizer& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(path, "cannot open for writing");
  os.write(kMajMagic, 8);
  const char tag = static_cast<char>(m.form());
  os.write(&tag, 1);
  write_u32(os, static_cast<uint32_t>(m.dim()));
  switch (m.form()) {
    case MajorizerForm::dense:
      write_f64(os, m.dense_matrix().data(),
                static_cast<size_t>(m.dim()) * m.dim());
      break;
    case MajorizerForm::diagonal:
      write_f64(os, m.diagonal_vector().data(), m.dim());
      break;
    case MajorizerForm::scaled_identity: {
      const double c = m.scale();
      write_f64(os, &c, 1);
      break;
    }
  }
}

Image filter_mosaic(const FilterBank& bank) {
  const Eigen::Index k = bank.count();
  const Eigen::Index cols =
      static_cast<Eigen::Index>(std::ceil(std::sqrt(static_cast<double>(k))));
  const Eigen::Index rows = (k + cols - 1) / cols;
  Image out(rows * (bank.rh + 1) + 1, cols * (bank.rw + 1) + 1);
  out.v.setConstant(1.0);
  for (Eigen::Index i = 0; i < k; ++i) {
    const Eigen::Index tr = i / cols, tc = i % cols;
    const double lo = bank.d.col(i).minCoeff();
    const double hi = bank.d.col(i).maxCoeff();
    const double span = hi > lo ? hi - lo : 1.0;
    for (Eigen::Index a = 0; a < bank.rh; ++a)
      for (Eigen::Index b = 0; b < bank.rw; ++b)
        out.at(tr * (bank.rh + 1) + 1 + a, tc * (bank.rw + 1) + 1 + b) =
            (bank.d(a * bank.rw + b, i) - lo) / span;
  }
  return out;
}

void write_csv(const std::string& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream os(path);
  if (!os) fail(path, "cannot open for writing");
  for (size_t i = 0; i < header.size(); ++i)
    os << header[i] << (i + 1 < header.size() ? "," : "\n");
  os.precision(17);
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i)
      os << row[i] << (i + 1 < row.size() ? "," : "\n");
  }
}

}  // namespace caol
