#include "tvlearn/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <memory>
#include <sstream>
#include <vector>

#include "tvlearn/error.hpp"

namespace tvlearn {

namespace {

bool ends_with_png(const std::string& path) {
  if (path.size() < 4) return false;
  std::string ext = path.substr(path.size() - 4);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png";
}

int max_level(int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw PreconditionError("bit depth must be 8 or 16");
  return bit_depth == 8 ? 255 : 65535;
}

std::vector<unsigned> quantize(const ImageGrid& img, int maxval) {
  std::vector<unsigned> out(img.size());
  for (std::size_t k = 0; k < img.size(); ++k) {
    const double v = std::clamp(img[k], 0.0, 1.0);
    out[k] = static_cast<unsigned>(std::lround(v * maxval));
  }
  return out;
}

ImageGrid from_levels(std::size_t nx, std::size_t ny, const std::vector<unsigned>& lv, unsigned maxval) {
  if (nx < 2 || ny < 2) throw IoError("image must be at least 2x2");
  std::vector<double> v(lv.size());
  for (std::size_t k = 0; k < lv.size(); ++k) {
    if (lv[k] > maxval) throw IoError("pixel value exceeds maxval");
    v[k] = static_cast<double>(lv[k]) / maxval;
  }
  return ImageGrid(nx, ny, ImageGrid::default_spacing(nx, ny), std::move(v));
}

// Next whitespace-separated PGM header token, skipping comments.
std::string pgm_token(const std::string& buf, std::size_t& pos) {
  while (pos < buf.size()) {
    const char c = buf[pos];
    if (c == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos])) && buf[pos] != '#') ++pos;
  if (start == pos) throw IoError("truncated PGM header");
  return buf.substr(start, pos - start);
}

unsigned parse_uint(const std::string& tok) {
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c); })) {
    throw IoError("malformed PGM number '" + tok + "'");
  }
  const unsigned long v = std::stoul(tok);
  if (v > 65535ul * 65535ul) throw IoError("PGM number out of range");
  return static_cast<unsigned>(v);
}

ImageGrid read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  const std::string magic = pgm_token(buf, pos);
  if (magic == "P3" || magic == "P6") throw IoError("'" + path + "': color images are not supported");
  if (magic != "P2" && magic != "P5") throw IoError("'" + path + "': not a PGM file");
  const unsigned nx = parse_uint(pgm_token(buf, pos));
  const unsigned ny = parse_uint(pgm_token(buf, pos));
  const unsigned maxval = parse_uint(pgm_token(buf, pos));
  if (nx == 0 || ny == 0 || maxval == 0 || maxval > 65535) throw IoError("'" + path + "': bad PGM header");
  const std::size_t n = static_cast<std::size_t>(nx) * ny;
  std::vector<unsigned> lv(n);
  if (magic == "P2") {
    for (std::size_t k = 0; k < n; ++k) lv[k] = parse_uint(pgm_token(buf, pos));
  } else {
    ++pos;  // single whitespace after maxval
    const std::size_t bpp = maxval > 255 ? 2 : 1;
    if (buf.size() < pos + n * bpp) throw IoError("'" + path + "': truncated PGM raster");
    for (std::size_t k = 0; k < n; ++k) {
      const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + pos + k * bpp);
      lv[k] = bpp == 2 ? (unsigned(p[0]) << 8) | p[1] : p[0];
    }
  }
  return from_levels(nx, ny, lv, maxval);
}

void write_pgm(const ImageGrid& img, const std::string& path, int bit_depth, bool ascii) {
  const int maxval = max_level(bit_depth);
  const auto lv = quantize(img, maxval);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << (ascii ? "P2\n" : "P5\n") << img.nx() << ' ' << img.ny() << '\n' << maxval << '\n';
  if (ascii) {
    for (std::size_t j = 0; j < img.ny(); ++j) {
      for (std::size_t i = 0; i < img.nx(); ++i) out << lv[j * img.nx() + i] << (i + 1 < img.nx() ? ' ' : '\n');
    }
  } else {
    std::string raw;
    for (unsigned v : lv) {
      if (bit_depth == 16) raw.push_back(static_cast<char>(v >> 8));
      raw.push_back(static_cast<char>(v & 0xff));
    }
    out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

// Keep libpng quiet; the message ends up in the IoError instead of on stderr.
struct PngMessage {
  char text[160] = {};
};

void png_error_quiet(png_structp png, png_const_charp msg) {
  if (auto* m = static_cast<PngMessage*>(png_get_error_ptr(png))) {
    std::snprintf(m->text, sizeof m->text, "%s", msg);
  }
  png_longjmp(png, 1);
}

void png_warning_quiet(png_structp, png_const_charp) {}

struct PngData {
  png_uint_32 w = 0, h = 0;
  unsigned maxval = 0;
  std::vector<unsigned> levels;
  bool color = false;
};

void decode_png(png_structp png, png_infop info, PngData& out) {
  png_read_info(png, info);
  out.w = png_get_image_width(png, info);
  out.h = png_get_image_height(png, info);
  int depth = png_get_bit_depth(png, info);
  const int ctype = png_get_color_type(png, info);
  if (ctype & PNG_COLOR_MASK_COLOR) {
    out.color = true;
    return;
  }
  if (ctype & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
    depth = 8;
  }
  png_read_update_info(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> raster(rowbytes * out.h);
  std::vector<png_bytep> rows(out.h);
  for (png_uint_32 r = 0; r < out.h; ++r) rows[r] = raster.data() + r * rowbytes;
  png_read_image(png, rows.data());
  out.maxval = depth == 16 ? 65535 : 255;
  out.levels.resize(static_cast<std::size_t>(out.w) * out.h);
  for (png_uint_32 r = 0; r < out.h; ++r) {
    for (png_uint_32 c = 0; c < out.w; ++c) {
      // 16-bit samples are stored big-endian
      out.levels[r * out.w + c] = depth == 16 ? (unsigned(rows[r][2 * c]) << 8) | rows[r][2 * c + 1] : rows[r][c];
    }
  }
}

ImageGrid read_png(const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open '" + path + "'");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError("'" + path + "': not a PNG file");
  }
  PngMessage msg;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &msg, png_error_quiet, png_warning_quiet);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng initialization failed");
  }
  PngData data;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("'" + path + "': corrupt PNG (" + std::string(msg.text) + ")");
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  decode_png(png, info, data);
  png_destroy_read_struct(&png, &info, nullptr);
  if (data.color) throw IoError("'" + path + "': color images are not supported");
  return from_levels(data.w, data.h, data.levels, data.maxval);
}

void write_png(const ImageGrid& img, const std::string& path, int bit_depth) {
  const int maxval = max_level(bit_depth);
  const auto lv = quantize(img, maxval);
  const std::size_t bpp = bit_depth / 8;
  std::vector<unsigned char> raster(lv.size() * bpp);
  for (std::size_t k = 0; k < lv.size(); ++k) {
    if (bpp == 2) {
      raster[2 * k] = static_cast<unsigned char>(lv[k] >> 8);
      raster[2 * k + 1] = static_cast<unsigned char>(lv[k] & 0xff);
    } else {
      raster[k] = static_cast<unsigned char>(lv[k]);
    }
  }
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot write '" + path + "'");
  PngMessage msg;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &msg, png_error_quiet, png_warning_quiet);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialization failed");
  }
  std::vector<png_bytep> rows(img.ny());
  for (std::size_t r = 0; r < img.ny(); ++r) rows[r] = raster.data() + r * img.nx() * bpp;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("write failed for '" + path + "' (" + std::string(msg.text) + ")");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.nx()), static_cast<png_uint_32>(img.ny()), bit_depth,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

ImageGrid read_image(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw IoError("cannot open '" + path + "'");
  char c0 = 0;
  probe.get(c0);
  probe.close();
  if (static_cast<unsigned char>(c0) == 0x89) return read_png(path);
  return read_pgm(path);
}

void write_image(const ImageGrid& img, const std::string& path, int bit_depth) {
  max_level(bit_depth);
  if (ends_with_png(path)) {
    write_png(img, path, bit_depth);
  } else {
    write_pgm(img, path, bit_depth, false);
  }
}

void write_pgm_ascii(const ImageGrid& img, const std::string& path, int bit_depth) {
  write_pgm(img, path, bit_depth, true);
}

double psnr(const ImageGrid& u, const ImageGrid& reference) {
  if (!u.same_shape(reference)) throw PreconditionError("psnr: shape mismatch");
  double mse = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double d = u[k] - reference[k];
    mse += d * d;
  }
  mse /= static_cast<double>(u.size());
  return mse > 0.0 ? 10.0 * std::log10(1.0 / mse) : std::numeric_limits<double>::infinity();
}

}  // namespace tvlearn
